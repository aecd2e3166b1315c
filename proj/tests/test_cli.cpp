#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dreamloom/cli.hpp"
#include "dreamloom/image_codec.hpp"
#include "dreamloom/store.hpp"
#include "test_support.hpp"

namespace dltest {
namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream f(p, std::ios::binary);
    f << bytes;
}

TEST(Cli, UnknownSubcommandIsUsageError) {
    EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
    EXPECT_EQ(run({}).code, cli::kExitUsage);
}

TEST(Cli, HelpExitsZero) {
    const CliRun r = run({"--help"});
    EXPECT_EQ(r.code, cli::kExitOk);
    EXPECT_NE(r.out.find("palette"), std::string::npos);
}

TEST(Cli, PaletteTsvUniformRed) {
    TempDir dir;
    const fs::path file = dir.path() / "red.png";
    write_bytes(file, encode_png(solid_image(16, 16, {255, 0, 0})));
    const CliRun r = run({"palette", file.string(), "--format", "tsv"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(r.out, file.string() + "\t1\t#FF0000\t1.0000\n");
}

TEST(Cli, PaletteTsvSplitImageHasTwoRows) {
    TempDir dir;
    const fs::path file = dir.path() / "split.png";
    write_bytes(file, encode_png(split_image(20, 20, {255, 0, 0}, {0, 0, 255}, 0.75)));
    const CliRun r = run({"palette", file.string(), "--format", "tsv"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(r.out, file.string() + "\t1\t#FF0000\t0.7500\n" + file.string() + "\t2\t#0000FF\t0.2500\n");
}

TEST(Cli, PaletteKLimitsRows) {
    TempDir dir;
    const fs::path file = dir.path() / "split.png";
    write_bytes(file, encode_png(split_image(20, 20, {255, 0, 0}, {0, 0, 255}, 0.75)));
    const CliRun r = run({"palette", file.string(), "-k", "1", "--format", "tsv"});
    ASSERT_EQ(r.code, cli::kExitOk);
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
}

TEST(Cli, PaletteMissingFileFailsBatch) {
    TempDir dir;
    const fs::path good = dir.path() / "red.png";
    write_bytes(good, encode_png(solid_image(4, 4, {255, 0, 0})));
    const fs::path missing = dir.path() / "nope.png";
    const CliRun r = run({"palette", good.string(), missing.string(), "--format", "tsv"});
    EXPECT_EQ(r.code, cli::kExitFailure);
    EXPECT_NE(r.out.find(good.string() + "\t1\t#FF0000"), std::string::npos);
    EXPECT_NE(r.out.find(missing.string() + "\terror\tIoFailure"), std::string::npos);
}

TEST(Cli, PaletteUndecodableFile) {
    TempDir dir;
    const fs::path junk = dir.path() / "junk.png";
    write_bytes(junk, "not an image");
    const CliRun r = run({"palette", junk.string(), "--format", "tsv"});
    EXPECT_EQ(r.code, cli::kExitFailure);
    EXPECT_NE(r.out.find("\terror\tUndecodableImage"), std::string::npos);
}

TEST(Cli, PaletteJson) {
    TempDir dir;
    const fs::path file = dir.path() / "red.png";
    write_bytes(file, encode_png(solid_image(4, 4, {0, 255, 0})));
    const CliRun r = run({"palette", file.string(), "--format", "json"});
    ASSERT_EQ(r.code, cli::kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_NE(j.dump().find("#00FF00"), std::string::npos);
}

TEST(Cli, PaletteRejectsBadK) {
    EXPECT_EQ(run({"palette", "x.png", "-k", "0"}).code, cli::kExitUsage);
}

TEST(Cli, SeedDemoTwiceGivesDistinctValidStories) {
    TempDir dir;
    const CliRun a = run({"seed-demo", "--data-dir", dir.path().string(), "--format", "json"});
    const CliRun b = run({"seed-demo", "--data-dir", dir.path().string(), "--format", "json"});
    ASSERT_EQ(a.code, cli::kExitOk) << a.err;
    ASSERT_EQ(b.code, cli::kExitOk) << b.err;
    const auto ja = nlohmann::json::parse(a.out);
    const auto jb = nlohmann::json::parse(b.out);
    EXPECT_NE(ja.at("story_id"), jb.at("story_id"));
    for (const auto& j : {ja, jb}) {
        const CliRun v = run({"validate-bundle", j.at("bundle").get<std::string>()});
        EXPECT_EQ(v.code, cli::kExitOk) << v.out;
        EXPECT_NE(v.out.find(": clean"), std::string::npos);
        const Story s = store::load_story(j.at("bundle").get<std::string>());
        ASSERT_EQ(s.scenes.size(), 4u);
        EXPECT_EQ(s.scenes[0].kind, SceneKind::Literal);
        EXPECT_EQ(s.scenes[1].kind, SceneKind::Metaphorical);
        EXPECT_EQ(s.scenes[2].kind, SceneKind::Metaphorical);
        EXPECT_EQ(s.scenes[3].kind, SceneKind::Literal);
    }
}

TEST(Cli, ValidateBundleReportsDeletedImage) {
    TempDir dir;
    const CliRun a = run({"seed-demo", "--data-dir", dir.path().string(), "--format", "json"});
    ASSERT_EQ(a.code, cli::kExitOk);
    const fs::path bundle = nlohmann::json::parse(a.out).at("bundle").get<std::string>();
    const auto first = *fs::directory_iterator(bundle / "images");
    fs::remove(first.path());
    const CliRun v = run({"validate-bundle", bundle.string(), "--format", "json"});
    EXPECT_EQ(v.code, cli::kExitFailure);
    const auto j = nlohmann::json::parse(v.out);
    EXPECT_FALSE(j.at("clean").get<bool>());
    EXPECT_FALSE(j.at("violations").empty());
}

TEST(Cli, ValidateMissingBundleFails) {
    TempDir dir;
    EXPECT_NE(run({"validate-bundle", (dir.path() / "absent").string()}).code, cli::kExitOk);
}

TEST(Cli, ServeRejectsBadBind) {
    EXPECT_EQ(run({"serve", "--bind", "host:notaport"}).code, cli::kExitUsage);
}

}  // namespace
}  // namespace dltest
