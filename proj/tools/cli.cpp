#include "dreamloom/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dreamloom/api_server.hpp"
#include "dreamloom/error.hpp"
#include "dreamloom/palette.hpp"
#include "dreamloom/seed_demo.hpp"
#include "dreamloom/store.hpp"

namespace dreamloom::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

PromptTemplates templates_from(const std::string& path) {
    return path.empty() ? PromptTemplates::builtin() : PromptTemplates::load(path);
}

int palette_batch(const std::vector<std::string>& files, std::size_t k, const std::string& format,
                  std::ostream& out, std::ostream& err) {
    bool failed = false;
    json report = json::array();
    for (const auto& file : files) {
        try {
            const Palette p = extract_palette(store::read_file(file), k);
            if (format == "tsv") {
                for (std::size_t i = 0; i < p.entries.size(); ++i) {
                    out << fmt::format("{}\t{}\t{}\t{:.4f}\n", file, i + 1, p.entries[i].color.hex(),
                                       p.entries[i].weight);
                }
            } else if (format == "json") {
                json entries = json::array();
                for (const auto& e : p.entries) entries.push_back({{"hex", e.color.hex()}, {"weight", e.weight}});
                report.push_back({{"file", file}, {"image_ref", p.source_image}, {"entries", entries}});
            } else {
                out << file << "\n";
                for (std::size_t i = 0; i < p.entries.size(); ++i) {
                    out << fmt::format("  {:>2}  {}  {:.4f}\n", i + 1, p.entries[i].color.hex(), p.entries[i].weight);
                }
            }
        } catch (const Error& e) {
            failed = true;
            const std::string code{error_code_name(e.code())};
            if (format == "tsv") {
                out << fmt::format("{}\terror\t{}\t{}\n", file, code, e.what());
            } else if (format == "json") {
                report.push_back({{"file", file}, {"error", {{"code", code}, {"message", e.what()}}}});
            } else {
                err << fmt::format("{}: {} ({})\n", file, e.what(), code);
            }
        }
    }
    if (format == "json") out << report.dump(2) << "\n";
    return failed ? kExitFailure : kExitOk;
}

int validate(const std::string& path, const std::string& format, std::ostream& out) {
    const store::BundleReport r = store::validate_bundle(path);
    if (format == "json") {
        out << json{{"bundle", path}, {"clean", r.clean()}, {"violations", r.violations}}.dump(2) << "\n";
    } else if (r.clean()) {
        out << path << ": clean\n";
    } else {
        out << path << ": " << r.violations.size() << " violation(s)\n";
        for (const auto& v : r.violations) out << "  " << v << "\n";
    }
    return r.clean() ? kExitOk : kExitFailure;
}

int serve(const std::string& bind, const std::string& data_dir, const std::string& mode,
          const std::string& templates, const std::vector<std::string>& cors, std::ostream& out) {
    ProviderConfig config = ProviderConfig::from_env();
    if (!mode.empty()) config.chat_mode = config.image_mode = parse_provider_mode(mode);
    const BindAddress addr = parse_bind_address(bind);

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    Studio studio(data_dir, make_providers(config), templates_from(templates), config);
    ServerConfig sc;
    sc.host = addr.host;
    sc.port = addr.port;
    if (!cors.empty()) sc.cors_origins = cors;
    sc.drain_timeout = config.deadline + std::chrono::seconds{10};
    ApiServer server(studio, sc);
    const int port = server.bind();
    out << fmt::format("listening on http://{}:{} (chat: {}, image: {}, data: {})\n", addr.host, port,
                       to_string(config.chat_mode), to_string(config.image_mode), data_dir)
        << std::flush;

    std::atomic<bool> done{false};
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        if (!done.load()) server.stop();
    });
    server.run();
    done = true;
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    server.stop();
    out << "stopped\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"dreamloom: visual dream storytelling service and tools", "dreamloom"};
    app.require_subcommand(1);

    std::string bind = "127.0.0.1:8080";
    std::string data_dir = "data";
    std::string mode;
    std::string templates;
    std::string format = "text";
    std::vector<std::string> cors;
    std::vector<std::string> files;
    std::size_t k = 8;
    std::string bundle;

    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
    serve_cmd->add_option("--bind", bind, "host:port to listen on")->capture_default_str();
    serve_cmd->add_option("--data-dir", data_dir, "Directory holding story bundles")->capture_default_str();
    serve_cmd->add_option("--provider-mode", mode, "live or mock (overrides MM_PROVIDER_MODE)")
        ->check(CLI::IsMember({"live", "mock"}));
    serve_cmd->add_option("--templates", templates, "Prompt template file")->check(CLI::ExistingFile);
    serve_cmd->add_option("--cors-origin", cors, "Allowed browser origin (repeatable, * for any)");

    auto* seed_cmd = app.add_subcommand("seed-demo", "Create the demo story with mock providers");
    seed_cmd->add_option("--data-dir", data_dir, "Directory holding story bundles")->capture_default_str();
    seed_cmd->add_option("--templates", templates, "Prompt template file")->check(CLI::ExistingFile);
    seed_cmd->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));

    auto* palette_cmd = app.add_subcommand("palette", "Extract dominant colours from images");
    palette_cmd->add_option("files", files, "PNG or JPEG files")->required();
    palette_cmd->add_option("-k", k, "Maximum palette size")->check(CLI::Range(1, 64))->capture_default_str();
    palette_cmd->add_option("--format", format, "text, tsv or json")->check(CLI::IsMember({"text", "tsv", "json"}));

    auto* validate_cmd = app.add_subcommand("validate-bundle", "Check a story bundle");
    validate_cmd->add_option("path", bundle, "Bundle directory")->required();
    validate_cmd->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*serve_cmd) return serve(bind, data_dir, mode, templates, cors, out);
        if (*seed_cmd) {
            const DemoSeed seed = seed_demo(data_dir, templates_from(templates));
            if (format == "json") {
                out << json{{"story_id", seed.story_id}, {"bundle", seed.bundle.string()}}.dump() << "\n";
            } else {
                out << fmt::format("seeded story {} at {}\n", seed.story_id, seed.bundle.string());
            }
            return kExitOk;
        }
        if (*palette_cmd) return palette_batch(files, k, format, out, err);
        if (*validate_cmd) return validate(bundle, format, out);
    } catch (const Error& e) {
        err << fmt::format("error: {} ({})\n", e.what(), error_code_name(e.code()));
        return e.code() == ErrorCode::InvalidRequest ? kExitUsage : kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace dreamloom::cli
