#include <gtest/gtest.h>

#include "dreamloom/error.hpp"
#include "dreamloom/image_codec.hpp"
#include "dreamloom/store.hpp"
#include "test_support.hpp"

using namespace dreamloom;
using dltest::data_path;

TEST(ImageCodec, PngRoundTripIsLossless) {
    std::mt19937_64 rng(7);
    const RgbImage img = dltest::random_image(rng, 37, 19, 50);
    const std::string png = encode_png(img);
    EXPECT_EQ(sniff_format(png), ImageFormat::Png);
    EXPECT_EQ(mime_type(ImageFormat::Png), "image/png");
    const RgbImage back = decode_image(png);
    EXPECT_EQ(back.width, 37);
    EXPECT_EQ(back.height, 19);
    EXPECT_EQ(back.pixels, img.pixels);
}

TEST(ImageCodec, DecodesPhotographicPng) {
    const RgbImage img = decode_image(store::read_file(data_path("astronaut.png")));
    EXPECT_EQ(img.width, 512);
    EXPECT_EQ(img.height, 512);
}

TEST(ImageCodec, DecodesJpeg) {
    const std::string bytes = store::read_file(data_path("rocket.jpg"));
    EXPECT_EQ(sniff_format(bytes), ImageFormat::Jpeg);
    EXPECT_EQ(mime_type(ImageFormat::Jpeg), "image/jpeg");
    const RgbImage img = decode_image(bytes);
    EXPECT_EQ(img.width, 640);
    EXPECT_EQ(img.height, 427);
}

TEST(ImageCodec, RejectsGarbage) {
    EXPECT_EQ(sniff_format("hello"), ImageFormat::Unknown);
    try {
        decode_image("definitely not an image");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UndecodableImage);
    }
    std::string truncated = encode_png(dltest::solid_image(8, 8, {1, 2, 3}));
    truncated.resize(truncated.size() / 2);
    try {
        decode_image(truncated);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UndecodableImage);
    }
    std::string jpeg = store::read_file(data_path("rocket.jpg"));
    jpeg.resize(200);
    try {
        decode_image(jpeg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UndecodableImage);
    }
}
