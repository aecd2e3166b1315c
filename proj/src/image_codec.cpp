#include "dreamloom/image_codec.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>

#include <jpeglib.h>
#include <png.h>

#include "dreamloom/error.hpp"

namespace dreamloom {

ImageFormat sniff_format(std::string_view bytes) noexcept {
    static constexpr unsigned char png_sig[] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= sizeof(png_sig) && std::memcmp(bytes.data(), png_sig, sizeof(png_sig)) == 0) {
        return ImageFormat::Png;
    }
    if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
        static_cast<unsigned char>(bytes[1]) == 0xD8 && static_cast<unsigned char>(bytes[2]) == 0xFF) {
        return ImageFormat::Jpeg;
    }
    return ImageFormat::Unknown;
}

std::string_view mime_type(ImageFormat format) noexcept {
    switch (format) {
    case ImageFormat::Png: return "image/png";
    case ImageFormat::Jpeg: return "image/jpeg";
    case ImageFormat::Unknown: break;
    }
    return "application/octet-stream";
}

namespace {

RgbImage decode_png(std::string_view bytes) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()) == 0) {
        throw Error(ErrorCode::UndecodableImage, std::string("png: ") + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    if (img.width == 0 || img.height == 0) {
        png_image_free(&img);
        throw Error(ErrorCode::EmptyImage, "png has no pixels");
    }
    RgbImage out(static_cast<int>(img.width), static_cast<int>(img.height));
    png_color white{255, 255, 255};
    if (png_image_finish_read(&img, &white, out.pixels.data(), 0, nullptr) == 0) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw Error(ErrorCode::UndecodableImage, "png: " + msg);
    }
    return out;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

RgbImage decode_jpeg(std::string_view bytes) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.message[0] = '\0';

    // Nothing with a non-trivial destructor may be live across setjmp.
    RgbImage* volatile out = nullptr;
    if (setjmp(err.jump) != 0) {
        jpeg_destroy_decompress(&cinfo);
        delete out;
        throw Error(ErrorCode::UndecodableImage, std::string("jpeg: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()),
                 static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out = new RgbImage(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
    const std::size_t stride = static_cast<std::size_t>(out->width) * 3;
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out->pixels.data() + stride * cinfo.output_scanline;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    RgbImage result = std::move(*out);
    delete out;
    if (result.pixel_count() == 0) {
        throw Error(ErrorCode::EmptyImage, "jpeg has no pixels");
    }
    return result;
}

}  // namespace

RgbImage decode_image(std::string_view bytes) {
    if (bytes.empty()) {
        throw Error(ErrorCode::UndecodableImage, "empty byte stream");
    }
    switch (sniff_format(bytes)) {
    case ImageFormat::Png: return decode_png(bytes);
    case ImageFormat::Jpeg: return decode_jpeg(bytes);
    case ImageFormat::Unknown: break;
    }
    throw Error(ErrorCode::UndecodableImage, "unrecognized image format");
}

std::string encode_png(const RgbImage& image) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr) == 0) {
        throw Error(ErrorCode::Internal, std::string("png encode: ") + img.message);
    }
    std::string out(size, '\0');
    if (png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr) == 0) {
        throw Error(ErrorCode::Internal, std::string("png encode: ") + img.message);
    }
    out.resize(size);
    return out;
}

}  // namespace dreamloom
