#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "i2vwm/core/image.hpp"

namespace i2vwm {

inline std::uint8_t float_to_u8(float v) {
    return std::uint8_t(std::lround(clampf(v, 0.0f, 1.0f) * 255.0f));
}

inline std::vector<std::uint8_t> image_to_u8(const Image& img) {
    std::vector<std::uint8_t> out(img.px.size());
    for (std::size_t i = 0; i < img.px.size(); ++i) out[i] = float_to_u8(img.px[i]);
    return out;
}

inline Image u8_to_image(const std::uint8_t* data, int h, int w, int c) {
    Image img(h, w, c);
    const std::size_t n = img.px.size();
    for (std::size_t i = 0; i < n; ++i) img.px[i] = float(data[i]) / 255.0f;
    return img;
}

// ---- PNG -------------------------------------------------------------

inline Image read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw std::runtime_error("read_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("read_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("read_png: failed to decode " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    std::vector<std::uint8_t> buf(std::size_t(h) * w * 3);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + std::size_t(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return u8_to_image(buf.data(), int(h), int(w), 3);
}

inline void write_png(const std::string& path, const Image& img) {
    Image rgb = img;
    if (rgb.c == 1) {
        Image t(rgb.h, rgb.w, 3);
        for (int y = 0; y < rgb.h; ++y)
            for (int x = 0; x < rgb.w; ++x)
                for (int ch = 0; ch < 3; ++ch) t.at(y, x, ch) = rgb.at(y, x, 0);
        rgb = std::move(t);
    }
    const auto buf = image_to_u8(rgb);
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("write_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("write_png: failed to encode " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, png_uint_32(rgb.w), png_uint_32(rgb.h), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(rgb.h);
    for (int y = 0; y < rgb.h; ++y)
        rows[y] = const_cast<png_bytep>(buf.data() + std::size_t(y) * rgb.w * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

// ---- JPEG ------------------------------------------------------------

namespace detail {
struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::string* message;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    char buf[JMSG_LENGTH_MAX];
    (*cinfo->err->format_message)(cinfo, buf);
    if (err->message) *err->message = buf;
    throw std::runtime_error(std::string("jpeg: ") + buf);
}
} // namespace detail

// Baseline JPEG encode with libjpeg defaults (4:2:0 chroma for q < high).
inline std::vector<std::uint8_t> encode_jpeg(const Image& img, int quality) {
    if (quality < 1 || quality > 100) throw std::invalid_argument("encode_jpeg: quality out of range");
    const auto rgb = image_to_u8(img.c == 3 ? img : [&] {
        Image t(img.h, img.w, 3);
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                for (int ch = 0; ch < 3; ++ch) t.at(y, x, ch) = img.at(y, x, 0);
        return t;
    }());

    jpeg_compress_struct cinfo{};
    detail::JpegErrorMgr jerr{};
    std::string errmsg;
    jerr.message = &errmsg;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = detail::jpeg_error_exit;

    unsigned char* mem = nullptr;
    unsigned long mem_size = 0;
    jpeg_create_compress(&cinfo);
    try {
        jpeg_mem_dest(&cinfo, &mem, &mem_size);
        cinfo.image_width = JDIMENSION(img.w);
        cinfo.image_height = JDIMENSION(img.h);
        cinfo.input_components = 3;
        cinfo.in_color_space = JCS_RGB;
        jpeg_set_defaults(&cinfo);
        jpeg_set_quality(&cinfo, quality, TRUE);
        jpeg_start_compress(&cinfo, TRUE);
        std::vector<JSAMPLE> row(std::size_t(img.w) * 3);
        while (cinfo.next_scanline < cinfo.image_height) {
            std::memcpy(row.data(), rgb.data() + std::size_t(cinfo.next_scanline) * img.w * 3,
                        row.size());
            JSAMPROW rp = row.data();
            jpeg_write_scanlines(&cinfo, &rp, 1);
        }
        jpeg_finish_compress(&cinfo);
    } catch (...) {
        jpeg_destroy_compress(&cinfo);
        if (mem) free(mem);
        throw;
    }
    jpeg_destroy_compress(&cinfo);
    std::vector<std::uint8_t> out(mem, mem + mem_size);
    free(mem);
    return out;
}

inline Image decode_jpeg(const std::uint8_t* data, std::size_t size) {
    jpeg_decompress_struct cinfo{};
    detail::JpegErrorMgr jerr{};
    std::string errmsg;
    jerr.message = &errmsg;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = detail::jpeg_error_exit;

    jpeg_create_decompress(&cinfo);
    try {
        jpeg_mem_src(&cinfo, const_cast<unsigned char*>(data), (unsigned long)size);
        jpeg_read_header(&cinfo, TRUE);
        cinfo.out_color_space = JCS_RGB;
        jpeg_start_decompress(&cinfo);
        const int w = int(cinfo.output_width);
        const int h = int(cinfo.output_height);
        std::vector<std::uint8_t> buf(std::size_t(h) * w * 3);
        while (cinfo.output_scanline < cinfo.output_height) {
            JSAMPROW rp = buf.data() + std::size_t(cinfo.output_scanline) * w * 3;
            jpeg_read_scanlines(&cinfo, &rp, 1);
        }
        jpeg_finish_decompress(&cinfo);
        jpeg_destroy_decompress(&cinfo);
        return u8_to_image(buf.data(), h, w, 3);
    } catch (...) {
        jpeg_destroy_decompress(&cinfo);
        throw;
    }
}

inline Image decode_jpeg(const std::vector<std::uint8_t>& data) {
    return decode_jpeg(data.data(), data.size());
}

inline Image read_jpeg(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw std::runtime_error("read_jpeg: cannot open " + path);
    std::fseek(fp, 0, SEEK_END);
    const long sz = std::ftell(fp);
    std::fseek(fp, 0, SEEK_SET);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(sz));
    if (std::fread(buf.data(), 1, buf.size(), fp) != buf.size()) {
        std::fclose(fp);
        throw std::runtime_error("read_jpeg: short read on " + path);
    }
    std::fclose(fp);
    return decode_jpeg(buf);
}

} // namespace i2vwm
