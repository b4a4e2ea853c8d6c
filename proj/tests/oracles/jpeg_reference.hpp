#pragma once

// Reference JPEG roundtrip written against libjpeg directly with stdio
// source/destination managers, independent of the library's in-memory
// wrapper. Used to pin the evaluation-path jpeg distortion bit-for-bit.

#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <jpeglib.h>

#include "i2vwm/core/image.hpp"
#include "i2vwm/core/imageio.hpp"

namespace i2vwm::testing {

inline Image jpeg_roundtrip_reference(const Image& img, int quality) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "i2vwm_jpeg_ref";
    fs::create_directories(dir);
    const std::string path = (dir / ("ref_q" + std::to_string(quality) + ".jpg")).string();

    const auto rgb = image_to_u8(img);
    {
        FILE* fp = std::fopen(path.c_str(), "wb");
        if (!fp) throw std::runtime_error("jpeg_roundtrip_reference: cannot open " + path);
        jpeg_compress_struct cinfo{};
        jpeg_error_mgr jerr{};
        cinfo.err = jpeg_std_error(&jerr);
        jpeg_create_compress(&cinfo);
        jpeg_stdio_dest(&cinfo, fp);
        cinfo.image_width = JDIMENSION(img.w);
        cinfo.image_height = JDIMENSION(img.h);
        cinfo.input_components = 3;
        cinfo.in_color_space = JCS_RGB;
        jpeg_set_defaults(&cinfo);
        jpeg_set_quality(&cinfo, quality, TRUE);
        jpeg_start_compress(&cinfo, TRUE);
        std::vector<JSAMPLE> row(std::size_t(img.w) * 3);
        while (cinfo.next_scanline < cinfo.image_height) {
            for (std::size_t i = 0; i < row.size(); ++i)
                row[i] = rgb[std::size_t(cinfo.next_scanline) * img.w * 3 + i];
            JSAMPROW rp = row.data();
            jpeg_write_scanlines(&cinfo, &rp, 1);
        }
        jpeg_finish_compress(&cinfo);
        jpeg_destroy_compress(&cinfo);
        std::fclose(fp);
    }

    Image out;
    {
        FILE* fp = std::fopen(path.c_str(), "rb");
        if (!fp) throw std::runtime_error("jpeg_roundtrip_reference: cannot reopen " + path);
        jpeg_decompress_struct dinfo{};
        jpeg_error_mgr jerr{};
        dinfo.err = jpeg_std_error(&jerr);
        jpeg_create_decompress(&dinfo);
        jpeg_stdio_src(&dinfo, fp);
        jpeg_read_header(&dinfo, TRUE);
        dinfo.out_color_space = JCS_RGB;
        jpeg_start_decompress(&dinfo);
        std::vector<std::uint8_t> buf(std::size_t(dinfo.output_height) * dinfo.output_width * 3);
        while (dinfo.output_scanline < dinfo.output_height) {
            JSAMPROW rp = buf.data() + std::size_t(dinfo.output_scanline) * dinfo.output_width * 3;
            jpeg_read_scanlines(&dinfo, &rp, 1);
        }
        jpeg_finish_decompress(&dinfo);
        out = u8_to_image(buf.data(), int(dinfo.output_height), int(dinfo.output_width), 3);
        jpeg_destroy_decompress(&dinfo);
        std::fclose(fp);
    }
    fs::remove_all(dir);
    return out;
}

} // namespace i2vwm::testing
