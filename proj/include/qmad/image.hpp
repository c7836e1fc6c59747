#pragma once

// Grayscale image container and PNG/JPEG codec glue (libpng simplified API, libjpeg).
// Colour is reduced to BT.601 luma: Y = 0.299 R + 0.587 G + 0.114 B, scaled to [0, 1].

#include "qmad/error.hpp"

#include <csetjmp>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

namespace qmad {

class GrayImage {
public:
    GrayImage() = default;

    GrayImage(std::size_t width, std::size_t height, double fill = 0.0)
        : width_(width)
        , height_(height)
        , pixels_(width * height, fill)
    {
        if (width == 0 || height == 0) throw Error(ErrorKind::InvalidArgument, "image dimensions must be positive");
        check_value(fill);
    }

    GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels)
        : width_(width)
        , height_(height)
        , pixels_(std::move(pixels))
    {
        if (width == 0 || height == 0) throw Error(ErrorKind::InvalidArgument, "image dimensions must be positive");
        if (pixels_.size() != width * height)
            throw Error(ErrorKind::InvalidArgument, "pixel count does not match width x height");
        for (double v : pixels_) check_value(v);
    }

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::span<const double> pixels() const noexcept { return pixels_; }
    double operator()(std::size_t row, std::size_t col) const noexcept { return pixels_[row * width_ + col]; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    static void check_value(double v)
    {
        if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::InvalidArgument, "pixel values must lie in [0, 1]");
    }

    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> pixels_;
};

inline double bt601_luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept
{
    return (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
}

/// Interleaved 8-bit RGB to luma.
inline GrayImage luma_from_rgb(std::size_t width, std::size_t height, std::span<const std::uint8_t> rgb)
{
    if (rgb.size() != width * height * 3) throw Error(ErrorKind::InvalidArgument, "RGB buffer size mismatch");
    std::vector<double> px(width * height);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = bt601_luma(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
    return GrayImage(width, height, std::move(px));
}

namespace detail {

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline bool is_png(std::span<const std::uint8_t> b)
{
    return b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0;
}

inline bool is_jpeg(std::span<const std::uint8_t> b)
{
    return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

inline GrayImage decode_png(std::span<const std::uint8_t> bytes, const std::string& name)
{
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw Error(ErrorKind::DecodeError, name + ": " + img.message);
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(img));
    const png_color black{0, 0, 0};
    if (!png_image_finish_read(&img, &black, rgb.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw Error(ErrorKind::DecodeError, name + ": " + msg);
    }
    return luma_from_rgb(img.width, img.height, rgb);
}

struct JpegErrorManager {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo)
{
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

inline GrayImage decode_jpeg(std::span<const std::uint8_t> bytes, const std::string& name)
{
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    std::vector<std::uint8_t> rgb;
    std::size_t width = 0;
    std::size_t height = 0;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error(ErrorKind::DecodeError, name + ": " + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    width = cinfo.output_width;
    height = cinfo.output_height;
    rgb.resize(width * height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    const bool corrupt = err.pub.num_warnings > 0;
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    if (corrupt) throw Error(ErrorKind::DecodeError, name + ": corrupt JPEG data");
    return luma_from_rgb(width, height, rgb);
}

} // namespace detail

/// Decodes an 8-bit PNG or JPEG (sniffed by signature, not extension) to luma.
inline GrayImage decode_image(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>")
{
    if (detail::is_png(bytes)) return detail::decode_png(bytes, name);
    if (detail::is_jpeg(bytes)) return detail::decode_jpeg(bytes, name);
    throw Error(ErrorKind::UnsupportedFormat, name + ": not a PNG or JPEG file");
}

inline GrayImage load_image(const std::filesystem::path& path)
{
    return decode_image(detail::read_bytes(path), path.string());
}

/// Quantizes to 8-bit and writes a grayscale PNG.
inline void write_png(const std::filesystem::path& path, const GrayImage& image)
{
    std::vector<std::uint8_t> bytes(image.pixels().size());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        bytes[i] = static_cast<std::uint8_t>(std::lround(image.pixels()[i] * 255.0));
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());
    img.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr))
        throw Error(ErrorKind::Io, path.string() + ": " + img.message);
}

/// Writes interleaved 8-bit RGB as PNG.
inline void write_png_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height,
                          std::span<const std::uint8_t> rgb)
{
    if (rgb.size() != width * height * 3) throw Error(ErrorKind::InvalidArgument, "RGB buffer size mismatch");
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(width);
    img.height = static_cast<png_uint_32>(height);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, rgb.data(), 0, nullptr))
        throw Error(ErrorKind::Io, path.string() + ": " + img.message);
}

/// Grayscale baseline JPEG at the given quality (1-100); used to produce degraded fixtures.
inline void write_jpeg(const std::filesystem::path& path, const GrayImage& image, int quality)
{
    std::vector<std::uint8_t> bytes(image.pixels().size());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        bytes[i] = static_cast<std::uint8_t>(std::lround(image.pixels()[i] * 255.0));

    std::FILE* file = std::fopen(path.c_str(), "wb");
    if (!file) throw Error(ErrorKind::Io, "cannot write " + path.string());
    jpeg_compress_struct cinfo{};
    detail::JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = detail::jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::fclose(file);
        throw Error(ErrorKind::Io, path.string() + ": " + err.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, file);
    cinfo.image_width = static_cast<JDIMENSION>(image.width());
    cinfo.image_height = static_cast<JDIMENSION>(image.height());
    cinfo.input_components = 1;
    cinfo.in_color_space = JCS_GRAYSCALE;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = bytes.data() + static_cast<std::size_t>(cinfo.next_scanline) * image.width();
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::fclose(file);
}

} // namespace qmad
