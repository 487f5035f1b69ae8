#pragma once

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "cxrssl/errors.hpp"
#include "cxrssl/tensor.hpp"

namespace cxrssl::io {

/// Basic properties read from a PNG header.
struct PngInfo {
    std::size_t width = 0;
    std::size_t height = 0;
    int bit_depth = 0;
    int color_type = 0;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f != nullptr) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    return f;
}

inline void png_error_handler(png_structp png, png_const_charp message) {
    auto* buffer = static_cast<std::string*>(png_get_error_ptr(png));
    if (buffer != nullptr) {
        *buffer = message;
    }
    png_longjmp(png, 1);
}

inline void png_warning_handler(png_structp, png_const_charp) {}

/// Owns libpng read structures.
class PngReader {
public:
    explicit PngReader(const std::filesystem::path& path) : path_(path), file_(open_file(path, "rb")) {
        unsigned char sig[8] = {};
        if (std::fread(sig, 1, 8, file_.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
            throw DataError("'" + path.string() + "' is not a PNG file");
        }
        png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error_, png_error_handler, png_warning_handler);
        if (png_ == nullptr) {
            throw DataError("libpng initialization failed");
        }
        info_ = png_create_info_struct(png_);
        if (info_ == nullptr) {
            png_destroy_read_struct(&png_, nullptr, nullptr);
            throw DataError("libpng initialization failed");
        }
    }
    PngReader(const PngReader&) = delete;
    PngReader& operator=(const PngReader&) = delete;
    ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }

    PngInfo read_info() {
        if (setjmp(png_jmpbuf(png_))) {
            fail();
        }
        png_init_io(png_, file_.get());
        png_set_sig_bytes(png_, 8);
        png_read_info(png_, info_);
        PngInfo info;
        info.width = png_get_image_width(png_, info_);
        info.height = png_get_image_height(png_, info_);
        info.bit_depth = png_get_bit_depth(png_, info_);
        info.color_type = png_get_color_type(png_, info_);
        return info;
    }

    /// Decodes to 8- or 16-bit samples; returns (channels, samples row-major interleaved).
    std::pair<std::size_t, std::vector<std::uint16_t>> read_samples(const PngInfo& info) {
        if (info.bit_depth != 8 && info.bit_depth != 16) {
            // Palette images are stored with 1-8 bit indices; expand those to RGB.
            if (!(info.color_type == PNG_COLOR_TYPE_PALETTE)) {
                throw DataError("'" + path_.string() + "' has unsupported bit depth " + std::to_string(info.bit_depth) +
                                " (expected 8 or 16)");
            }
        }
        if (setjmp(png_jmpbuf(png_))) {
            fail();
        }
        if (info.color_type == PNG_COLOR_TYPE_PALETTE) {
            png_set_palette_to_rgb(png_);
        }
        if (info.bit_depth == 16) {
            png_set_swap(png_); // native little-endian 16-bit samples
        }
        png_read_update_info(png_, info_);
        const std::size_t channels = png_get_channels(png_, info_);
        const std::size_t depth = png_get_bit_depth(png_, info_);
        const std::size_t rowbytes = png_get_rowbytes(png_, info_);
        std::vector<unsigned char> raw(rowbytes * info.height);
        std::vector<png_bytep> rows(info.height);
        for (std::size_t y = 0; y < info.height; ++y) {
            rows[y] = raw.data() + y * rowbytes;
        }
        // Buffers above must outlive a longjmp out of the decoder.
        if (setjmp(png_jmpbuf(png_))) {
            fail();
        }
        png_read_image(png_, rows.data());
        png_read_end(png_, nullptr);

        std::vector<std::uint16_t> samples(info.width * info.height * channels);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (depth == 16) {
                samples[i] = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
            } else {
                samples[i] = raw[i];
            }
        }
        return {channels, std::move(samples)};
    }

private:
    [[noreturn]] void fail() const {
        throw DataError("corrupt PNG '" + path_.string() + "': " + (error_.empty() ? "decode failed" : error_));
    }

    std::filesystem::path path_;
    FilePtr file_;
    std::string error_;
    png_structp png_ = nullptr;
    png_infop info_ = nullptr;
};

} // namespace detail

/// Reads only the header. Throws DataError on missing or non-PNG files.
inline PngInfo read_png_info(const std::filesystem::path& path) {
    detail::PngReader reader(path);
    return reader.read_info();
}

/// Decodes a PNG to (C, H, W) floats in [0, 1], C = 1 (gray) or 3 (color).
/// Alpha is dropped. Only 8- and 16-bit samples (and palettes) are accepted.
inline Tensor<float> read_png(const std::filesystem::path& path) {
    detail::PngReader reader(path);
    const PngInfo info = reader.read_info();
    auto [channels, samples] = reader.read_samples(info);
    const bool is16 = info.bit_depth == 16;
    const float scale = is16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
    const std::size_t color = channels >= 3 ? 3 : 1;
    const std::size_t plane = info.width * info.height;
    Tensor<float> out({color, info.height, info.width});
    for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t c = 0; c < color; ++c) {
            out[c * plane + p] = static_cast<float>(samples[p * channels + c]) * scale;
        }
    }
    return out;
}

/// Writes interleaved 8-bit samples. `channels` is 1 (gray) or 3 (RGB).
/// The file is written to a temporary name and renamed into place.
inline void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height, std::size_t channels,
                      const std::vector<std::uint8_t>& samples) {
    if (channels != 1 && channels != 3) {
        throw UsageError("write_png supports 1 or 3 channels");
    }
    if (samples.size() != width * height * channels) {
        throw ShapeMismatch("write_png: sample count does not match image size");
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        auto file = detail::open_file(tmp, "wb");
        std::string error;
        png_structp png =
            png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, detail::png_error_handler, detail::png_warning_handler);
        png_infop info = png == nullptr ? nullptr : png_create_info_struct(png);
        if (info == nullptr) {
            png_destroy_write_struct(&png, nullptr);
            throw DataError("libpng initialization failed");
        }
        std::vector<png_const_bytep> rows(height);
        for (std::size_t y = 0; y < height; ++y) {
            rows[y] = samples.data() + y * width * channels;
        }
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw DataError("cannot encode PNG '" + path.string() + "': " + error);
        }
        png_init_io(png, file.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                     channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        png_write_image(png, const_cast<png_bytepp>(rows.data()));
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    }
    std::filesystem::rename(tmp, path);
}

/// Writes a (C, H, W) tensor in [0, 1] as an 8-bit PNG (values clamped, rounded).
inline void write_png(const std::filesystem::path& path, const Tensor<float>& image) {
    if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
        throw ShapeMismatch("write_png expects a (1|3, H, W) image, got " + to_string(image.shape()));
    }
    const std::size_t c = image.dim(0);
    const std::size_t h = image.dim(1);
    const std::size_t w = image.dim(2);
    std::vector<std::uint8_t> samples(c * h * w);
    for (std::size_t p = 0; p < h * w; ++p) {
        for (std::size_t k = 0; k < c; ++k) {
            const float v = std::clamp(image[k * h * w + p], 0.0f, 1.0f);
            samples[p * c + k] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
        }
    }
    write_png(path, w, h, c, samples);
}

} // namespace cxrssl::io
