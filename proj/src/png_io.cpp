#include "mosaic/png_io.hpp"

#include <png.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace mosaic {

namespace {

struct WriteBuffer {
    std::vector<std::uint8_t> bytes;
};

void on_write(png_structp png, png_bytep data, png_size_t length) {
    auto* buf = static_cast<WriteBuffer*>(png_get_io_ptr(png));
    buf->bytes.insert(buf->bytes.end(), data, data + length);
}

void on_flush(png_structp) {}

struct ReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t offset{0};
};

void on_read(png_structp png, png_bytep out, png_size_t length) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->offset + length > cur->bytes.size()) {
        png_error(png, "truncated PNG stream");
    }
    std::memcpy(out, cur->bytes.data() + cur->offset, length);
    cur->offset += length;
}

[[noreturn]] void on_error(png_structp, png_const_charp msg) { throw PngError(msg); }

void on_warning(png_structp, png_const_charp) {}

}  // namespace

std::vector<std::uint8_t> encode_png_rows(std::size_t side, const RowSource& row_at) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
    if (png == nullptr) {
        throw PngError("png_create_write_struct failed");
    }
    png_infop info = png_create_info_struct(png);
    WriteBuffer buf;
    try {
        if (info == nullptr) {
            throw PngError("png_create_info_struct failed");
        }
        png_set_write_fn(png, &buf, on_write, on_flush);
        const auto width = static_cast<png_uint_32>(side);
        png_set_IHDR(png, info, width, width, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_set_compression_level(png, 3);
        png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_UP);
        png_write_info(png, info);
        for (std::size_t row = 0; row < side; ++row) {
            // libpng takes a non-const row pointer but does not modify it.
            png_write_row(png, const_cast<png_bytep>(row_at(row)));
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return std::move(buf.bytes);
}

std::vector<std::uint8_t> encode_png(const Pattern& image) {
    const std::size_t stride = image.side() * kChannels;
    const std::uint8_t* data = image.channels().data();
    return encode_png_rows(image.side(), [&](std::size_t row) { return data + row * stride; });
}

std::vector<std::uint8_t> encode_png(const Texture& texture) { return encode_png(texture.grid()); }

Pattern decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw PngError("not a PNG stream");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
    if (png == nullptr) {
        throw PngError("png_create_read_struct failed");
    }
    png_infop info = png_create_info_struct(png);
    ReadCursor cur{bytes, 0};
    std::vector<std::uint8_t> channels;
    int exponent = 0;
    try {
        if (info == nullptr) {
            throw PngError("png_create_info_struct failed");
        }
        png_set_read_fn(png, &cur, on_read);
        png_read_info(png, info);
        const png_uint_32 width = png_get_image_width(png, info);
        const png_uint_32 height = png_get_image_height(png, info);
        if (width != height || !std::has_single_bit(width) || width > kTextureSide) {
            throw PngError("PNG must be square with a power-of-two side <= 2048, got " +
                           std::to_string(width) + "x" + std::to_string(height));
        }
        exponent = std::countr_zero(width);

        const int color = png_get_color_type(png, info);
        if (png_get_bit_depth(png, info) == 16) {
            png_set_strip_16(png);
        }
        if (color == PNG_COLOR_TYPE_PALETTE) {
            png_set_palette_to_rgb(png);
        }
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
            png_set_gray_to_rgb(png);
        }
        if (png_get_bit_depth(png, info) < 8) {
            png_set_packing(png);
            if (color == PNG_COLOR_TYPE_GRAY) {
                png_set_expand_gray_1_2_4_to_8(png);
            }
        }
        if ((color & PNG_COLOR_MASK_ALPHA) != 0) {
            png_set_strip_alpha(png);
        }
        if (png_get_valid(png, info, PNG_INFO_tRNS) != 0) {
            // tRNS would expand to an alpha channel; colors are kept as-is.
            png_set_tRNS_to_alpha(png);
            png_set_strip_alpha(png);
        }
        png_set_interlace_handling(png);
        png_read_update_info(png, info);
        if (png_get_rowbytes(png, info) != width * kChannels) {
            throw PngError("unsupported PNG pixel layout");
        }
        channels.resize(static_cast<std::size_t>(width) * width * kChannels);
        std::vector<png_bytep> rows(width);
        for (png_uint_32 r = 0; r < width; ++r) {
            rows[r] = channels.data() + static_cast<std::size_t>(r) * width * kChannels;
        }
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return Pattern(exponent, std::move(channels));
}

void write_png(const std::filesystem::path& path, const Pattern& image) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw PngError("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw PngError("write failed for " + path.string());
    }
}

void write_png(const std::filesystem::path& path, const Texture& texture) {
    write_png(path, texture.grid());
}

Pattern read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw PngError("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

}  // namespace mosaic
