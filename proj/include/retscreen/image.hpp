#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace retscreen {

/// 8-bit RGB raster, interleaved, row-major. Holds any size; the >= 64x64
/// screening requirement is enforced on FundusImage, not here.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

    [[nodiscard]] std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    [[nodiscard]] bool empty() const { return width == 0 || height == 0; }

    std::uint8_t& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    [[nodiscard]] std::uint8_t at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        auto* p = &data[(static_cast<std::size_t>(y) * width + x) * 3];
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }

    bool operator==(const RgbImage&) const = default;
};

/// Rec. 601 luma in [0, 255].
inline double luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

inline double luminance(const RgbImage& img, int x, int y) {
    return luminance(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
}

std::vector<double> luminance_plane(const RgbImage& img);

/// Standard deviation of luminance over the whole frame ("RMS contrast").
double rms_contrast(const RgbImage& img);

RgbImage crop(const RgbImage& img, int x0, int y0, int x1, int y1);

// Codec helpers (PNG/JPEG). Throw Error{Io} / Error{Parse}.
RgbImage decode_image(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const RgbImage& img);
RgbImage read_image(const std::filesystem::path& path);
void write_png(const RgbImage& img, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace retscreen
