#include "retscreen/image.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "retscreen/error.hpp"

namespace retscreen {

std::vector<double> luminance_plane(const RgbImage& img) {
    std::vector<double> out(img.pixel_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto* p = &img.data[i * 3];
        out[i] = luminance(p[0], p[1], p[2]);
    }
    return out;
}

double rms_contrast(const RgbImage& img) {
    if (img.empty()) {
        return 0.0;
    }
    const auto lum = luminance_plane(img);
    double mean = 0.0;
    for (double v : lum) mean += v;
    mean /= static_cast<double>(lum.size());
    double var = 0.0;
    for (double v : lum) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(lum.size()));
}

RgbImage crop(const RgbImage& img, int x0, int y0, int x1, int y1) {
    require(0 <= x0 && x0 < x1 && x1 <= img.width && 0 <= y0 && y0 < y1 && y1 <= img.height,
            "crop box outside image");
    RgbImage out(x1 - x0, y1 - y0);
    for (int y = y0; y < y1; ++y) {
        const auto* src = &img.data[(static_cast<std::size_t>(y) * img.width + x0) * 3];
        auto* dst = &out.data[static_cast<std::size_t>(y - y0) * out.width * 3];
        std::copy(src, src + static_cast<std::size_t>(out.width) * 3, dst);
    }
    return out;
}

namespace {

RgbImage from_bgr_mat(const cv::Mat& mat) {
    RgbImage out(mat.cols, mat.rows);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < mat.cols; ++x) {
            out.set(x, y, row[x][2], row[x][1], row[x][0]);
        }
    }
    return out;
}

cv::Mat to_bgr_mat(const RgbImage& img) {
    cv::Mat mat(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.width; ++x) {
            row[x] = cv::Vec3b(img.at(x, y, 2), img.at(x, y, 1), img.at(x, y, 0));
        }
    }
    return mat;
}

}  // namespace

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) {
        fail(ErrorKind::Parse, "empty image buffer");
    }
    const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1,
                         const_cast<std::uint8_t*>(bytes.data()));
    const cv::Mat mat = cv::imdecode(buffer, cv::IMREAD_COLOR);
    if (mat.empty()) {
        fail(ErrorKind::Parse, "image bytes are not a decodable PNG/JPEG");
    }
    return from_bgr_mat(mat);
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
    require(!img.empty(), "cannot encode an empty image");
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", to_bgr_mat(img), out)) {
        fail(ErrorKind::Io, "PNG encoding failed");
    }
    return out;
}

RgbImage read_image(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_image(bytes);
    } catch (const Error& e) {
        fail(e.kind(), path.string() + ": " + e.what());
    }
}

void write_png(const RgbImage& img, const std::filesystem::path& path) {
    write_file_bytes(path, encode_png(img));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::Io, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorKind::Io, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail(ErrorKind::Io, "short write to " + path.string());
    }
}

}  // namespace retscreen
