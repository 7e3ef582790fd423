#include "retscreen/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "retscreen/rng.hpp"

namespace retscreen {

namespace {

constexpr double kBase[3] = {170.0, 85.0, 45.0};
constexpr double kDisc[3] = {245.0, 215.0, 150.0};
constexpr double kLesion[3] = {55.0, 18.0, 12.0};

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

double dist_to_segment(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

void add_dark_blob(RgbImage& image, int cx, int cy, int radius) {
    for (int y = std::max(0, cy - radius); y <= std::min(image.height - 1, cy + radius); ++y) {
        for (int x = std::max(0, cx - radius); x <= std::min(image.width - 1, cx + radius); ++x) {
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius) {
                image.set(x, y, to_byte(kLesion[0]), to_byte(kLesion[1]), to_byte(kLesion[2]));
            }
        }
    }
}

RgbImage make_synthetic_fundus(const SyntheticFundusSpec& spec) {
    Rng rng(splitmix64(spec.seed ^ 0xF0D05ULL));
    const int n = spec.size;
    const double c0 = (n - 1) / 2.0;
    const double radius = 0.45 * n;
    const double side = spec.mirrored ? -1.0 : 1.0;

    // Landmark positions relative to the frame center.
    double disc_x = c0, disc_y = c0, mac_x = c0, mac_y = c0;
    bool has_disc = true;
    switch (spec.field) {
        case SyntheticField::Central:
            disc_x = c0 + side * 0.55 * radius;
            break;
        case SyntheticField::Nasal:
            mac_x = c0 - side * 0.55 * radius;
            break;
        case SyntheticField::NoDisc:
            has_disc = false;
            mac_x = c0 - side * 0.3 * radius;
            break;
    }
    const double disc_r = 0.12 * radius;
    const double mac_r = 0.15 * radius;

    // Vessel polylines radiating from the disc (or from beyond the frame).
    const double vx0 = has_disc ? disc_x : c0 + side * 1.1 * radius;
    const double vy0 = has_disc ? disc_y : c0;
    struct Segment { double ax, ay, bx, by; };
    std::vector<Segment> vessels;
    for (int k = 0; k < 4; ++k) {
        const double angle = (k < 2 ? -1.0 : 1.0) * (0.35 + 0.25 * (k % 2)) * std::numbers::pi;
        double ax = vx0, ay = vy0;
        for (int s = 1; s <= 6; ++s) {
            const double a = angle + 0.12 * s * (k % 2 == 0 ? 1 : -1);
            const double bx = ax - side * std::cos(a) * 0.2 * radius;
            const double by = ay + std::sin(a) * 0.2 * radius;
            vessels.push_back({ax, ay, bx, by});
            ax = bx;
            ay = by;
        }
    }

    RgbImage img(n, n, 0);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double dx = x - c0, dy = y - c0;
            const double d = std::sqrt(dx * dx + dy * dy);
            if (d > radius) continue;
            double factor = 1.0 - 0.35 * (d / radius) * (d / radius);
            const double md = std::hypot(x - mac_x, y - mac_y);
            if (md < mac_r) factor *= 0.7 + 0.3 * (md / mac_r) * (md / mac_r);
            for (const auto& v : vessels) {
                if (dist_to_segment(x, y, v.ax, v.ay, v.bx, v.by) < 1.6) {
                    factor *= 0.8;
                    break;
                }
            }
            double rgb[3];
            for (int c = 0; c < 3; ++c) rgb[c] = kBase[c] * factor;
            if (has_disc && std::hypot(x - disc_x, y - disc_y) < disc_r) {
                for (int c = 0; c < 3; ++c) rgb[c] = kDisc[c];
            }
            for (int c = 0; c < 3; ++c) rgb[c] += rng.uniform(-10.0, 10.0);
            img.set(x, y, to_byte(rgb[0]), to_byte(rgb[1]), to_byte(rgb[2]));
        }
    }

    // Lesions go inside 0.7R and away from the disc.
    const int blob_r = std::max(2, static_cast<int>(std::lround(0.027 * n)));
    int placed = 0;
    int attempts = 0;
    while (placed < spec.lesions && attempts < 10000) {
        ++attempts;
        const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double rr = 0.7 * radius * std::sqrt(rng.uniform());
        const double bx = c0 + rr * std::cos(a);
        const double by = c0 + rr * std::sin(a);
        if (has_disc && std::hypot(bx - disc_x, by - disc_y) < disc_r + blob_r + 2) continue;
        add_dark_blob(img, static_cast<int>(std::lround(bx)), static_cast<int>(std::lround(by)), blob_r);
        ++placed;
    }

    if (spec.contrast != 1.0) {
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                if (std::hypot(x - c0, y - c0) > radius) continue;
                for (int c = 0; c < 3; ++c) {
                    const double v = img.at(x, y, c);
                    img.at(x, y, c) = to_byte(kBase[c] * 0.85 + spec.contrast * (v - kBase[c] * 0.85));
                }
            }
        }
    }
    if (spec.blur_sigma > 0.0) {
        img = gaussian_blur(img, spec.blur_sigma);
    }
    return img;
}

RgbImage gaussian_blur(const RgbImage& image, double sigma) {
    if (sigma <= 0.0 || image.empty()) return image;
    const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * half + 1);
    double sum = 0.0;
    for (int i = -half; i <= half; ++i) {
        kernel[i + half] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        sum += kernel[i + half];
    }
    for (auto& k : kernel) k /= sum;

    const int w = image.width, h = image.height;
    std::vector<double> tmp(image.data.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -half; i <= half; ++i) {
                    const int xx = std::clamp(x + i, 0, w - 1);
                    acc += kernel[i + half] * image.at(xx, y, c);
                }
                tmp[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc;
            }
        }
    }
    RgbImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -half; i <= half; ++i) {
                    const int yy = std::clamp(y + i, 0, h - 1);
                    acc += kernel[i + half] * tmp[(static_cast<std::size_t>(yy) * w + x) * 3 + c];
                }
                out.at(x, y, c) = to_byte(acc);
            }
        }
    }
    return out;
}

}  // namespace retscreen
