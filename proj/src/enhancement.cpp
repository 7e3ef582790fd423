#include "retscreen/enhancement.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>

#include "retscreen/error.hpp"

namespace retscreen::enhancement {

FundusGeometry FundusGeometry::relative_to_crop() const {
    FundusGeometry g = *this;
    g.cx -= x0;
    g.cy -= y0;
    g.x1 = x1 - x0;
    g.y1 = y1 - y0;
    g.x0 = 0;
    g.y0 = 0;
    return g;
}

bool FundusGeometry::contains(double x, double y, double radius_scale) const {
    const double dx = x - cx;
    const double dy = y - cy;
    const double rr = r * radius_scale;
    return dx * dx + dy * dy <= rr * rr;
}

void ClaheParams::validate() const {
    require(tile_rows >= 1 && tile_cols >= 1, "CLAHE tile grid must be at least 1x1");
    require(clip_limit >= 1.0, "CLAHE clip limit must be >= 1.0");
}

namespace {

FundusGeometry full_frame(const RgbImage& image) {
    FundusGeometry g;
    g.cx = (image.width - 1) / 2.0;
    g.cy = (image.height - 1) / 2.0;
    g.r = std::min(image.width, image.height) / 2.0;
    g.x0 = 0;
    g.y0 = 0;
    g.x1 = image.width;
    g.y1 = image.height;
    g.fallback = true;
    return g;
}

// Center along one axis. When the component is shorter than the square side it
// was cut by a frame edge; anchor on the edge that was not cut.
double axis_center(int lo, int hi, int extent, double radius, bool short_axis) {
    if (short_axis) {
        if (lo == 0 && hi < extent) return (hi - 0.5) - radius;
        if (hi == extent && lo > 0) return (lo - 0.5) + radius;
    }
    return (lo + hi - 1) / 2.0;
}

}  // namespace

FundusGeometry locate_fundus(const RgbImage& image) {
    if (image.empty()) {
        return {};
    }
    const int w = image.width;
    const int h = image.height;
    const auto lum = luminance_plane(image);
    const double max_lum = *std::max_element(lum.begin(), lum.end());
    const double threshold = std::max(5.0, 0.02 * max_lum);

    std::vector<std::uint8_t> fg(lum.size());
    std::size_t fg_count = 0;
    for (std::size_t i = 0; i < lum.size(); ++i) {
        fg[i] = lum[i] > threshold ? 1 : 0;
        fg_count += fg[i];
    }
    if (fg_count * 100 < lum.size()) {
        return full_frame(image);
    }

    // Largest 8-connected component; first in row-major order wins ties.
    std::vector<int> label(lum.size(), -1);
    std::size_t best_size = 0;
    int bx0 = 0, by0 = 0, bx1 = 0, by1 = 0;
    std::deque<int> queue;
    int next_label = 0;
    for (int start = 0; start < w * h; ++start) {
        if (!fg[start] || label[start] >= 0) continue;
        const int id = next_label++;
        label[start] = id;
        queue.push_back(start);
        std::size_t size = 0;
        int x0 = w, y0 = h, x1 = -1, y1 = -1;
        while (!queue.empty()) {
            const int idx = queue.front();
            queue.pop_front();
            ++size;
            const int x = idx % w;
            const int y = idx / w;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx;
                    const int ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const int n = ny * w + nx;
                    if (fg[n] && label[n] < 0) {
                        label[n] = id;
                        queue.push_back(n);
                    }
                }
            }
        }
        if (size > best_size) {
            best_size = size;
            bx0 = x0;
            by0 = y0;
            bx1 = x1 + 1;
            by1 = y1 + 1;
        }
    }

    const int side = std::max(bx1 - bx0, by1 - by0);
    FundusGeometry g;
    g.r = side / 2.0;
    g.cx = axis_center(bx0, bx1, w, g.r, bx1 - bx0 < side);
    g.cy = axis_center(by0, by1, h, g.r, by1 - by0 < side);
    g.x0 = std::max(0, static_cast<int>(std::ceil(g.cx - g.r - 1e-9)));
    g.y0 = std::max(0, static_cast<int>(std::ceil(g.cy - g.r - 1e-9)));
    g.x1 = std::min(w, static_cast<int>(std::floor(g.cx + g.r + 1e-9)) + 1);
    g.y1 = std::min(h, static_cast<int>(std::floor(g.cy + g.r + 1e-9)) + 1);
    g.x1 = std::max(g.x1, g.x0 + 1);
    g.y1 = std::max(g.y1, g.y0 + 1);
    return g;
}

CropResult crop_fundus(const RgbImage& image) {
    const FundusGeometry g = locate_fundus(image);
    if (image.empty()) {
        return {image, g};
    }
    return {crop(image, g.x0, g.y0, g.x1, g.y1), g};
}

double nearest_rank(const std::vector<double>& sorted, double pct) {
    require(!sorted.empty(), "percentile of an empty sample");
    const double n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(pct * n / 100.0 - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

namespace {

// Nearest-rank percentile straight from a 256-bin histogram.
int histogram_rank(const std::array<std::uint64_t, 256>& hist, std::uint64_t total, double pct) {
    auto rank = static_cast<std::uint64_t>(std::ceil(pct * static_cast<double>(total) / 100.0 - 1e-9));
    rank = std::clamp<std::uint64_t>(rank, 1, total);
    std::uint64_t cumulative = 0;
    for (int v = 0; v < 256; ++v) {
        cumulative += hist[v];
        if (cumulative >= rank) return v;
    }
    return 255;
}

}  // namespace

RgbImage stretch_range(const RgbImage& image, StretchParams params, const std::optional<FundusGeometry>& mask) {
    require(params.lo_pct >= 0.0 && params.hi_pct <= 100.0 && params.lo_pct < params.hi_pct,
            "stretch percentiles must satisfy 0 <= lo < hi <= 100");
    std::array<std::uint64_t, 256> hist{};
    std::uint64_t total = 0;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (mask && !mask->contains(x, y)) continue;
            for (int c = 0; c < 3; ++c) {
                ++hist[image.at(x, y, c)];
            }
            total += 3;
        }
    }
    if (total == 0) {
        return image;
    }
    const int lo = histogram_rank(hist, total, params.lo_pct);
    const int hi = histogram_rank(hist, total, params.hi_pct);
    if (lo >= hi) {
        return image;
    }
    std::array<std::uint8_t, 256> lut{};
    for (int v = 0; v < 256; ++v) {
        const double clipped = std::clamp(v, lo, hi);
        lut[v] = static_cast<std::uint8_t>(std::lround((clipped - lo) * 255.0 / (hi - lo)));
    }
    RgbImage out = image;
    for (auto& v : out.data) {
        v = lut[v];
    }
    return out;
}

std::vector<std::uint8_t> clahe_plane(const std::vector<std::uint8_t>& plane, int width, int height,
                                      const ClaheParams& params) {
    params.validate();
    if (width == 0 || height == 0) return plane;
    const int rows = std::min(params.tile_rows, height);
    const int cols = std::min(params.tile_cols, width);

    std::vector<int> ty(rows + 1), tx(cols + 1);
    for (int i = 0; i <= rows; ++i) ty[i] = i * height / rows;
    for (int j = 0; j <= cols; ++j) tx[j] = j * width / cols;

    // Per-tile equalization mappings.
    std::vector<std::array<std::uint8_t, 256>> luts(static_cast<std::size_t>(rows) * cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            std::array<int, 256> hist{};
            for (int y = ty[i]; y < ty[i + 1]; ++y) {
                for (int x = tx[j]; x < tx[j + 1]; ++x) {
                    ++hist[plane[static_cast<std::size_t>(y) * width + x]];
                }
            }
            const int area = (ty[i + 1] - ty[i]) * (tx[j + 1] - tx[j]);
            const int clip = std::max(1, static_cast<int>(params.clip_limit * area / 256.0));
            int excess = 0;
            for (auto& h : hist) {
                if (h > clip) {
                    excess += h - clip;
                    h = clip;
                }
            }
            const int batch = excess / 256;
            int residual = excess - batch * 256;
            for (auto& h : hist) h += batch;
            if (residual > 0) {
                const int step = std::max(256 / residual, 1);
                for (int k = 0; k < 256 && residual > 0; k += step, --residual) {
                    ++hist[k];
                }
            }
            auto& lut = luts[static_cast<std::size_t>(i) * cols + j];
            const double scale = 255.0 / area;
            int cumulative = 0;
            for (int v = 0; v < 256; ++v) {
                cumulative += hist[v];
                lut[v] = static_cast<std::uint8_t>(std::clamp(std::lround(cumulative * scale), 0L, 255L));
            }
        }
    }

    std::vector<double> cy(rows), cx(cols);
    for (int i = 0; i < rows; ++i) cy[i] = (ty[i] + ty[i + 1] - 1) / 2.0;
    for (int j = 0; j < cols; ++j) cx[j] = (tx[j] + tx[j + 1] - 1) / 2.0;

    // Bracketing tile indices and blend weight along one axis.
    auto bracket = [](const std::vector<double>& centers, double p, int& a, int& b, double& t) {
        const int n = static_cast<int>(centers.size());
        if (p <= centers.front()) {
            a = b = 0;
            t = 0.0;
            return;
        }
        if (p >= centers.back()) {
            a = b = n - 1;
            t = 0.0;
            return;
        }
        a = static_cast<int>(std::upper_bound(centers.begin(), centers.end(), p) - centers.begin()) - 1;
        b = a + 1;
        t = (p - centers[a]) / (centers[b] - centers[a]);
    };

    std::vector<std::uint8_t> out(plane.size());
    for (int y = 0; y < height; ++y) {
        int i0, i1;
        double wy;
        bracket(cy, y, i0, i1, wy);
        for (int x = 0; x < width; ++x) {
            int j0, j1;
            double wx;
            bracket(cx, x, j0, j1, wx);
            const std::uint8_t v = plane[static_cast<std::size_t>(y) * width + x];
            const double top = (1 - wx) * luts[static_cast<std::size_t>(i0) * cols + j0][v] +
                               wx * luts[static_cast<std::size_t>(i0) * cols + j1][v];
            const double bottom = (1 - wx) * luts[static_cast<std::size_t>(i1) * cols + j0][v] +
                                  wx * luts[static_cast<std::size_t>(i1) * cols + j1][v];
            const double value = (1 - wy) * top + wy * bottom;
            out[static_cast<std::size_t>(y) * width + x] =
                static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
        }
    }
    return out;
}

RgbImage apply_clahe(const RgbImage& image, const ClaheParams& params) {
    params.validate();
    RgbImage out = image;
    std::vector<std::uint8_t> plane(image.pixel_count());
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = image.data[i * 3 + c];
        const auto mapped = clahe_plane(plane, image.width, image.height, params);
        for (std::size_t i = 0; i < plane.size(); ++i) out.data[i * 3 + c] = mapped[i];
    }
    return out;
}

RgbImage enhance(const RgbImage& image, const EnhanceParams& params) {
    const auto cropped = crop_fundus(image);
    std::optional<FundusGeometry> mask;
    if (!cropped.geometry.fallback) mask = cropped.geometry.relative_to_crop();
    const auto stretched = stretch_range(cropped.image, params.stretch, mask);
    return apply_clahe(stretched, params.clahe);
}

}  // namespace retscreen::enhancement
