#pragma once

#include <optional>

#include "retscreen/image.hpp"

namespace retscreen::enhancement {

/// Fundus circle and the crop box around it, in source-image pixels.
/// crop_box is half-open: [x0, x1) x [y0, y1).
struct FundusGeometry {
    double cx = 0.0;
    double cy = 0.0;
    double r = 0.0;
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;
    bool fallback = false;  // no usable foreground; geometry covers the frame

    /// Same circle expressed in the coordinates of the cropped image.
    [[nodiscard]] FundusGeometry relative_to_crop() const;
    [[nodiscard]] bool contains(double x, double y, double radius_scale = 1.0) const;
};

struct ClaheParams {
    int tile_rows = 8;
    int tile_cols = 8;
    double clip_limit = 2.0;

    void validate() const;
};

struct StretchParams {
    double lo_pct = 1.0;
    double hi_pct = 99.0;
};

/// Locates the fundus disc without cropping.
FundusGeometry locate_fundus(const RgbImage& image);

struct CropResult {
    RgbImage image;
    FundusGeometry geometry;  // source-image coordinates
};

CropResult crop_fundus(const RgbImage& image);

/// Nearest-rank percentile of `sorted` (ascending), pct in [0, 100].
double nearest_rank(const std::vector<double>& sorted, double pct);

/// Percentile clip + linear remap to [0,255], pooled over the three channels.
/// When `mask` is given, percentiles come from pixels inside that circle only;
/// the mapping is applied to every pixel.
RgbImage stretch_range(const RgbImage& image, StretchParams params = {},
                       const std::optional<FundusGeometry>& mask = std::nullopt);

RgbImage apply_clahe(const RgbImage& image, const ClaheParams& params = {});

/// Single-channel CLAHE on a w*h plane.
std::vector<std::uint8_t> clahe_plane(const std::vector<std::uint8_t>& plane, int width, int height,
                                      const ClaheParams& params);

struct EnhanceParams {
    StretchParams stretch;
    ClaheParams clahe;
};

/// crop_fundus -> stretch_range -> apply_clahe.
RgbImage enhance(const RgbImage& image, const EnhanceParams& params = {});

}  // namespace retscreen::enhancement
