#pragma once

#include <cstdint>

#include "retscreen/image.hpp"

namespace retscreen {

// Procedural fundus photographs used as fixtures and for synthetic cohorts.
// Not a realistic renderer: the frame is a reddish disc with vignetting,
// vessels, an optic disc, a darker macula and optional dark-red lesions.

enum class SyntheticField { Central, Nasal, NoDisc };

struct SyntheticFundusSpec {
    int size = 256;
    SyntheticField field = SyntheticField::Central;
    int lesions = 0;
    double contrast = 1.0;  // scales deviations from the base fundus colour
    double blur_sigma = 0.0;
    bool mirrored = false;  // optic disc on the left (left eye)
    std::uint64_t seed = 0;
};

RgbImage make_synthetic_fundus(const SyntheticFundusSpec& spec);

/// Paints a dark-red filled circle (lesion proxy).
void add_dark_blob(RgbImage& image, int cx, int cy, int radius);

/// Separable Gaussian blur with edge clamping; sigma <= 0 returns a copy.
RgbImage gaussian_blur(const RgbImage& image, double sigma);

}  // namespace retscreen
