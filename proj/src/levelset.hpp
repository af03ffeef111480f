#pragma once

#include "image.hpp"

#include <vector>

namespace segedit {

// Signed scalar field, positive inside the segment. The segment boundary
// is the zero crossing.
struct LevelSetField {
    int width = 0;
    int height = 0;
    std::vector<double> phi;

    double at(int x, int y) const { return phi[static_cast<std::size_t>(y) * width + x]; }
    BinaryMask positive() const;
};

// Per-pixel speed in [0, 1].
struct StoppingFunction {
    int width = 0;
    int height = 0;
    std::vector<double> f;

    double at(int x, int y) const { return f[static_cast<std::size_t>(y) * width + x]; }
    double max() const;
};

// Two-pass chamfer distance (weights 1 and sqrt 2) measured to the pixel
// edges of the boundary: inside pixels get d(p, outside) - 1/2, outside
// pixels -(d(p, inside) - 1/2), so the zero crossing sits halfway between
// the last inside and the first outside pixel.
LevelSetField signed_distance_from_mask(const BinaryMask& mask);

// |original - rendered| averaged over channels, box-blurred with the given
// radius (zero padding), then divided by its maximum.
StoppingFunction stopping_function(const ImageBuffer& original, const ImageBuffer& rendered, int smooth_radius);

// Largest dt for which dt * max(f) <= 0.5.
double max_stable_dt(const StoppingFunction& f);

// phi <- phi + dt * f * |grad phi| with the Godunov upwind gradient for an
// expanding front, re-initialised to a chamfer signed distance every
// `reinit_interval` iterations (0 disables). Throws CflViolation when
// dt * max(f) > 0.5.
LevelSetField evolve(const LevelSetField& phi, const StoppingFunction& f, double dt, int iterations,
                     int reinit_interval = 20);

// Chamfer re-initialisation that keeps sign(phi) for every non-zero value.
LevelSetField reinitialize(const LevelSetField& phi);

struct RefineParams {
    double dt = 0.5;
    int iterations = 40;
    int smooth_radius = 1;
    int max_growth = 8;
    int reinit_interval = 20;
};

struct RefineResult {
    LabelMap labels;
    StoppingFunction speed;
    BinaryMask before;
    BinaryMask after;
};

// Grows segment k where its rendering disagrees with the original. Gained
// pixels are taken from their previous owner (label 0 included) and stay
// within max_growth of the original segment. Throws SegmentConsumed if any
// other segment would vanish.
RefineResult refine_segment(const LabelMap& labels, int k, const ImageBuffer& original, const ImageBuffer& rendered_k,
                            const RefineParams& params);

} // namespace segedit
