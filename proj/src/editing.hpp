#pragma once

#include "generator.hpp"
#include "image.hpp"
#include "poisson.hpp"
#include "projection.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace segedit {

struct EditDirection {
    std::string name;
    LatentCode vector;  // carries its space

    LatentSpace space() const { return vector.space; }
};

// Throws when the direction is non-finite, all zero, Z-space or misshapen.
void validate_direction(const ToyGenerator& gen, const EditDirection& d);

// code (promoted to d's space) + alpha * D.
LatentCode apply_direction(const ToyGenerator& gen, const LatentCode& code, const EditDirection& d, double alpha);

// Same direction and alpha applied to every segment's code.
std::vector<SegmentProjection> edit_simultaneous(const ToyGenerator& gen, const std::vector<SegmentProjection>& projections,
                                                 const EditDirection& d, double alpha);

// (b - a) / ||b - a||_2.
EditDirection direction_from_codes(const LatentCode& a, const LatentCode& b, std::string name = "delta");

struct EditStep {
    std::optional<std::vector<int>> segments;  // nullopt means every segment
    EditDirection direction;
    double alpha = 0.0;
    bool reproject = true;
};

using EditScript = std::vector<EditStep>;

struct IncrementalOptions {
    int threads = 1;
    // Snap the composite to the 8-bit grid after every step, so a run is
    // identical to chaining single-step runs through PNG files.
    bool quantize_between_steps = false;
    ProgressFn progress;
};

// Codes keyed by segment id, updated in place with the edited codes.
using CodeCache = std::map<int, SegmentProjection>;

// Per step: (re)project the step's segments against the current image,
// apply the direction, synthesize them, compose with every other pixel
// taken from the current image, stitch the step's segments, and continue
// from the result.
ImageBuffer edit_incremental(const ToyGenerator& gen, const ImageBuffer& image, const LabelMap& labels,
                             const EditScript& script, const ProjectionConfig& proj_cfg, const StitchConfig& stitch_cfg,
                             CodeCache& cache, const IncrementalOptions& options = {});

ImageBuffer edit_incremental(const ToyGenerator& gen, const ImageBuffer& image, const LabelMap& labels,
                             const EditScript& script, const ProjectionConfig& proj_cfg, const StitchConfig& stitch_cfg);

// Synthesizes one piece per projection (fine-tuned weights when present).
std::vector<Piece> render_pieces(const ToyGenerator& gen, const std::vector<SegmentProjection>& projections);

// Render every segment, compose with label 0 copied from the original and
// optionally Poisson-stitch.
ImageBuffer reconstruct(const ToyGenerator& gen, const std::vector<SegmentProjection>& projections,
                        const LabelMap& labels, const ImageBuffer& original, const StitchConfig& stitch_cfg);

// W code of a standard-normal z drawn from SplitMix64(seed).
LatentCode random_w(const ToyGenerator& gen, std::uint64_t seed);

// Unit direction from random_w(seed) towards random_w(seed + 1), both
// promoted to `space`.
EditDirection random_direction(const ToyGenerator& gen, LatentSpace space, std::uint64_t seed, std::string name);

// Synthetic target: segment k renders random_w(seed ^ k), label 0 renders
// random_w(seed).
ImageBuffer synthesize_demo(const ToyGenerator& gen, const LabelMap& labels, std::uint64_t seed);

} // namespace segedit
