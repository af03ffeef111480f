#pragma once

#include "generator.hpp"
#include "image.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace segedit {

struct ProjectionConfig {
    LatentSpace space = LatentSpace::W;
    int steps = 200;
    double learning_rate = 0.05;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int band_radius = 3;
    int mean_latent_samples = 1000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SegmentProjection {
    int segment_id = 0;
    LatentCode code;
    // Best loss seen so far, one entry per optimizer step; the last entry
    // is final_loss. Fine-tuning appends its own steps.
    std::vector<double> loss_history;
    // Raw loss of the iterate evaluated at each step.
    std::vector<double> step_losses;
    double final_loss = 0.0;
    std::optional<TunableWeights> fine_tuned_weights;
};

// Called after each optimizer step with (steps done, total steps).
using ProgressFn = std::function<void(int, int)>;

// Mean squared error over masked pixels, averaged over count * 3 channels.
double masked_loss(const ImageBuffer& target, const ImageBuffer& rendered, const BinaryMask& mask);
// d masked_loss / d rendered, image-shaped.
std::vector<double> masked_loss_gradient(const ImageBuffer& target, const ImageBuffer& rendered,
                                         const BinaryMask& mask);

// Mean of map_z_to_w over `samples` standard-normal z drawn from SplitMix64(seed).
LatentCode mean_latent(const ToyGenerator& gen, int samples, std::uint64_t seed);

// Masked Adam descent on one segment. The loss support is
// dilate(mask, band_radius). Starts at `init` (promoted to cfg.space) when
// given, otherwise at the mean latent. Returns the best iterate.
SegmentProjection project_segment(const ToyGenerator& gen, const ImageBuffer& target, const BinaryMask& mask,
                                  const ProjectionConfig& cfg, const std::optional<LatentCode>& init = {},
                                  const ProgressFn& progress = {});

// One projection per label 1..n. Segment k runs with seed cfg.seed ^ k, so
// output is independent of execution order and thread count.
std::vector<SegmentProjection> project_all(const ToyGenerator& gen, const ImageBuffer& target,
                                           const LabelMap& labels, const ProjectionConfig& cfg, int threads = 1,
                                           const ProgressFn& progress = {});

// Single-code baseline over the whole frame; reported as segment 0.
SegmentProjection project_global(const ToyGenerator& gen, const ImageBuffer& target, const ProjectionConfig& cfg,
                                 const ProgressFn& progress = {});

struct FinetuneConfig {
    int steps = 100;
    double learning_rate = 0.005;
    int band_radius = 3;
};

// Adam on the final conv layer and RGB projection with the code frozen.
// Never returns a loss above the pivot's loss.
SegmentProjection finetune_segment(const ToyGenerator& gen, const SegmentProjection& proj, const ImageBuffer& target,
                                   const BinaryMask& mask, const FinetuneConfig& cfg);

// The generator a projection renders with: fine-tuned copy when present.
ToyGenerator generator_for(const ToyGenerator& gen, const SegmentProjection& proj);

// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
// exception by index order is rethrown after all workers finish.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

} // namespace segedit
