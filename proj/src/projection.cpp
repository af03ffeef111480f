#include "projection.hpp"

#include "error.hpp"
#include "rng.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

namespace segedit {

namespace {

class Adam {
public:
    Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
        : m_(n, 0.0), v_(n, 0.0), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::span<double> params, std::span<const double> grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
            params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
        }
    }

private:
    std::vector<double> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
};

std::vector<double> flatten(const LatentCode& code) {
    std::vector<double> out;
    out.reserve(code.value_count());
    for (const auto& r : code.rows)
        out.insert(out.end(), r.begin(), r.end());
    return out;
}

void unflatten(std::span<const double> flat, LatentCode& code) {
    std::size_t k = 0;
    for (auto& r : code.rows)
        for (auto& v : r)
            v = flat[k++];
}

std::vector<double> flatten(const TunableWeights& w) {
    std::vector<double> out;
    for (const auto* v : {&w.final_kernel, &w.final_bias, &w.rgb_weight, &w.rgb_bias})
        out.insert(out.end(), v->begin(), v->end());
    return out;
}

void unflatten(std::span<const double> flat, TunableWeights& w) {
    std::size_t k = 0;
    for (auto* v : {&w.final_kernel, &w.final_bias, &w.rgb_weight, &w.rgb_bias})
        for (auto& x : *v)
            x = flat[k++];
}

void check_target(const ToyGenerator& gen, const ImageBuffer& target, const BinaryMask& mask) {
    const int res = gen.output_size();
    if (target.width() != res || target.height() != res)
        fail(ErrorCode::DimensionMismatch, "target must be " + std::to_string(res) + "x" + std::to_string(res) +
                                               " to match the generator output");
    if (mask.width() != res || mask.height() != res)
        fail(ErrorCode::DimensionMismatch, "mask dimensions differ from the target");
}

} // namespace

void ProjectionConfig::validate() const {
    if (space == LatentSpace::Z)
        fail(ErrorCode::InvalidArgument, "projection space must be W, WPlus or SSpace");
    if (steps < 1)
        fail(ErrorCode::InvalidArgument, "steps must be >= 1");
    if (!(learning_rate > 0.0))
        fail(ErrorCode::InvalidArgument, "learning_rate must be > 0");
    if (band_radius < 0)
        fail(ErrorCode::InvalidArgument, "band_radius must be >= 0");
    if (mean_latent_samples < 1)
        fail(ErrorCode::InvalidArgument, "mean_latent_samples must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        fail(ErrorCode::InvalidArgument, "Adam betas must lie in [0, 1)");
}

double masked_loss(const ImageBuffer& target, const ImageBuffer& rendered, const BinaryMask& mask) {
    if (!target.same_size(rendered) || mask.width() != target.width() || mask.height() != target.height())
        fail(ErrorCode::DimensionMismatch, "masked_loss: dimensions differ");
    if (mask.pixel_count() == 0)
        fail(ErrorCode::EmptyMask, "masked_loss: empty mask");
    auto t = target.data(), r = rendered.data();
    double sum = 0.0;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask.at(p))
            continue;
        for (int c = 0; c < 3; ++c) {
            const double d = r[p * 3 + c] - t[p * 3 + c];
            sum += d * d;
        }
    }
    return sum / (3.0 * static_cast<double>(mask.pixel_count()));
}

std::vector<double> masked_loss_gradient(const ImageBuffer& target, const ImageBuffer& rendered,
                                         const BinaryMask& mask) {
    if (mask.pixel_count() == 0)
        fail(ErrorCode::EmptyMask, "masked_loss: empty mask");
    auto t = target.data(), r = rendered.data();
    std::vector<double> g(r.size(), 0.0);
    const double scale = 2.0 / (3.0 * static_cast<double>(mask.pixel_count()));
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask.at(p))
            continue;
        for (int c = 0; c < 3; ++c)
            g[p * 3 + c] = scale * (r[p * 3 + c] - t[p * 3 + c]);
    }
    return g;
}

LatentCode mean_latent(const ToyGenerator& gen, int samples, std::uint64_t seed) {
    if (samples < 1)
        fail(ErrorCode::InvalidArgument, "mean_latent needs at least one sample");
    SplitMix64 rng(seed);
    LatentCode z = gen.zero_code(LatentSpace::Z);
    LatentCode mean = gen.zero_code(LatentSpace::W);
    for (int i = 0; i < samples; ++i) {
        for (auto& v : z.rows[0])
            v = rng.normal();
        const LatentCode w = gen.map_z_to_w(z);
        for (std::size_t k = 0; k < w.rows[0].size(); ++k)
            mean.rows[0][k] += w.rows[0][k];
    }
    for (auto& v : mean.rows[0])
        v /= samples;
    return mean;
}

SegmentProjection project_segment(const ToyGenerator& gen, const ImageBuffer& target, const BinaryMask& mask,
                                  const ProjectionConfig& cfg, const std::optional<LatentCode>& init,
                                  const ProgressFn& progress) {
    cfg.validate();
    check_target(gen, target, mask);
    if (mask.pixel_count() == 0)
        fail(ErrorCode::EmptyMask, "projection mask is empty");
    const BinaryMask support = dilate(mask, cfg.band_radius);

    LatentCode code = init ? gen.promote(*init, cfg.space)
                           : gen.promote(mean_latent(gen, cfg.mean_latent_samples, cfg.seed), cfg.space);
    std::vector<double> params = flatten(code);
    Adam adam(params.size(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);

    SegmentProjection out;
    out.code = code;
    out.loss_history.reserve(cfg.steps);
    out.step_losses.reserve(cfg.steps);
    double best = std::numeric_limits<double>::infinity();

    for (int step = 0; step < cfg.steps; ++step) {
        unflatten(params, code);
        const ForwardTrace trace = gen.forward(code);
        const double loss = masked_loss(target, trace.image, support);
        if (!std::isfinite(loss))
            fail(ErrorCode::NonFinite, "non-finite loss at step " + std::to_string(step));
        if (loss < best) {
            best = loss;
            out.code = code;
        }
        out.step_losses.push_back(loss);
        out.loss_history.push_back(best);

        const auto upstream = masked_loss_gradient(target, trace.image, support);
        const auto grad = flatten(gen.backward_code(code, trace, upstream));
        adam.step(params, grad);
        if (progress)
            progress(step + 1, cfg.steps);
    }
    out.final_loss = best;
    return out;
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    std::vector<std::exception_ptr> errors(count);
    auto run = [&](int i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i)
            run(i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (int i = next++; i < count; i = next++)
                    run(i);
            });
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

std::vector<SegmentProjection> project_all(const ToyGenerator& gen, const ImageBuffer& target,
                                           const LabelMap& labels, const ProjectionConfig& cfg, int threads,
                                           const ProgressFn& progress) {
    cfg.validate();
    const int n = labels.segment_count();
    if (n < 1)
        fail(ErrorCode::InvalidLabels, "label map has no segments to project");
    std::vector<SegmentProjection> results(n);
    std::mutex progress_mutex;
    int done = 0;
    const int total = n * cfg.steps;
    ProgressFn per_step;
    if (progress)
        per_step = [&](int, int) {
            std::lock_guard lock(progress_mutex);
            progress(++done, total);
        };

    parallel_for(n, threads, [&](int i) {
        const int k = i + 1;
        ProjectionConfig seg_cfg = cfg;
        seg_cfg.seed = cfg.seed ^ static_cast<std::uint64_t>(k);
        try {
            results[i] = project_segment(gen, target, mask_of(labels, k), seg_cfg, {}, per_step);
        } catch (const Error& e) {
            throw Error(e.code(), "segment " + std::to_string(k) + ": " + e.what());
        }
        results[i].segment_id = k;
    });
    return results;
}

SegmentProjection project_global(const ToyGenerator& gen, const ImageBuffer& target, const ProjectionConfig& cfg,
                                 const ProgressFn& progress) {
    auto out = project_segment(gen, target, full_mask(target.width(), target.height()), cfg, {}, progress);
    out.segment_id = 0;
    return out;
}

ToyGenerator generator_for(const ToyGenerator& gen, const SegmentProjection& proj) {
    return proj.fine_tuned_weights ? gen.with_tunable_weights(*proj.fine_tuned_weights) : gen;
}

SegmentProjection finetune_segment(const ToyGenerator& gen, const SegmentProjection& proj, const ImageBuffer& target,
                                   const BinaryMask& mask, const FinetuneConfig& cfg) {
    if (cfg.steps < 0)
        fail(ErrorCode::InvalidArgument, "fine-tune steps must be >= 0");
    if (cfg.steps == 0)
        return proj;
    if (!(cfg.learning_rate > 0.0))
        fail(ErrorCode::InvalidArgument, "fine-tune learning rate must be > 0");
    check_target(gen, target, mask);
    if (mask.pixel_count() == 0)
        fail(ErrorCode::EmptyMask, "fine-tune mask is empty");
    const BinaryMask support = dilate(mask, cfg.band_radius);

    TunableWeights weights = generator_for(gen, proj).tunable_weights();
    std::vector<double> params = flatten(weights);
    Adam adam(params.size(), cfg.learning_rate, 0.9, 0.999, 1e-8);

    SegmentProjection out = proj;
    out.fine_tuned_weights = weights;
    double best = std::numeric_limits<double>::infinity();
    for (int step = 0; step <= cfg.steps; ++step) {
        unflatten(params, weights);
        const ToyGenerator tuned = gen.with_tunable_weights(weights);
        const ForwardTrace trace = tuned.forward(proj.code);
        const double loss = masked_loss(target, trace.image, support);
        if (!std::isfinite(loss))
            fail(ErrorCode::NonFinite, "non-finite loss at fine-tune step " + std::to_string(step));
        if (loss < best) {
            best = loss;
            out.fine_tuned_weights = weights;
        }
        // Step 0 re-evaluates the pivot and is not recorded.
        if (step > 0) {
            out.step_losses.push_back(loss);
            out.loss_history.push_back(std::min(best, proj.final_loss));
        }
        if (step == cfg.steps)
            break;
        const auto upstream = masked_loss_gradient(target, trace.image, support);
        adam.step(params, flatten(tuned.backward_tunable(trace, upstream)));
    }
    if (best >= proj.final_loss)
        return proj;
    out.final_loss = best;
    return out;
}

} // namespace segedit
