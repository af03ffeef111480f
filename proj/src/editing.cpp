#include "editing.hpp"

#include "error.hpp"
#include "rng.hpp"

#include <cmath>
#include <set>
#include <string>

namespace segedit {

void validate_direction(const ToyGenerator& gen, const EditDirection& d) {
    if (d.space() == LatentSpace::Z)
        fail(ErrorCode::InvalidArgument, "edit directions must live in W, WPlus or SSpace");
    gen.check_code(d.vector);
    bool nonzero = false;
    for (const auto& r : d.vector.rows)
        for (double v : r)
            nonzero = nonzero || v != 0.0;
    if (!nonzero)
        fail(ErrorCode::InvalidArgument, "edit direction '" + d.name + "' is zero");
}

LatentCode apply_direction(const ToyGenerator& gen, const LatentCode& code, const EditDirection& d, double alpha) {
    validate_direction(gen, d);
    if (!std::isfinite(alpha))
        fail(ErrorCode::NonFinite, "alpha must be finite");
    LatentCode out = gen.promote(code, d.space());
    for (std::size_t r = 0; r < out.rows.size(); ++r)
        for (std::size_t i = 0; i < out.rows[r].size(); ++i)
            out.rows[r][i] += alpha * d.vector.rows[r][i];
    return out;
}

std::vector<SegmentProjection> edit_simultaneous(const ToyGenerator& gen, const std::vector<SegmentProjection>& projections,
                                                 const EditDirection& d, double alpha) {
    std::vector<SegmentProjection> out = projections;
    for (auto& p : out) {
        try {
            p.code = apply_direction(gen, p.code, d, alpha);
        } catch (const Error& e) {
            throw Error(e.code(), "segment " + std::to_string(p.segment_id) + ": " + e.what());
        }
    }
    return out;
}

EditDirection direction_from_codes(const LatentCode& a, const LatentCode& b, std::string name) {
    if (a.space != b.space || a.rows.size() != b.rows.size())
        fail(ErrorCode::SpaceMismatch, "direction_from_codes: codes differ in space or shape");
    LatentCode diff = b;
    double norm2 = 0.0;
    for (std::size_t r = 0; r < diff.rows.size(); ++r) {
        if (a.rows[r].size() != b.rows[r].size())
            fail(ErrorCode::DimensionMismatch, "direction_from_codes: row lengths differ");
        for (std::size_t i = 0; i < diff.rows[r].size(); ++i) {
            diff.rows[r][i] -= a.rows[r][i];
            norm2 += diff.rows[r][i] * diff.rows[r][i];
        }
    }
    if (norm2 == 0.0)
        fail(ErrorCode::InvalidArgument, "direction_from_codes: codes are identical (zero direction)");
    const double norm = std::sqrt(norm2);
    for (auto& r : diff.rows)
        for (auto& v : r)
            v /= norm;
    if (!diff.all_finite())
        fail(ErrorCode::NonFinite, "direction_from_codes: non-finite direction");
    return {std::move(name), std::move(diff)};
}

std::vector<Piece> render_pieces(const ToyGenerator& gen, const std::vector<SegmentProjection>& projections) {
    std::vector<Piece> pieces;
    pieces.reserve(projections.size());
    for (const auto& p : projections)
        pieces.emplace_back(p.segment_id, generator_for(gen, p).synthesize(p.code));
    return pieces;
}

ImageBuffer reconstruct(const ToyGenerator& gen, const std::vector<SegmentProjection>& projections,
                        const LabelMap& labels, const ImageBuffer& original, const StitchConfig& stitch_cfg) {
    const auto pieces = render_pieces(gen, projections);
    const ImageBuffer hard = compose(pieces, labels, original);
    return stitch_composite(hard, pieces, labels, stitch_cfg);
}

ImageBuffer edit_incremental(const ToyGenerator& gen, const ImageBuffer& image, const LabelMap& labels,
                             const EditScript& script, const ProjectionConfig& proj_cfg, const StitchConfig& stitch_cfg,
                             CodeCache& cache, const IncrementalOptions& options) {
    if (!image.same_size(ImageBuffer(labels.width(), labels.height())))
        fail(ErrorCode::DimensionMismatch, "edit_incremental: image and labels differ in size");
    const int n = labels.segment_count();
    ImageBuffer current = image;

    for (std::size_t s = 0; s < script.size(); ++s) {
        const EditStep& step = script[s];
        try {
            std::vector<int> ids;
            if (step.segments) {
                std::set<int> unique;
                for (int k : *step.segments) {
                    if (k < 1 || k > n)
                        fail(ErrorCode::OutOfRange, "segment id " + std::to_string(k) + " outside 1.." +
                                                        std::to_string(n));
                    unique.insert(k);
                }
                ids.assign(unique.begin(), unique.end());
            } else {
                for (int k = 1; k <= n; ++k)
                    ids.push_back(k);
            }

            std::vector<int> to_project;
            for (int k : ids)
                if (step.reproject || !cache.contains(k))
                    to_project.push_back(k);
            std::vector<SegmentProjection> fresh(to_project.size());
            parallel_for(static_cast<int>(to_project.size()), options.threads, [&](int i) {
                const int k = to_project[i];
                ProjectionConfig cfg = proj_cfg;
                cfg.seed = proj_cfg.seed ^ static_cast<std::uint64_t>(k);
                try {
                    fresh[i] = project_segment(gen, current, mask_of(labels, k), cfg, {}, options.progress);
                } catch (const Error& e) {
                    throw Error(e.code(), "segment " + std::to_string(k) + ": " + e.what());
                }
                fresh[i].segment_id = k;
            });
            for (auto& p : fresh)
                cache[p.segment_id] = std::move(p);

            std::vector<Piece> pieces;
            std::set<int> edited(ids.begin(), ids.end());
            for (int k = 1; k <= n; ++k) {
                if (edited.contains(k)) {
                    SegmentProjection& p = cache[k];
                    p.code = apply_direction(gen, p.code, step.direction, step.alpha);
                    pieces.emplace_back(k, generator_for(gen, p).synthesize(p.code));
                } else {
                    pieces.emplace_back(k, current);
                }
            }
            const ImageBuffer hard = compose(pieces, labels, current);
            StitchConfig cfg = stitch_cfg;
            for (int k = 1; k <= n; ++k)
                if (!edited.contains(k))
                    cfg.skip.insert(k);
            current = stitch_composite(hard, pieces, labels, cfg);
            if (options.quantize_between_steps)
                current = quantize(current);
        } catch (const Error& e) {
            throw Error(e.code(), "edit step " + std::to_string(s) + ": " + e.what());
        }
    }
    return current;
}

ImageBuffer edit_incremental(const ToyGenerator& gen, const ImageBuffer& image, const LabelMap& labels,
                             const EditScript& script, const ProjectionConfig& proj_cfg, const StitchConfig& stitch_cfg) {
    CodeCache cache;
    return edit_incremental(gen, image, labels, script, proj_cfg, stitch_cfg, cache);
}

LatentCode random_w(const ToyGenerator& gen, std::uint64_t seed) {
    SplitMix64 rng(seed);
    LatentCode z = gen.zero_code(LatentSpace::Z);
    for (double& v : z.rows[0])
        v = rng.normal();
    return gen.map_z_to_w(z);
}

EditDirection random_direction(const ToyGenerator& gen, LatentSpace space, std::uint64_t seed, std::string name) {
    if (space == LatentSpace::Z)
        fail(ErrorCode::InvalidArgument, "edit directions must live in W, WPlus or SSpace");
    return direction_from_codes(gen.promote(random_w(gen, seed), space), gen.promote(random_w(gen, seed + 1), space),
                                std::move(name));
}

ImageBuffer synthesize_demo(const ToyGenerator& gen, const LabelMap& labels, std::uint64_t seed) {
    if (labels.width() != gen.output_size() || labels.height() != gen.output_size())
        fail(ErrorCode::DimensionMismatch, "synthesize_demo: label map must match the generator resolution");
    const ImageBuffer background = gen.synthesize(random_w(gen, seed));
    std::vector<Piece> pieces;
    for (int k = 1; k <= labels.segment_count(); ++k)
        pieces.emplace_back(k, gen.synthesize(random_w(gen, seed ^ static_cast<std::uint64_t>(k))));
    return compose(pieces, labels, background);
}

} // namespace segedit
