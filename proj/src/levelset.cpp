#include "levelset.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace segedit {

namespace {

constexpr double kDiag = 1.4142135623730951;
constexpr double kCflLimit = 0.5;

// Chamfer distance from every pixel to the nearest pixel of `target`.
std::vector<double> chamfer_to(const BinaryMask& mask, bool target) {
    const int w = mask.width(), h = mask.height();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> d(mask.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = mask.at(i) == target ? 0.0 : inf;
    auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
    auto relax = [&](int x, int y, int nx, int ny, double cost) {
        if (nx >= 0 && ny >= 0 && nx < w && ny < h)
            d[idx(x, y)] = std::min(d[idx(x, y)], d[idx(nx, ny)] + cost);
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            relax(x, y, x - 1, y, 1.0);
            relax(x, y, x - 1, y - 1, kDiag);
            relax(x, y, x, y - 1, 1.0);
            relax(x, y, x + 1, y - 1, kDiag);
        }
    for (int y = h - 1; y >= 0; --y)
        for (int x = w - 1; x >= 0; --x) {
            relax(x, y, x + 1, y, 1.0);
            relax(x, y, x + 1, y + 1, kDiag);
            relax(x, y, x, y + 1, 1.0);
            relax(x, y, x - 1, y + 1, kDiag);
        }
    return d;
}

} // namespace

BinaryMask LevelSetField::positive() const {
    std::vector<std::uint8_t> bits(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i)
        bits[i] = phi[i] > 0.0;
    return BinaryMask::from_bits(width, height, std::move(bits));
}

double StoppingFunction::max() const {
    double m = 0.0;
    for (double v : f)
        m = std::max(m, v);
    return m;
}

LevelSetField signed_distance_from_mask(const BinaryMask& mask) {
    if (mask.pixel_count() == 0 || mask.pixel_count() == mask.size())
        fail(ErrorCode::InvalidArgument, "signed distance needs both inside and outside pixels");
    const auto to_outside = chamfer_to(mask, false);
    const auto to_inside = chamfer_to(mask, true);
    LevelSetField out{mask.width(), mask.height(), std::vector<double>(mask.size())};
    for (std::size_t i = 0; i < mask.size(); ++i)
        out.phi[i] = mask.at(i) ? to_outside[i] - 0.5 : -(to_inside[i] - 0.5);
    return out;
}

StoppingFunction stopping_function(const ImageBuffer& original, const ImageBuffer& rendered, int smooth_radius) {
    if (!original.same_size(rendered))
        fail(ErrorCode::DimensionMismatch, "stopping_function: image dimensions differ");
    if (smooth_radius < 0)
        fail(ErrorCode::InvalidArgument, "smooth_radius must be >= 0");
    const int w = original.width(), h = original.height();
    std::vector<double> diff(original.pixel_count());
    auto a = original.data(), b = rendered.data();
    for (std::size_t p = 0; p < diff.size(); ++p)
        diff[p] = (std::fabs(a[p * 3] - b[p * 3]) + std::fabs(a[p * 3 + 1] - b[p * 3 + 1]) +
                   std::fabs(a[p * 3 + 2] - b[p * 3 + 2])) / 3.0;

    StoppingFunction out{w, h, std::vector<double>(diff.size(), 0.0)};
    const int r = smooth_radius;
    const double norm = 1.0 / ((2.0 * r + 1.0) * (2.0 * r + 1.0));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && ny >= 0 && nx < w && ny < h)
                        acc += diff[static_cast<std::size_t>(ny) * w + nx];
                }
            out.f[static_cast<std::size_t>(y) * w + x] = acc * norm;
        }
    const double m = out.max();
    if (m > 0.0)
        for (double& v : out.f)
            v /= m;
    return out;
}

double max_stable_dt(const StoppingFunction& f) {
    const double m = f.max();
    return m > 0.0 ? kCflLimit / m : std::numeric_limits<double>::infinity();
}

LevelSetField reinitialize(const LevelSetField& phi) {
    const BinaryMask inside = phi.positive();
    if (inside.pixel_count() == 0 || inside.pixel_count() == inside.size())
        return phi;
    return signed_distance_from_mask(inside);
}

LevelSetField evolve(const LevelSetField& phi, const StoppingFunction& f, double dt, int iterations,
                     int reinit_interval) {
    if (phi.width != f.width || phi.height != f.height)
        fail(ErrorCode::DimensionMismatch, "evolve: field dimensions differ");
    if (!(dt > 0.0))
        fail(ErrorCode::InvalidArgument, "dt must be > 0");
    if (iterations < 0 || reinit_interval < 0)
        fail(ErrorCode::InvalidArgument, "iteration counts must be >= 0");
    if (dt * f.max() > kCflLimit) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "CFL condition violated: dt * max(F) = " << dt * f.max() << " > " << kCflLimit
            << "; max admissible dt = " << max_stable_dt(f);
        fail(ErrorCode::CflViolation, msg.str());
    }

    const int w = phi.width, h = phi.height;
    LevelSetField cur = phi;
    std::vector<double> next(cur.phi.size());
    for (int it = 0; it < iterations; ++it) {
        const auto& p = cur.phi;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                const double speed = f.f[i];
                if (speed == 0.0) {
                    next[i] = p[i];
                    continue;
                }
                // One-sided differences; zero across the frame (Neumann).
                const double dxm = x > 0 ? p[i] - p[i - 1] : 0.0;
                const double dxp = x < w - 1 ? p[i + 1] - p[i] : 0.0;
                const double dym = y > 0 ? p[i] - p[i - w] : 0.0;
                const double dyp = y < h - 1 ? p[i + w] - p[i] : 0.0;
                const double ax = std::max(std::min(dxm, 0.0) * std::min(dxm, 0.0),
                                           std::max(dxp, 0.0) * std::max(dxp, 0.0));
                const double ay = std::max(std::min(dym, 0.0) * std::min(dym, 0.0),
                                           std::max(dyp, 0.0) * std::max(dyp, 0.0));
                next[i] = p[i] + dt * speed * std::sqrt(ax + ay);
            }
        cur.phi.swap(next);
        if (reinit_interval > 0 && (it + 1) % reinit_interval == 0)
            cur = reinitialize(cur);
    }
    return cur;
}

RefineResult refine_segment(const LabelMap& labels, int k, const ImageBuffer& original, const ImageBuffer& rendered_k,
                            const RefineParams& params) {
    if (original.width() != labels.width() || original.height() != labels.height() ||
        !original.same_size(rendered_k))
        fail(ErrorCode::DimensionMismatch, "refine_segment: dimensions differ");
    if (params.max_growth < 0)
        fail(ErrorCode::InvalidArgument, "max_growth must be >= 0");
    const BinaryMask before = mask_of(labels, k);
    StoppingFunction speed = stopping_function(original, rendered_k, params.smooth_radius);

    BinaryMask after = before;
    if (before.pixel_count() < before.size()) {
        const LevelSetField evolved =
            evolve(signed_distance_from_mask(before), speed, params.dt, params.iterations, params.reinit_interval);
        after = (evolved.positive() & dilate(before, params.max_growth)) | before;
    }

    std::vector<std::uint8_t> out(labels.labels().begin(), labels.labels().end());
    for (std::size_t i = 0; i < out.size(); ++i)
        if (after.at(i))
            out[i] = static_cast<std::uint8_t>(k);
    std::vector<std::size_t> remaining(labels.segment_count() + 1, 0);
    for (auto l : out)
        ++remaining[l];
    for (int j = 1; j <= labels.segment_count(); ++j)
        if (remaining[j] == 0)
            fail(ErrorCode::SegmentConsumed,
                 "refining segment " + std::to_string(k) + " would consume segment " + std::to_string(j));

    return {LabelMap::from_labels(labels.width(), labels.height(), std::move(out)), std::move(speed), before, after};
}

} // namespace segedit
