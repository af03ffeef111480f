#include "poisson.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace segedit {

namespace {

constexpr int kN4[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

bool on_frame(int x, int y, int w, int h) {
    return x == 0 || y == 0 || x == w - 1 || y == h - 1;
}

} // namespace

std::size_t StitchProblem::dirichlet_count() const {
    std::size_t n = 0;
    for (int p : pixel_of_unknown) {
        const int x = p % width, y = p / width;
        for (auto [dx, dy] : kN4) {
            const int nx = x + dx, ny = y + dy;
            if (nx >= 0 && ny >= 0 && nx < width && ny < height && unknown_of_pixel[ny * width + nx] < 0)
                ++n;
        }
    }
    return n;
}

StitchProblem build_problem(const ImageBuffer& composite, const ImageBuffer& source, const BinaryMask& region,
                            FrameBoundary frame) {
    if (!composite.same_size(source) || region.width() != composite.width() || region.height() != composite.height())
        fail(ErrorCode::DimensionMismatch, "build_problem: dimensions differ");
    if (region.pixel_count() == 0)
        fail(ErrorCode::EmptyMask, "build_problem: empty region");
    const int w = composite.width(), h = composite.height();

    StitchProblem pb;
    pb.width = w;
    pb.height = h;
    pb.region = region;
    pb.boundary = composite;
    pb.unknown_of_pixel.assign(region.size(), -1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!region.at(x, y))
                continue;
            if (frame == FrameBoundary::Reject && on_frame(x, y, w, h))
                fail(ErrorCode::InvalidArgument, "build_problem: region touches the image frame");
            const int p = y * w + x;
            pb.unknown_of_pixel[p] = static_cast<int>(pb.pixel_of_unknown.size());
            pb.pixel_of_unknown.push_back(p);
            pb.initial.push_back({source.at(x, y, 0), source.at(x, y, 1), source.at(x, y, 2)});
        }

    pb.guidance_x.assign(composite.data().size(), 0.0);
    pb.guidance_y.assign(composite.data().size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                const std::size_t i = source.index(x, y, c);
                if (x + 1 < w)
                    pb.guidance_x[i] = source.at(x + 1, y, c) - source.at(x, y, c);
                if (y + 1 < h)
                    pb.guidance_y[i] = source.at(x, y + 1, c) - source.at(x, y, c);
            }
    return pb;
}

std::vector<int> stencil_diagonal(const StitchProblem& pb) {
    std::vector<int> diag(pb.unknown_count());
    for (std::size_t u = 0; u < diag.size(); ++u) {
        const int x = pb.pixel_of_unknown[u] % pb.width, y = pb.pixel_of_unknown[u] / pb.width;
        diag[u] = (x > 0) + (x < pb.width - 1) + (y > 0) + (y < pb.height - 1);
    }
    return diag;
}

std::vector<std::array<double, 3>> right_hand_side(const StitchProblem& pb) {
    const int w = pb.width, h = pb.height;
    std::vector<std::array<double, 3>> b(pb.unknown_count());
    auto gi = [&](int x, int y, int c) { return (static_cast<std::size_t>(y) * w + x) * 3 + c; };
    for (std::size_t u = 0; u < b.size(); ++u) {
        const int x = pb.pixel_of_unknown[u] % w, y = pb.pixel_of_unknown[u] / w;
        for (int c = 0; c < 3; ++c) {
            // sum over in-frame neighbours q of (s_p - s_q)
            double v = 0.0;
            if (x + 1 < w) v -= pb.guidance_x[gi(x, y, c)];
            if (x > 0) v += pb.guidance_x[gi(x - 1, y, c)];
            if (y + 1 < h) v -= pb.guidance_y[gi(x, y, c)];
            if (y > 0) v += pb.guidance_y[gi(x, y - 1, c)];
            for (auto [dx, dy] : kN4) {
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= w || ny >= h)
                    continue;
                if (pb.unknown_of_pixel[ny * w + nx] < 0)
                    v += pb.boundary.at(nx, ny, c);
            }
            b[u][c] = v;
        }
    }
    return b;
}

namespace {

struct Stencil {
    std::vector<int> diag;
    std::vector<std::array<int, 4>> neighbours;  // unknown ids, -1 when absent

    void apply(std::span<const double> x, std::span<double> out) const {
        for (std::size_t u = 0; u < diag.size(); ++u) {
            double v = diag[u] * x[u];
            for (int q : neighbours[u])
                if (q >= 0)
                    v -= x[q];
            out[u] = v;
        }
    }
};

Stencil make_stencil(const StitchProblem& pb) {
    Stencil s;
    s.diag = stencil_diagonal(pb);
    s.neighbours.resize(pb.unknown_count());
    for (std::size_t u = 0; u < s.neighbours.size(); ++u) {
        const int x = pb.pixel_of_unknown[u] % pb.width, y = pb.pixel_of_unknown[u] / pb.width;
        for (int k = 0; k < 4; ++k) {
            const int nx = x + kN4[k][0], ny = y + kN4[k][1];
            const bool inside = nx >= 0 && ny >= 0 && nx < pb.width && ny < pb.height;
            s.neighbours[u][k] = inside ? pb.unknown_of_pixel[ny * pb.width + nx] : -1;
        }
    }
    return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

struct ChannelResult {
    std::vector<double> x;
    bool converged;
    int iterations;
    double relative_residual;
};

ChannelResult cg(const Stencil& A, std::vector<double> b, std::vector<double> x, double tol, int max_iters) {
    const std::size_t n = b.size();
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0)
        return {std::vector<double>(n, 0.0), true, 0, 0.0};
    const double threshold = tol * bnorm;

    std::vector<double> r(n), z(n), p(n), Ap(n);
    A.apply(x, Ap);
    for (std::size_t i = 0; i < n; ++i)
        r[i] = b[i] - Ap[i];
    double rnorm = std::sqrt(dot(r, r));
    std::vector<double> best = x;
    double best_norm = rnorm;
    if (rnorm <= threshold)
        return {std::move(x), true, 0, rnorm / bnorm};

    for (std::size_t i = 0; i < n; ++i)
        z[i] = r[i] / A.diag[i];
    p = z;
    double rz = dot(r, z);
    for (int it = 1; it <= max_iters; ++it) {
        A.apply(p, Ap);
        const double alpha = rz / dot(p, Ap);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        rnorm = std::sqrt(dot(r, r));
        if (rnorm < best_norm) {
            best_norm = rnorm;
            best = x;
        }
        if (rnorm <= threshold)
            return {std::move(x), true, it, rnorm / bnorm};
        for (std::size_t i = 0; i < n; ++i)
            z[i] = r[i] / A.diag[i];
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i)
            p[i] = z[i] + beta * p[i];
    }
    return {std::move(best), false, max_iters, best_norm / bnorm};
}

} // namespace

StitchSolution solve(const StitchProblem& pb, double tol, int max_iters) {
    if (!(tol > 0.0))
        fail(ErrorCode::InvalidArgument, "solve: tol must be > 0");
    const std::size_t n = pb.unknown_count();
    if (n == 0)
        fail(ErrorCode::EmptyMask, "solve: problem has no unknowns");
    if (pb.dirichlet_count() == 0)
        fail(ErrorCode::InvalidArgument, "solve: region has no Dirichlet boundary (singular system)");
    if (max_iters <= 0)
        max_iters = static_cast<int>(10 * n);

    const Stencil A = make_stencil(pb);
    const auto rhs = right_hand_side(pb);
    StitchSolution sol;
    sol.raw.resize(n);
    sol.converged = true;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> b(n), x0(n);
        for (std::size_t u = 0; u < n; ++u) {
            b[u] = rhs[u][c];
            x0[u] = pb.initial[u][c];
        }
        const ChannelResult r = cg(A, std::move(b), std::move(x0), tol, max_iters);
        for (std::size_t u = 0; u < n; ++u)
            sol.raw[u][c] = r.x[u];
        sol.converged = sol.converged && r.converged;
        sol.iterations = std::max(sol.iterations, r.iterations);
        sol.relative_residual = std::max(sol.relative_residual, r.relative_residual);
    }
    sol.values = sol.raw;
    for (auto& px : sol.values)
        for (double& v : px)
            v = std::clamp(v, 0.0, 1.0);
    return sol;
}

ImageBuffer stitch_composite(const ImageBuffer& composite, std::span<const Piece> pieces, const LabelMap& labels,
                             const StitchConfig& cfg) {
    if (composite.width() != labels.width() || composite.height() != labels.height())
        fail(ErrorCode::DimensionMismatch, "stitch_composite: dimensions differ");
    ImageBuffer running = composite;
    if (!cfg.enabled)
        return running;
    const int w = composite.width(), h = composite.height();
    for (int k = 1; k <= labels.segment_count(); ++k) {
        if (cfg.skip.contains(k))
            continue;
        const ImageBuffer* piece = nullptr;
        for (const auto& [id, img] : pieces)
            if (id == k)
                piece = &img;
        if (!piece)
            fail(ErrorCode::InvalidArgument, "stitch_composite: missing piece for segment " + std::to_string(k));

        BinaryMask region = mask_of(labels, k);
        if (cfg.frame == FrameBoundary::Reject)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (on_frame(x, y, w, h))
                        region.set(x, y, false);
        if (region.pixel_count() == 0)
            continue;
        StitchProblem pb = build_problem(running, *piece, region, cfg.frame);
        if (pb.dirichlet_count() == 0)
            continue;  // nothing to stitch against
        StitchSolution sol = solve(pb, cfg.tol, cfg.max_iters);
        if (!sol.converged)
            fail(ErrorCode::NotConverged, "segment " + std::to_string(k) + ": Poisson solve did not converge (residual " +
                                              std::to_string(sol.relative_residual) + ")");
        for (std::size_t u = 0; u < sol.values.size(); ++u) {
            const int p = pb.pixel_of_unknown[u];
            for (int c = 0; c < 3; ++c)
                running.at(p % w, p / w, c) = sol.values[u][c];
        }
    }
    return running;
}

} // namespace segedit
