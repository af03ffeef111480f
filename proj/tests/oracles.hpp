#pragma once

// Independent reference implementations used to check the library.

#include "generator.hpp"
#include "image.hpp"
#include "poisson.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

using namespace segedit;

inline ImageBuffer random_image(int w, int h, std::uint64_t seed) {
    SplitMix64 rng(seed);
    ImageBuffer img(w, h);
    for (double& v : img.data())
        v = rng.uniform();
    return img;
}

inline BinaryMask random_mask(int w, int h, double density, std::uint64_t seed) {
    SplitMix64 rng(seed);
    BinaryMask m(w, h);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.set(i, rng.uniform() < density);
    return m;
}

inline BinaryMask disk_mask(int w, int h, double cx, double cy, double r) {
    BinaryMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m.set(x, y, (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r);
    return m;
}

inline LatentCode random_code(const ToyGenerator& gen, LatentSpace space, std::uint64_t seed) {
    SplitMix64 rng(seed);
    LatentCode z = gen.zero_code(LatentSpace::Z);
    for (double& v : z.rows[0])
        v = rng.normal();
    return space == LatentSpace::Z ? z : gen.promote(z, space);
}

inline std::vector<double> random_upstream(std::size_t n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<double> up(n);
    for (double& v : up)
        v = rng.uniform(-1.0, 1.0);
    return up;
}

// Number of integer offsets (dx, dy) with dx^2 + dy^2 <= r^2.
inline int disk_count(int r) {
    int n = 0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            n += dx * dx + dy * dy <= r * r;
    return n;
}

inline BinaryMask brute_dilate(const BinaryMask& m, int r) {
    BinaryMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            bool hit = false;
            for (int sy = 0; sy < m.height() && !hit; ++sy)
                for (int sx = 0; sx < m.width() && !hit; ++sx)
                    hit = m.at(sx, sy) && (sx - x) * (sx - x) + (sy - y) * (sy - y) <= r * r;
            out.set(x, y, hit);
        }
    return out;
}

// Euclidean distance from each pixel centre to the nearest pixel centre of
// the opposite class.
inline std::vector<double> exact_distance(const BinaryMask& m) {
    const int w = m.width(), h = m.height();
    std::vector<double> d(m.size(), std::numeric_limits<double>::infinity());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int sy = 0; sy < h; ++sy)
                for (int sx = 0; sx < w; ++sx)
                    if (m.at(sx, sy) != m.at(x, y))
                        d[y * w + x] = std::min(d[y * w + x], std::hypot(double(sx - x), double(sy - y)));
    return d;
}

// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col]))
                piv = r;
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0)
                continue;
            for (std::size_t c = col; c < n; ++c)
                a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c)
            s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

// Assembles the seamless-cloning system straight from its definition and
// solves it densely. Returns one RGB triple per region pixel in row-major
// pixel order.
inline std::vector<std::array<double, 3>> dense_poisson(const ImageBuffer& composite, const ImageBuffer& source,
                                                        const BinaryMask& region) {
    const int w = composite.width(), h = composite.height();
    std::vector<int> id(region.size(), -1);
    int n = 0;
    for (std::size_t p = 0; p < region.size(); ++p)
        if (region.at(p))
            id[p] = n++;
    std::vector<std::array<double, 3>> out(n);
    for (int c = 0; c < 3; ++c) {
        std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
        std::vector<double> b(n, 0.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int i = id[y * w + x];
                if (i < 0)
                    continue;
                const int nb[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
                for (auto [qx, qy] : nb) {
                    if (qx < 0 || qy < 0 || qx >= w || qy >= h)
                        continue;
                    a[i][i] += 1.0;
                    b[i] += source.at(x, y, c) - source.at(qx, qy, c);
                    const int j = id[qy * w + qx];
                    if (j >= 0)
                        a[i][j] -= 1.0;
                    else
                        b[i] += composite.at(qx, qy, c);
                }
            }
        const auto x = dense_solve(a, b);
        for (int i = 0; i < n; ++i)
            out[i][c] = x[i];
    }
    return out;
}

inline double inner(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

// Central finite differences of <upstream, synthesize(code)>. Components
// whose +-eps probes cross a leaky-ReLU kink get a smaller eps until the
// activation pattern is stable on both sides.
inline LatentCode fd_code_gradient(const ToyGenerator& gen, const LatentCode& code, std::span<const double> up,
                                   double eps0 = 1e-3) {
    const auto pattern = gen.activation_pattern(code);
    LatentCode g = code;
    for (std::size_t r = 0; r < code.rows.size(); ++r)
        for (std::size_t i = 0; i < code.rows[r].size(); ++i) {
            double eps = eps0;
            LatentCode cp, cm;
            for (;;) {
                cp = code;
                cm = code;
                cp.rows[r][i] += eps;
                cm.rows[r][i] -= eps;
                if ((gen.activation_pattern(cp) == pattern && gen.activation_pattern(cm) == pattern) || eps < 1e-8)
                    break;
                eps /= 10.0;
            }
            g.rows[r][i] = (inner(up, gen.synthesize(cp).data()) - inner(up, gen.synthesize(cm).data())) / (2 * eps);
        }
    return g;
}

// max |a - b| / max |b| over all entries.
inline double relative_error(const LatentCode& a, const LatentCode& b) {
    double diff = 0.0, scale = 0.0;
    for (std::size_t r = 0; r < a.rows.size(); ++r)
        for (std::size_t i = 0; i < a.rows[r].size(); ++i) {
            diff = std::max(diff, std::fabs(a.rows[r][i] - b.rows[r][i]));
            scale = std::max(scale, std::fabs(b.rows[r][i]));
        }
    return diff / scale;
}

inline double relative_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::fabs(a[i] - b[i]));
        scale = std::max(scale, std::fabs(b[i]));
    }
    return diff / scale;
}

// Finite differences with respect to one fine-tunable weight subset, laid
// out like ToyGenerator::grad_weights.
inline std::vector<double> fd_weight_gradient(const ToyGenerator& gen, const LatentCode& code,
                                              std::span<const double> up, WeightSubset subset, double eps0 = 1e-3) {
    const TunableWeights base = gen.tunable_weights();
    std::vector<std::vector<double> TunableWeights::*> parts;
    if (subset == WeightSubset::FinalLayer)
        parts = {&TunableWeights::final_kernel, &TunableWeights::final_bias};
    else
        parts = {&TunableWeights::rgb_weight, &TunableWeights::rgb_bias};
    const auto pattern = gen.activation_pattern(code);
    std::vector<double> g;
    for (auto part : parts)
        for (std::size_t i = 0; i < (base.*part).size(); ++i) {
            double eps = eps0;
            ToyGenerator gp = gen, gm = gen;
            for (;;) {
                TunableWeights wp = base, wm = base;
                (wp.*part)[i] += eps;
                (wm.*part)[i] -= eps;
                gp = gen.with_tunable_weights(wp);
                gm = gen.with_tunable_weights(wm);
                if ((gp.activation_pattern(code) == pattern && gm.activation_pattern(code) == pattern) || eps < 1e-8)
                    break;
                eps /= 10.0;
            }
            g.push_back((inner(up, gp.synthesize(code).data()) - inner(up, gm.synthesize(code).data())) / (2 * eps));
        }
    return g;
}

} // namespace oracle
