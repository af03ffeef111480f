#include "error.hpp"
#include "oracles.hpp"
#include "poisson.hpp"
#include "test_util.hpp"

using namespace segedit;

namespace {

struct RandomProblem {
    ImageBuffer composite, source;
    BinaryMask region;
    FrameBoundary frame;
};

// Random problem up to 12x12. Reject-mode regions keep a 1-pixel margin;
// Neumann-mode regions may touch the frame but keep a Dirichlet neighbour.
RandomProblem random_problem(std::uint64_t seed, FrameBoundary frame) {
    SplitMix64 rng(seed);
    const int w = 3 + static_cast<int>(rng.next() % 10), h = 3 + static_cast<int>(rng.next() % 10);
    BinaryMask region = oracle::random_mask(w, h, 0.3 + 0.6 * rng.uniform(), seed + 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (frame == FrameBoundary::Reject && (x == 0 || y == 0 || x == w - 1 || y == h - 1))
                region.set(x, y, false);
    region.set(w / 2, h / 2, true);
    if (frame == FrameBoundary::Neumann)
        region.set(0, 0, false);
    return {oracle::random_image(w, h, seed + 2), oracle::random_image(w, h, seed + 3), region, frame};
}

double max_diff_to_oracle(const RandomProblem& p, const StitchSolution& sol) {
    const auto dense = oracle::dense_poisson(p.composite, p.source, p.region);
    double worst = 0.0;
    for (std::size_t u = 0; u < dense.size(); ++u)
        for (int c = 0; c < 3; ++c)
            worst = std::max(worst, std::fabs(dense[u][c] - sol.raw[u][c]));
    return worst;
}

LabelMap halves(int w, int h) {
    std::vector<std::uint8_t> v(w * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            v[y * w + x] = x < w / 2 ? 1 : 2;
    return LabelMap::from_labels(w, h, v);
}

double seam_jump(const ImageBuffer& img) {
    const int s = img.width() / 2;
    double worst = 0.0;
    for (int y = 0; y < img.height(); ++y)
        for (int c = 0; c < 3; ++c)
            worst = std::max(worst, std::fabs(img.at(s, y, c) - img.at(s - 1, y, c)));
    return worst;
}

} // namespace

TEST_CASE("problem construction") {
    const auto img = oracle::random_image(8, 8, 1);
    BinaryMask one(8, 8);
    one.set(3, 4, true);
    const auto p1 = build_problem(img, img, one);
    CHECK(p1.unknown_count() == 1);
    CHECK(p1.dirichlet_count() == 4);
    CHECK(stencil_diagonal(p1)[0] == 4);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = random_problem(seed, FrameBoundary::Reject);
        CHECK(build_problem(p.composite, p.source, p.region).unknown_count() == p.region.pixel_count());
    }

    CHECK_ERROR_CODE(build_problem(img, img, BinaryMask(8, 8)), ErrorCode::EmptyMask);
    BinaryMask edge(8, 8);
    edge.set(0, 3, true);
    CHECK_ERROR_CODE(build_problem(img, img, edge), ErrorCode::InvalidArgument);
    CHECK_NOTHROW(build_problem(img, img, edge, FrameBoundary::Neumann));
    CHECK_ERROR_CODE(build_problem(img, ImageBuffer(7, 8), one), ErrorCode::DimensionMismatch);
    CHECK_ERROR_CODE(solve(build_problem(img, img, BinaryMask(8, 8, true), FrameBoundary::Neumann), 1e-8, 0),
                     ErrorCode::InvalidArgument);
    CHECK_ERROR_CODE(solve(p1, 0.0, 0), ErrorCode::InvalidArgument);
}

TEST_CASE("source equal to composite reproduces the composite") {
    const auto img = oracle::random_image(10, 9, 2);
    const auto region = oracle::random_mask(10, 9, 0.5, 3) & erode(full_mask(10, 9), 1);
    const auto p = build_problem(img, img, region);
    const auto sol = solve(p, 1e-10, 0);
    CHECK(sol.converged);
    for (std::size_t u = 0; u < p.unknown_count(); ++u) {
        const int px = p.pixel_of_unknown[u];
        for (int c = 0; c < 3; ++c)
            CHECK(sol.values[u][c] == doctest::Approx(img.at(px % 10, px / 10, c)).epsilon(1e-9));
    }
}

TEST_CASE("consistent boundary recovers the source") {
    const auto source = oracle::random_image(9, 9, 4);
    const auto composite = oracle::random_image(9, 9, 5);
    BinaryMask region(9, 9);
    for (int y = 2; y < 7; ++y)
        for (int x = 2; x < 7; ++x)
            region.set(x, y, true);
    auto boundary = composite;
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x)
            if (!region.at(x, y))
                for (int c = 0; c < 3; ++c)
                    boundary.at(x, y, c) = source.at(x, y, c);
    const auto p = build_problem(boundary, source, region);
    // Start the solver away from the answer by perturbing the warm start.
    auto perturbed = p;
    for (auto& v : perturbed.initial)
        v = {0.5, 0.5, 0.5};
    const auto sol = solve(perturbed, 1e-12, 0);
    CHECK(sol.converged);
    for (std::size_t u = 0; u < p.unknown_count(); ++u) {
        const int px = p.pixel_of_unknown[u];
        for (int c = 0; c < 3; ++c)
            CHECK(std::fabs(sol.raw[u][c] - source.at(px % 9, px / 9, c)) < 1e-9);
    }
}

TEST_CASE("zero guidance with constant boundary gives the constant") {
    const ImageBuffer composite(8, 8, 0.37);
    const auto source = ImageBuffer(8, 8, 0.9);
    const auto region = erode(full_mask(8, 8), 1);
    const auto sol = solve(build_problem(composite, source, region), 1e-12, 0);
    for (const auto& v : sol.raw)
        for (double x : v)
            CHECK(x == doctest::Approx(0.37).epsilon(1e-10));
}

TEST_CASE("CG matches the dense direct solve") {
    for (auto frame : {FrameBoundary::Reject, FrameBoundary::Neumann})
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            const auto p = random_problem(seed * 7 + 1, frame);
            const auto sol = solve(build_problem(p.composite, p.source, p.region, frame), 1e-12, 0);
            CHECK(sol.converged);
            CHECK(max_diff_to_oracle(p, sol) < 1e-9);
        }
}

TEST_CASE("right-hand side matches the definition") {
    const auto p = random_problem(3, FrameBoundary::Reject);
    const auto pb = build_problem(p.composite, p.source, p.region);
    const auto rhs = right_hand_side(pb);
    const int w = p.composite.width(), h = p.composite.height();
    for (std::size_t u = 0; u < pb.unknown_count(); ++u) {
        const int x = pb.pixel_of_unknown[u] % w, y = pb.pixel_of_unknown[u] / w;
        for (int c = 0; c < 3; ++c) {
            double b = 0.0;
            const int nb[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
            for (auto [qx, qy] : nb) {
                if (qx < 0 || qy < 0 || qx >= w || qy >= h)
                    continue;
                b += p.source.at(x, y, c) - p.source.at(qx, qy, c);
                if (!p.region.at(qx, qy))
                    b += p.composite.at(qx, qy, c);
            }
            CHECK(rhs[u][c] == doctest::Approx(b).epsilon(1e-12));
        }
    }
}

TEST_CASE("maximum principle, translation and mirror symmetry") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto p = random_problem(seed + 500, FrameBoundary::Reject);
        const int w = p.composite.width(), h = p.composite.height();
        for (double& v : p.composite.data())
            v *= 0.5;
        const ImageBuffer flat(w, h, 0.25);
        const auto sol = solve(build_problem(p.composite, flat, p.region), 1e-12, 0);
        double lo = 1.0, hi = 0.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (!p.region.at(x, y))
                    for (int c = 0; c < 3; ++c) {
                        lo = std::min(lo, p.composite.at(x, y, c));
                        hi = std::max(hi, p.composite.at(x, y, c));
                    }
        for (const auto& v : sol.raw)
            for (double x : v) {
                CHECK(x >= lo - 1e-10);
                CHECK(x <= hi + 1e-10);
            }

        auto shifted = p.composite;
        for (double& v : shifted.data())
            v += 0.3;
        const auto sol2 = solve(build_problem(shifted, flat, p.region), 1e-12, 0);
        for (std::size_t u = 0; u < sol.raw.size(); ++u)
            for (int c = 0; c < 3; ++c)
                CHECK(sol2.raw[u][c] == doctest::Approx(sol.raw[u][c] + 0.3).epsilon(1e-9));

        ImageBuffer mc(w, h), ms(w, h);
        BinaryMask mr(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                mr.set(w - 1 - x, y, p.region.at(x, y));
                for (int c = 0; c < 3; ++c) {
                    mc.at(w - 1 - x, y, c) = p.composite.at(x, y, c);
                    ms.at(w - 1 - x, y, c) = p.source.at(x, y, c);
                }
            }
        const auto a = build_problem(p.composite, p.source, p.region);
        const auto b = build_problem(mc, ms, mr);
        const auto sa = solve(a, 1e-12, 0), sb = solve(b, 1e-12, 0);
        for (std::size_t u = 0; u < a.unknown_count(); ++u) {
            const int px = a.pixel_of_unknown[u];
            const int mirrored = (px / w) * w + (w - 1 - px % w);
            const int v = b.unknown_of_pixel[mirrored];
            REQUIRE(v >= 0);
            for (int c = 0; c < 3; ++c)
                CHECK(std::fabs(sa.raw[u][c] - sb.raw[v][c]) < 1e-9);
        }
    }
}

TEST_CASE("iteration cap returns a flagged best iterate") {
    const auto p = random_problem(42, FrameBoundary::Reject);
    const auto pb = build_problem(p.composite, p.source, p.region);
    const auto sol = solve(pb, 1e-14, 1);
    CHECK_FALSE(sol.converged);
    CHECK(sol.iterations <= 1);
    CHECK(sol.values.size() == pb.unknown_count());
    for (const auto& v : sol.values)
        for (double x : v) {
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
        }
}

TEST_CASE("stitching leaves identical pieces and label 0 untouched") {
    const auto img = oracle::random_image(16, 16, 8);
    std::vector<std::uint8_t> v(256);
    for (int i = 0; i < 256; ++i)
        v[i] = static_cast<std::uint8_t>((i % 16) < 5 ? 0 : ((i / 16) < 8 ? 1 : 2));
    const auto labels = LabelMap::from_labels(16, 16, v);
    const std::vector<Piece> same{{1, img}, {2, img}};
    CHECK(stitch_composite(img, same, labels, StitchConfig{}) == img);

    const std::vector<Piece> other{{1, oracle::random_image(16, 16, 9)}, {2, oracle::random_image(16, 16, 10)}};
    const auto hard = compose(other, labels, img);
    const auto out = stitch_composite(hard, other, labels, StitchConfig{});
    CHECK(out != hard);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            if (labels.at(x, y) == 0)
                for (int c = 0; c < 3; ++c)
                    CHECK(out.at(x, y, c) == img.at(x, y, c));

    StitchConfig skip;
    skip.skip = {2};
    const auto partial = stitch_composite(hard, other, labels, skip);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            if (labels.at(x, y) == 2)
                for (int c = 0; c < 3; ++c)
                    CHECK(partial.at(x, y, c) == hard.at(x, y, c));

    StitchConfig off;
    off.enabled = false;
    CHECK(stitch_composite(hard, other, labels, off) == hard);

    StitchConfig tight;
    tight.tol = 1e-15;
    tight.max_iters = 1;
    try {
        stitch_composite(hard, other, labels, tight);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotConverged);
        CHECK(std::string(e.what()).find("segment 1") != std::string::npos);
    }
    CHECK_ERROR_CODE(stitch_composite(hard, std::vector<Piece>{{1, img}}, labels, StitchConfig{}),
                     ErrorCode::InvalidArgument);
}

TEST_CASE("stitching removes a constant-offset seam") {
    const int n = 32;
    ImageBuffer base(n, n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            for (int c = 0; c < 3; ++c)
                base.at(x, y, c) = 0.3 + 0.1 * std::sin(0.3 * y + c) + 0.001 * x;
    auto lifted = base;
    for (double& v : lifted.data())
        v += 0.1;
    const auto labels = halves(n, n);
    const std::vector<Piece> pieces{{1, base}, {2, lifted}};
    const auto hard = compose(pieces, labels, base);
    const auto stitched = stitch_composite(hard, pieces, labels, StitchConfig{});
    const double before = seam_jump(hard), after = seam_jump(stitched);
    CHECK(before > 0.09);
    CHECK_MESSAGE(before >= 10 * after, "before ", before, " after ", after);
}
