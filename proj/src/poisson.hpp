#pragma once

#include "image.hpp"

#include <array>
#include <set>
#include <vector>

namespace segedit {

// How pixels of the region that sit on the image frame are treated.
//   Reject : the region must keep a 1-pixel margin from the frame.
//   Neumann: neighbours beyond the frame are dropped from the stencil, so
//            the frame is a natural (zero-flux) boundary.
enum class FrameBoundary { Reject, Neumann };

// Discrete Poisson problem over region Omega for seamless cloning:
//   |N_p| f_p - sum_{q in N_p, q in Omega} f_q
//       = sum_{q in N_p, q not in Omega} boundary_q + sum_{q in N_p} (s_p - s_q)
// where s is the guidance source and N_p the in-frame 4-neighbours.
struct StitchProblem {
    int width = 0;
    int height = 0;
    BinaryMask region;
    ImageBuffer boundary;                 // Dirichlet values read outside Omega
    std::vector<double> guidance_x;       // forward differences of the source, 3 per pixel
    std::vector<double> guidance_y;
    std::vector<int> unknown_of_pixel;    // -1 outside Omega
    std::vector<int> pixel_of_unknown;
    std::vector<std::array<double, 3>> initial;  // source values on Omega

    std::size_t unknown_count() const { return pixel_of_unknown.size(); }
    // Number of Dirichlet couplings; zero means the system is singular under Neumann frames.
    std::size_t dirichlet_count() const;
};

StitchProblem build_problem(const ImageBuffer& composite, const ImageBuffer& source, const BinaryMask& region,
                            FrameBoundary frame = FrameBoundary::Reject);

// Assembled right-hand side, one row per unknown.
std::vector<std::array<double, 3>> right_hand_side(const StitchProblem& problem);
// Diagonal entry (in-frame neighbour count) of each unknown.
std::vector<int> stencil_diagonal(const StitchProblem& problem);

struct StitchSolution {
    std::vector<std::array<double, 3>> raw;     // unclamped CG iterate
    std::vector<std::array<double, 3>> values;  // raw clamped to [0, 1]
    bool converged = false;
    int iterations = 0;                         // max over channels
    double relative_residual = 0.0;             // max over channels
};

// Jacobi-preconditioned conjugate gradient per channel, warm-started from
// the source values; stops when ||r|| <= tol * ||b||. max_iters <= 0 means
// 10 x unknowns. A non-converged result carries the lowest-residual iterate.
StitchSolution solve(const StitchProblem& problem, double tol, int max_iters);

struct StitchConfig {
    bool enabled = true;
    double tol = 1e-8;
    int max_iters = 0;
    FrameBoundary frame = FrameBoundary::Neumann;
    std::set<int> skip;  // segment ids left as hard cuts
};

// Sweeps segments in ascending id; each region is solved against the
// running composite with its piece as guidance. Label-0 pixels are never
// written. Throws NotConverged tagged with the segment id.
ImageBuffer stitch_composite(const ImageBuffer& composite, std::span<const Piece> pieces, const LabelMap& labels,
                             const StitchConfig& cfg);

} // namespace segedit
