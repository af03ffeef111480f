#pragma once

#include "common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cli {

struct ProjectionOptions {
    std::string space = "W";
    int steps = 200;
    double learning_rate = 0.05;
    int band = 3;
    int mean_samples = 1000;
    std::uint64_t seed = 0;
};

struct StitchOptions {
    bool no_poisson = false;
    double tol = 1e-8;
    int max_iters = 0;
};

struct CommonOptions {
    std::uint64_t generator_seed = 1;
    int threads = 1;
    bool quiet = false;
};

struct ProjectArgs {
    std::string image, labels, out;
    bool global = false;
    bool finetune = false;
    int finetune_steps = 100;
    double finetune_lr = 0.005;
    ProjectionOptions proj;
    StitchOptions stitch;
};

struct EditArgs {
    std::string image, labels, codes, script, direction, out;
    std::optional<double> alpha;
    std::string segments = "ALL";
    bool reproject = false;
    ProjectionOptions proj;
    StitchOptions stitch;
};

struct RefineArgs {
    std::string image, labels, rendered, codes, out;
    int segment = 0;
    double dt = 0.5;
    int iterations = 40;
    int smooth = 1;
    int max_growth = 8;
    int reinit = 20;
    ProjectionOptions proj;
};

struct CompareArgs {
    std::string image, labels, out;
    std::vector<std::uint64_t> seeds;
    ProjectionOptions proj;
    StitchOptions stitch;
};

struct SynthArgs {
    std::string out, labels, layout = "quadrants";
    std::uint64_t seed = 0;
    std::string direction_space = "W";
};

struct ServeArgs {
    std::string image, labels, state_dir, host = "127.0.0.1";
    int port = 8080;
};

int cmd_project(const ProjectArgs& a, const CommonOptions& c, const std::vector<std::string>& argv);
int cmd_edit(const EditArgs& a, const CommonOptions& c, const std::vector<std::string>& argv);
int cmd_refine(const RefineArgs& a, const CommonOptions& c, const std::vector<std::string>& argv);
int cmd_compare(const CompareArgs& a, const CommonOptions& c, const std::vector<std::string>& argv);
int cmd_synth(const SynthArgs& a, const CommonOptions& c, const std::vector<std::string>& argv);
int cmd_serve(const ServeArgs& a, const CommonOptions& c);

segedit_projection_config projection_config(const ProjectionOptions& p, int threads);
segedit_stitch_config stitch_config(const StitchOptions& s);
json projection_options_json(const ProjectionOptions& p);

// Parses and runs a full command line (argv[0] excluded). Returns the exit code.
int run(const std::vector<std::string>& args);

} // namespace cli
