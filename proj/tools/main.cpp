#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>

namespace cli {

namespace {

void add_projection_options(CLI::App* cmd, ProjectionOptions& p) {
    cmd->add_option("--space", p.space, "Latent space: W, WPlus or SSpace")->capture_default_str();
    cmd->add_option("--steps", p.steps, "Optimizer steps per projection")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--lr", p.learning_rate, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--band", p.band, "Loss band radius around each segment")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--mean-samples", p.mean_samples, "Samples for the mean-latent start")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--seed", p.seed, "Projection seed (segment k uses seed ^ k)")->capture_default_str();
}

void add_stitch_options(CLI::App* cmd, StitchOptions& s) {
    cmd->add_flag("--no-poisson", s.no_poisson, "Hard-cut composite without Poisson stitching");
    cmd->add_option("--poisson-tol", s.tol, "Relative residual tolerance of the Poisson solve")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--poisson-max-iters", s.max_iters, "Iteration cap (0: 10 x unknowns)")->capture_default_str();
}

int replay(const std::string& path) {
    const json m = json::parse(read_file(path));
    const auto argv = m.at("argv").get<std::vector<std::string>>();
    const fs::path cwd = m.at("cwd").get<std::string>();
    const json expected = m.at("outputs");
    const fs::path here = fs::current_path();
    fs::current_path(cwd);
    int code = run(argv);
    if (code == 0) {
        for (const auto& [role, entry] : expected.items()) {
            const std::string actual = sha256_file(entry.at("path").get<std::string>());
            if (actual != entry.at("sha256").get<std::string>()) {
                std::cerr << "segedit: replay mismatch for " << role << " (" << entry.at("path").get<std::string>()
                          << ")\n";
                code = 1;
            }
        }
        if (code == 0)
            std::cout << "replay reproduced " << expected.size() << " outputs\n";
    }
    fs::current_path(here);
    return code;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Segment-wise latent projection, editing and compositing with a toy generator", "segedit"};
    app.require_subcommand(1);
    app.fallthrough();
    CommonOptions common;
    app.add_option("--generator-seed", common.generator_seed, "Seed of the toy generator weights")->capture_default_str();
    app.add_option("--threads", common.threads, "Worker threads for per-segment work")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_flag("-q,--quiet", common.quiet, "Suppress the summary on stdout");

    ProjectArgs pa;
    auto* project = app.add_subcommand("project", "Project an image per segment (or globally) into latent codes");
    project->add_option("--image", pa.image, "Target image (PNG)")->required()->check(CLI::ExistingFile);
    project->add_option("--labels", pa.labels, "Label map (grayscale PNG)")->check(CLI::ExistingFile);
    project->add_option("--out", pa.out, "Output directory")->required();
    project->add_flag("--global", pa.global, "Single whole-frame code (reported as segment 0)");
    project->add_flag("--finetune", pa.finetune, "Fine-tune the final layers per segment after projection");
    project->add_option("--finetune-steps", pa.finetune_steps, "Fine-tuning steps")->capture_default_str()->check(CLI::NonNegativeNumber);
    project->add_option("--finetune-lr", pa.finetune_lr, "Fine-tuning learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    add_projection_options(project, pa.proj);
    add_stitch_options(project, pa.stitch);

    EditArgs ea;
    auto* edit = app.add_subcommand("edit", "Apply latent edits to segments and recomposite");
    edit->add_option("--image", ea.image, "Input image (PNG)")->required()->check(CLI::ExistingFile);
    edit->add_option("--labels", ea.labels, "Label map (grayscale PNG)")->required()->check(CLI::ExistingFile);
    edit->add_option("--codes", ea.codes, "Projection JSON to use instead of projecting")->check(CLI::ExistingFile);
    edit->add_option("--script", ea.script, "Edit script (JSON array of steps)")->check(CLI::ExistingFile);
    edit->add_option("--direction", ea.direction, "Direction JSON {name, space, payload}")->check(CLI::ExistingFile);
    edit->add_option("--alpha", ea.alpha, "Edit strength");
    edit->add_option("--segments", ea.segments, "ALL or comma-separated segment ids")->capture_default_str();
    edit->add_flag("--reproject", ea.reproject, "Reproject segments even when --codes is given");
    edit->add_option("--out", ea.out, "Output directory")->required();
    add_projection_options(edit, ea.proj);
    add_stitch_options(edit, ea.stitch);

    RefineArgs ra;
    auto* refine = app.add_subcommand("refine", "Grow one segment's boundary with a level-set evolution");
    refine->add_option("--image", ra.image, "Original image (PNG)")->required()->check(CLI::ExistingFile);
    refine->add_option("--labels", ra.labels, "Label map (grayscale PNG)")->required()->check(CLI::ExistingFile);
    refine->add_option("--segment", ra.segment, "Segment id to refine")->required();
    refine->add_option("--rendered", ra.rendered, "Rendering of the segment's code (PNG)")->check(CLI::ExistingFile);
    refine->add_option("--codes", ra.codes, "Projection JSON to render the segment from")->check(CLI::ExistingFile);
    refine->add_option("--dt", ra.dt, "Time step")->capture_default_str();
    refine->add_option("--iters", ra.iterations, "Iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
    refine->add_option("--smooth", ra.smooth, "Box-blur radius of the stopping function")->capture_default_str()->check(CLI::NonNegativeNumber);
    refine->add_option("--max-growth", ra.max_growth, "Maximum growth distance in pixels")->capture_default_str()->check(CLI::NonNegativeNumber);
    refine->add_option("--reinit", ra.reinit, "Re-initialisation interval (0 disables)")->capture_default_str()->check(CLI::NonNegativeNumber);
    refine->add_option("--out", ra.out, "Output directory")->required();
    add_projection_options(refine, ra.proj);
    refine->get_option("--rendered")->excludes("--codes");

    CompareArgs ca;
    auto* compare = app.add_subcommand("compare", "Segmented vs global projection over several seeds");
    compare->add_option("--image", ca.image, "Fixed target (default: a synthetic target per seed)")->check(CLI::ExistingFile);
    compare->add_option("--labels", ca.labels, "Label map (grayscale PNG)")->required()->check(CLI::ExistingFile);
    compare->add_option("--seeds", ca.seeds, "Seeds, space or comma separated")->required()->delimiter(',');
    compare->add_option("--out", ca.out, "Output directory")->required();
    add_projection_options(compare, ca.proj);
    add_stitch_options(compare, ca.stitch);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Write a demo label map, target image and edit direction");
    synth->add_option("--out", sa.out, "Output directory")->required();
    synth->add_option("--labels", sa.labels, "Use this label map instead of a built-in layout")->check(CLI::ExistingFile);
    synth->add_option("--layout", sa.layout, "quadrants, stripes or framed")->capture_default_str();
    synth->add_option("--seed", sa.seed, "Seed of the target codes and the direction")->capture_default_str();
    synth->add_option("--direction-space", sa.direction_space, "Space of the random direction")->capture_default_str();

    ServeArgs sv;
    auto* serve = app.add_subcommand("serve", "Run the HTTP API for the interactive editor");
    serve->add_option("--port", sv.port, "Port (0 picks a free one)")->capture_default_str();
    serve->add_option("--host", sv.host, "Bind address")->capture_default_str();
    serve->add_option("--image", sv.image, "Image to edit (PNG)")->check(CLI::ExistingFile);
    serve->add_option("--labels", sv.labels, "Initial label map (default: one segment)")->check(CLI::ExistingFile);
    serve->add_option("--state-dir", sv.state_dir, "Session directory (default: $SEGEDIT_STATE_DIR)");

    std::string manifest_path;
    auto* rep = app.add_subcommand("replay", "Re-run a manifest and verify its outputs");
    rep->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }

    try {
        if (*project)
            return cmd_project(pa, common, args);
        if (*edit)
            return cmd_edit(ea, common, args);
        if (*refine)
            return cmd_refine(ra, common, args);
        if (*compare)
            return cmd_compare(ca, common, args);
        if (*synth)
            return cmd_synth(sa, common, args);
        if (*serve)
            return cmd_serve(sv, common);
        if (*rep)
            return replay(manifest_path);
    } catch (const UsageError& e) {
        std::cerr << "segedit: " << e.what() << "\n";
        return 2;
    } catch (const RuntimeError& e) {
        std::cerr << "segedit: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "segedit: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace cli

int main(int argc, char** argv) {
    return cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
