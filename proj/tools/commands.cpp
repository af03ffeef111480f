#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>

namespace cli {

segedit_projection_config projection_config(const ProjectionOptions& p, int threads) {
    segedit_projection_config cfg;
    segedit_projection_config_default(&cfg);
    check(segedit_space_parse(p.space.c_str(), &cfg.space), "--space");
    cfg.steps = p.steps;
    cfg.learning_rate = p.learning_rate;
    cfg.band_radius = p.band;
    cfg.mean_latent_samples = p.mean_samples;
    cfg.seed = p.seed;
    cfg.threads = threads;
    return cfg;
}

segedit_stitch_config stitch_config(const StitchOptions& s) {
    segedit_stitch_config cfg;
    segedit_stitch_config_default(&cfg);
    cfg.enabled = s.no_poisson ? 0 : 1;
    cfg.tol = s.tol;
    cfg.max_iters = s.max_iters;
    return cfg;
}

json projection_options_json(const ProjectionOptions& p) {
    return {{"space", p.space},
            {"steps", p.steps},
            {"learning_rate", p.learning_rate},
            {"band_radius", p.band},
            {"mean_latent_samples", p.mean_samples},
            {"seed", p.seed}};
}

namespace {

json stitch_json(const StitchOptions& s) {
    return {{"poisson", !s.no_poisson}, {"tol", s.tol}, {"max_iters", s.max_iters}};
}

Labels require_labels(const std::string& path, const segedit_image* img) {
    if (path.empty())
        throw UsageError("--labels is required");
    return load_labels(path, segedit_image_width(img), segedit_image_height(img));
}

Projections run_projection(const segedit_generator* gen, const segedit_image* target, const segedit_labels* labels,
                           const segedit_projection_config& cfg) {
    segedit_projections* p = nullptr;
    if (labels)
        check(segedit_project(gen, target, labels, &cfg, nullptr, nullptr, &p), "projection");
    else
        check(segedit_project_global(gen, target, &cfg, nullptr, nullptr, &p), "global projection");
    return Projections(p);
}

Image reconstruct(const segedit_generator* gen, const segedit_projections* p, const segedit_labels* labels,
                  const segedit_image* original, const segedit_stitch_config& stitch) {
    segedit_image* out = nullptr;
    check(segedit_reconstruct(gen, p, labels, original, &stitch, &out), "reconstruction");
    return Image(out);
}

std::optional<size_t> index_of_segment(const segedit_projections* p, int k) {
    for (size_t i = 0; i < segedit_projections_count(p); ++i)
        if (segedit_projections_segment_id(p, i) == k)
            return i;
    return std::nullopt;
}

std::string losses_csv(const segedit_projections* p) {
    std::string csv = "segment,step,loss\n";
    for (size_t i = 0; i < segedit_projections_count(p); ++i) {
        const double* values = nullptr;
        size_t count = 0;
        check(segedit_projections_loss_history(p, i, &values, &count), "loss history");
        const std::string id = std::to_string(segedit_projections_segment_id(p, i));
        for (size_t s = 0; s < count; ++s)
            csv += id + "," + std::to_string(s) + "," + format_double(values[s]) + "\n";
    }
    return csv;
}

// Pixels of segment k that touch a pixel of another label.
std::vector<bool> segment_outline(const std::uint8_t* labels, int w, int h, int k) {
    std::vector<bool> out(static_cast<size_t>(w) * h, false);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (labels[y * w + x] != k)
                continue;
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int i = 0; i < 4; ++i)
                if (nx[i] >= 0 && ny[i] >= 0 && nx[i] < w && ny[i] < h && labels[ny[i] * w + nx[i]] != k)
                    out[y * w + x] = true;
        }
    return out;
}

} // namespace

int cmd_project(const ProjectArgs& a, const CommonOptions& c, const std::vector<std::string>& argv) {
    Manifest manifest("project", argv);
    const Generator gen = make_generator(c.generator_seed);
    const Image img = load_image(a.image);
    Labels labels;
    if (!a.global || !a.labels.empty())
        labels = require_labels(a.labels, img.get());
    const auto cfg = projection_config(a.proj, c.threads);
    const auto stitch = stitch_config(a.stitch);

    Projections proj = run_projection(gen.get(), img.get(), a.global ? nullptr : labels.get(), cfg);
    if (a.finetune) {
        segedit_finetune_config ft;
        segedit_finetune_config_default(&ft);
        ft.steps = a.finetune_steps;
        ft.learning_rate = a.finetune_lr;
        ft.band_radius = a.proj.band;
        ft.threads = c.threads;
        segedit_projections* tuned = nullptr;
        check(segedit_finetune(gen.get(), proj.get(), img.get(), labels.get(), &ft, &tuned), "fine-tuning");
        proj.reset(tuned);
    }
    const Image rec = reconstruct(gen.get(), proj.get(), labels.get(), img.get(), stitch);

    const fs::path out = a.out;
    ensure_directory(out);
    write_file(out / "projection.json", projections_json(gen.get(), proj.get()) + "\n");
    save_image(rec.get(), (out / "reconstruction.png").string());
    write_file(out / "losses.csv", losses_csv(proj.get()));

    manifest.generator_seed(c.generator_seed);
    manifest.config("projection", projection_options_json(a.proj));
    manifest.config("stitch", stitch_json(a.stitch));
    manifest.config("global", a.global);
    manifest.config("finetune", a.finetune ? json{{"steps", a.finetune_steps}, {"learning_rate", a.finetune_lr}}
                                           : json(nullptr));
    manifest.input("image", a.image);
    if (labels)
        manifest.input("labels", a.labels);
    manifest.output("projection", out / "projection.json");
    manifest.output("reconstruction", out / "reconstruction.png");
    manifest.output("losses", out / "losses.csv");
    manifest.write(out / "manifest.json");

    if (!c.quiet) {
        for (size_t i = 0; i < segedit_projections_count(proj.get()); ++i)
            std::cout << "segment " << segedit_projections_segment_id(proj.get(), i)
                      << " final_loss " << format_double(segedit_projections_final_loss(proj.get(), i)) << "\n";
        std::cout << "wrote " << (out / "reconstruction.png").string() << "\n";
    }
    return 0;
}

int cmd_edit(const EditArgs& a, const CommonOptions& c, const std::vector<std::string>& argv) {
    if (a.script.empty() == a.direction.empty())
        throw UsageError("give exactly one of --script or --direction");
    if (!a.direction.empty() && !a.alpha)
        throw UsageError("--direction requires --alpha");
    if (!a.script.empty() && a.alpha)
        throw UsageError("--alpha applies only to --direction; scripts carry their own alphas");
    const auto segments = parse_segments(a.segments);

    Manifest manifest("edit", argv);
    const Generator gen = make_generator(c.generator_seed);
    const Image img = load_image(a.image);
    const Labels labels = require_labels(a.labels, img.get());

    Projections codes;
    if (!a.codes.empty())
        codes = projections_from_json(gen.get(), read_file(a.codes), a.codes);

    Script script;
    if (!a.script.empty()) {
        const std::string base = fs::path(a.script).parent_path().string();
        segedit_script* s = nullptr;
        check(segedit_script_from_json(gen.get(), read_file(a.script).c_str(), base.empty() ? "." : base.c_str(), &s),
              a.script);
        script.reset(s);
    } else {
        segedit_direction* d = nullptr;
        check(segedit_direction_from_json(gen.get(), read_file(a.direction).c_str(), &d), a.direction);
        const Direction dir(d);
        // Cached codes are edited as they are unless asked to reproject.
        const bool reproject = codes == nullptr || a.reproject;
        segedit_script* s = nullptr;
        check(segedit_script_single(dir.get(), segments ? segments->data() : nullptr, segments ? segments->size() : 0,
                                    *a.alpha, reproject ? 1 : 0, &s),
              "edit");
        script.reset(s);
    }

    const auto cfg = projection_config(a.proj, c.threads);
    const auto stitch = stitch_config(a.stitch);
    segedit_edit_options opts;
    segedit_edit_options_default(&opts);
    opts.threads = c.threads;
    opts.quantize_between_steps = 1;

    segedit_projections* cache = codes.release();
    segedit_image* edited = nullptr;
    const segedit_status st = segedit_edit_incremental(gen.get(), img.get(), labels.get(), script.get(), &cfg, &stitch,
                                                       &opts, &cache, nullptr, nullptr, &edited);
    codes.reset(cache);
    check(st, "edit");
    const Image result(edited);

    const fs::path out = a.out;
    ensure_directory(out);
    save_image(result.get(), (out / "edited.png").string());
    write_file(out / "codes.json", projections_json(gen.get(), codes.get()) + "\n");

    manifest.generator_seed(c.generator_seed);
    manifest.config("projection", projection_options_json(a.proj));
    manifest.config("stitch", stitch_json(a.stitch));
    if (a.script.empty()) {
        manifest.config("alpha", *a.alpha);
        manifest.config("segments", a.segments);
        manifest.config("reproject", a.codes.empty() || a.reproject);
    }
    manifest.input("image", a.image);
    manifest.input("labels", a.labels);
    if (!a.codes.empty())
        manifest.input("codes", a.codes);
    if (!a.script.empty())
        manifest.input("script", a.script);
    else
        manifest.input("direction", a.direction);
    manifest.output("edited", out / "edited.png");
    manifest.output("codes", out / "codes.json");
    manifest.write(out / "manifest.json");
    if (!c.quiet)
        std::cout << "wrote " << (out / "edited.png").string() << "\n";
    return 0;
}

int cmd_refine(const RefineArgs& a, const CommonOptions& c, const std::vector<std::string>& argv) {
    if (a.segment < 1)
        throw UsageError("--segment must be a positive segment id");
    Manifest manifest("refine", argv);
    const Generator gen = make_generator(c.generator_seed);
    const Image img = load_image(a.image);
    const Labels labels = require_labels(a.labels, img.get());
    const int w = segedit_image_width(img.get()), h = segedit_image_height(img.get());

    Image rendered;
    if (!a.rendered.empty()) {
        rendered = load_image(a.rendered);
    } else {
        Projections proj;
        if (!a.codes.empty())
            proj = projections_from_json(gen.get(), read_file(a.codes), a.codes);
        else
            proj = run_projection(gen.get(), img.get(), labels.get(), projection_config(a.proj, c.threads));
        const auto index = index_of_segment(proj.get(), a.segment);
        if (!index)
            throw RuntimeError(SEGEDIT_ERR_OUT_OF_RANGE, "no code for segment " + std::to_string(a.segment));
        segedit_image* r = nullptr;
        check(segedit_projections_render(gen.get(), proj.get(), *index, &r), "render");
        rendered.reset(r);
    }

    segedit_refine_params params;
    segedit_refine_params_default(&params);
    params.dt = a.dt;
    params.iterations = a.iterations;
    params.smooth_radius = a.smooth;
    params.max_growth = a.max_growth;
    params.reinit_interval = a.reinit;
    segedit_labels* refined_raw = nullptr;
    segedit_image* speed_raw = nullptr;
    check(segedit_refine(labels.get(), a.segment, img.get(), rendered.get(), &params, &refined_raw, &speed_raw),
          "refine");
    const Labels refined(refined_raw);
    const Image speed(speed_raw);

    const fs::path out = a.out;
    ensure_directory(out);
    check(segedit_labels_save(refined.get(), (out / "refined_labels.png").string().c_str()), "save labels");
    // The written map must load back as a valid partition.
    const Labels reloaded = load_labels((out / "refined_labels.png").string(), w, h);

    const auto before = segment_outline(segedit_labels_data(labels.get()), w, h, a.segment);
    const auto after = segment_outline(segedit_labels_data(reloaded.get()), w, h, a.segment);
    const double* src = segedit_image_data(img.get());
    std::vector<double> overlay(src, src + static_cast<size_t>(w) * h * 3);
    for (size_t p = 0; p < before.size(); ++p) {
        if (before[p]) {
            overlay[p * 3] = 1.0;
            overlay[p * 3 + 1] = 0.0;
            overlay[p * 3 + 2] = 0.0;
        }
        if (after[p]) {
            overlay[p * 3] = 1.0;
            overlay[p * 3 + 1] = 1.0;
            overlay[p * 3 + 2] = 0.0;
        }
    }
    segedit_image* ov = nullptr;
    check(segedit_image_create(w, h, overlay.data(), &ov), "overlay");
    const Image overlay_img(ov);
    save_image(overlay_img.get(), (out / "overlay.png").string());
    save_image(speed.get(), (out / "speed.png").string());

    size_t before_count = 0, after_count = 0;
    for (int i = 0; i < w * h; ++i) {
        before_count += segedit_labels_data(labels.get())[i] == a.segment;
        after_count += segedit_labels_data(reloaded.get())[i] == a.segment;
    }

    manifest.generator_seed(c.generator_seed);
    manifest.config("segment", a.segment);
    manifest.config("dt", a.dt);
    manifest.config("iterations", a.iterations);
    manifest.config("smooth_radius", a.smooth);
    manifest.config("max_growth", a.max_growth);
    manifest.config("reinit_interval", a.reinit);
    if (a.rendered.empty() && a.codes.empty())
        manifest.config("projection", projection_options_json(a.proj));
    manifest.input("image", a.image);
    manifest.input("labels", a.labels);
    if (!a.rendered.empty())
        manifest.input("rendered", a.rendered);
    if (!a.codes.empty())
        manifest.input("codes", a.codes);
    manifest.output("refined_labels", out / "refined_labels.png");
    manifest.output("overlay", out / "overlay.png");
    manifest.output("speed", out / "speed.png");
    manifest.write(out / "manifest.json");
    if (!c.quiet)
        std::cout << "segment " << a.segment << ": " << before_count << " -> " << after_count << " pixels\n";
    return 0;
}

int cmd_compare(const CompareArgs& a, const CommonOptions& c, const std::vector<std::string>& argv) {
    if (a.seeds.empty())
        throw UsageError("--seeds needs at least one seed");
    Manifest manifest("compare", argv);
    const Generator gen = make_generator(c.generator_seed);
    const int size = segedit_generator_output_size(gen.get());
    Image fixed;
    if (!a.image.empty())
        fixed = load_image(a.image);
    if (a.labels.empty())
        throw UsageError("--labels is required");
    const Labels labels = fixed ? require_labels(a.labels, fixed.get()) : load_labels(a.labels, size, size);
    const auto stitch = stitch_config(a.stitch);

    std::string csv = "seed,mse_segmented,mse_global\n";
    std::string table = "| seed | mse_segmented | mse_global | winner |\n|---:|---:|---:|:---|\n";
    int wins = 0;
    for (std::uint64_t seed : a.seeds) {
        Image target;
        if (fixed) {
            segedit_image* t = nullptr;
            check(segedit_image_create(segedit_image_width(fixed.get()), segedit_image_height(fixed.get()),
                                       segedit_image_data(fixed.get()), &t),
                  "target");
            target.reset(t);
        } else {
            segedit_image* t = nullptr;
            check(segedit_synthesize_demo(gen.get(), labels.get(), seed, &t), "demo target");
            target.reset(t);
        }
        auto cfg = projection_config(a.proj, c.threads);
        cfg.seed = seed;
        const Projections seg = run_projection(gen.get(), target.get(), labels.get(), cfg);
        const Projections glob = run_projection(gen.get(), target.get(), nullptr, cfg);
        const Image seg_rec = reconstruct(gen.get(), seg.get(), labels.get(), target.get(), stitch);
        const Image glob_rec = reconstruct(gen.get(), glob.get(), labels.get(), target.get(), stitch);
        double mse_seg = 0.0, mse_glob = 0.0;
        check(segedit_image_mse(seg_rec.get(), target.get(), &mse_seg), "mse");
        check(segedit_image_mse(glob_rec.get(), target.get(), &mse_glob), "mse");
        const bool win = mse_seg < mse_glob;
        wins += win;
        csv += std::to_string(seed) + "," + format_double(mse_seg) + "," + format_double(mse_glob) + "\n";
        table += "| " + std::to_string(seed) + " | " + format_double(mse_seg) + " | " + format_double(mse_glob) +
                 " | " + (win ? "segmented" : "global") + " |\n";
    }
    const size_t n = a.seeds.size();
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.2f", static_cast<double>(wins) / static_cast<double>(n));
    std::string summary = "# Segmented vs global projection\n\n";
    summary += "Space " + a.proj.space + ", " + std::to_string(a.proj.steps) + " steps per projection, Poisson " +
               (a.stitch.no_poisson ? "off" : "on") + ", targets " +
               (fixed ? "from " + a.image : std::string("synthesized per seed")) + ".\n\n";
    summary += table;
    summary += "\nSegmented projection wins on " + std::to_string(wins) + " of " + std::to_string(n) +
               " seeds (win rate " + rate + ").\n";

    const fs::path out = a.out;
    ensure_directory(out);
    write_file(out / "compare.csv", csv);
    write_file(out / "summary.md", summary);

    manifest.generator_seed(c.generator_seed);
    manifest.config("projection", projection_options_json(a.proj));
    manifest.config("stitch", stitch_json(a.stitch));
    manifest.config("seeds", a.seeds);
    if (fixed)
        manifest.input("image", a.image);
    manifest.input("labels", a.labels);
    manifest.output("csv", out / "compare.csv");
    manifest.output("summary", out / "summary.md");
    manifest.write(out / "manifest.json");
    if (!c.quiet)
        std::cout << "segmented wins " << wins << "/" << n << "\n";
    return 0;
}

int cmd_synth(const SynthArgs& a, const CommonOptions& c, const std::vector<std::string>& argv) {
    Manifest manifest("synth", argv);
    const Generator gen = make_generator(c.generator_seed);
    const int s = segedit_generator_output_size(gen.get());
    Labels labels;
    if (!a.labels.empty()) {
        labels = load_labels(a.labels, s, s);
    } else {
        std::vector<std::uint8_t> map(static_cast<size_t>(s) * s, 0);
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                std::uint8_t v = 0;
                if (a.layout == "quadrants")
                    v = static_cast<std::uint8_t>(1 + (x >= s / 2) + 2 * (y >= s / 2));
                else if (a.layout == "stripes")
                    v = static_cast<std::uint8_t>(1 + std::min(3, 4 * x / s));
                else if (a.layout == "framed")
                    v = (x < 2 || y < 2 || x >= s - 2 || y >= s - 2)
                            ? 0
                            : static_cast<std::uint8_t>(1 + (x >= s / 2) + 2 * (y >= s / 2));
                else
                    throw UsageError("--layout must be quadrants, stripes or framed");
                map[static_cast<size_t>(y) * s + x] = v;
            }
        segedit_labels* l = nullptr;
        check(segedit_labels_create(s, s, map.data(), &l), "labels");
        labels.reset(l);
    }
    segedit_image* t = nullptr;
    check(segedit_synthesize_demo(gen.get(), labels.get(), a.seed, &t), "demo target");
    const Image target(t);
    segedit_space space;
    check(segedit_space_parse(a.direction_space.c_str(), &space), "--direction-space");
    segedit_direction* d = nullptr;
    check(segedit_direction_random(gen.get(), space, a.seed, "random", &d), "direction");
    const Direction dir(d);
    char* dj = nullptr;
    check(segedit_direction_to_json(dir.get(), &dj), "direction");

    const fs::path out = a.out;
    ensure_directory(out);
    check(segedit_labels_save(labels.get(), (out / "labels.png").string().c_str()), "save labels");
    save_image(target.get(), (out / "target.png").string());
    write_file(out / "direction.json", take_string(dj) + "\n");

    manifest.generator_seed(c.generator_seed);
    manifest.config("seed", a.seed);
    manifest.config("layout", a.labels.empty() ? a.layout : "file");
    manifest.config("direction_space", a.direction_space);
    if (!a.labels.empty())
        manifest.input("labels", a.labels);
    manifest.output("labels", out / "labels.png");
    manifest.output("target", out / "target.png");
    manifest.output("direction", out / "direction.json");
    manifest.write(out / "manifest.json");
    if (!c.quiet)
        std::cout << "wrote " << out.string() << "\n";
    return 0;
}

} // namespace cli
