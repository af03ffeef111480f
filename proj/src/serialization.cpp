#include "serialization.hpp"

#include "error.hpp"

#include <fstream>
#include <string>

namespace segedit {

namespace {

template <class F>
auto guarded(const char* what, F&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidArgument, std::string(what) + ": " + e.what());
    }
}

json payload_of(const LatentCode& code) {
    if (code.space == LatentSpace::Z || code.space == LatentSpace::W)
        return code.rows.at(0);
    return code.rows;
}

LatentCode payload_from(LatentSpace space, const json& payload) {
    LatentCode code{space, {}};
    if (space == LatentSpace::Z || space == LatentSpace::W)
        code.rows.push_back(payload.get<std::vector<double>>());
    else
        code.rows = payload.get<std::vector<std::vector<double>>>();
    return code;
}

} // namespace

json code_to_json(const LatentCode& code, const ToyGenerator& gen) {
    const auto& cfg = gen.config();
    return {{"space", std::string(to_string(code.space))},
            {"payload", payload_of(code)},
            {"latent_dim", cfg.latent_dim},
            {"layer_count", cfg.layer_count},
            {"generator_seed", cfg.seed}};
}

LatentCode code_from_json(const json& j, const ToyGenerator& gen) {
    return guarded("latent code", [&] {
        const auto& cfg = gen.config();
        const auto seed = j.at("generator_seed").get<std::uint64_t>();
        if (seed != cfg.seed)
            fail(ErrorCode::SeedMismatch, "latent code was written for generator seed " + std::to_string(seed) +
                                              ", active generator has seed " + std::to_string(cfg.seed));
        if (j.at("latent_dim").get<int>() != cfg.latent_dim || j.at("layer_count").get<int>() != cfg.layer_count)
            fail(ErrorCode::DimensionMismatch, "latent code dimensions do not match the generator");
        LatentCode code = payload_from(parse_space(j.at("space").get<std::string>()), j.at("payload"));
        gen.check_code(code);
        return code;
    });
}

json weights_to_json(const TunableWeights& w) {
    return {{"final_kernel", w.final_kernel},
            {"final_bias", w.final_bias},
            {"rgb_weight", w.rgb_weight},
            {"rgb_bias", w.rgb_bias}};
}

TunableWeights weights_from_json(const json& j) {
    return guarded("fine-tuned weights", [&] {
        return TunableWeights{j.at("final_kernel").get<std::vector<double>>(), j.at("final_bias").get<std::vector<double>>(),
                              j.at("rgb_weight").get<std::vector<double>>(), j.at("rgb_bias").get<std::vector<double>>()};
    });
}

json projection_config_to_json(const ProjectionConfig& cfg) {
    return {{"space", std::string(to_string(cfg.space))},
            {"steps", cfg.steps},
            {"learning_rate", cfg.learning_rate},
            {"adam_beta1", cfg.adam_beta1},
            {"adam_beta2", cfg.adam_beta2},
            {"adam_epsilon", cfg.adam_epsilon},
            {"band_radius", cfg.band_radius},
            {"mean_latent_samples", cfg.mean_latent_samples},
            {"seed", cfg.seed}};
}

ProjectionConfig projection_config_from_json(const json& j) {
    return guarded("projection config", [&] {
        ProjectionConfig cfg;
        cfg.space = parse_space(j.at("space").get<std::string>());
        cfg.steps = j.at("steps").get<int>();
        cfg.learning_rate = j.at("learning_rate").get<double>();
        cfg.adam_beta1 = j.value("adam_beta1", cfg.adam_beta1);
        cfg.adam_beta2 = j.value("adam_beta2", cfg.adam_beta2);
        cfg.adam_epsilon = j.value("adam_epsilon", cfg.adam_epsilon);
        cfg.band_radius = j.at("band_radius").get<int>();
        cfg.mean_latent_samples = j.at("mean_latent_samples").get<int>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        return cfg;
    });
}

json projection_file_to_json(const ProjectionFile& file, const ToyGenerator& gen) {
    json segments = json::array();
    for (const auto& s : file.segments) {
        json e = {{"id", s.segment_id},
                  {"code", code_to_json(s.code, gen)},
                  {"final_loss", s.final_loss},
                  {"loss_history", s.loss_history}};
        if (s.fine_tuned_weights)
            e["fine_tuned_weights"] = weights_to_json(*s.fine_tuned_weights);
        segments.push_back(std::move(e));
    }
    return {{"generator_seed", file.generator_seed},
            {"space", std::string(to_string(file.space))},
            {"segments", std::move(segments)},
            {"config", projection_config_to_json(file.config)}};
}

ProjectionFile projection_file_from_json(const json& j, const ToyGenerator& gen) {
    return guarded("projection file", [&] {
        ProjectionFile file;
        file.generator_seed = j.at("generator_seed").get<std::uint64_t>();
        if (file.generator_seed != gen.config().seed)
            fail(ErrorCode::SeedMismatch, "projection file was written for generator seed " +
                                              std::to_string(file.generator_seed));
        file.space = parse_space(j.at("space").get<std::string>());
        file.config = projection_config_from_json(j.at("config"));
        for (const auto& e : j.at("segments")) {
            SegmentProjection s;
            s.segment_id = e.at("id").get<int>();
            s.code = code_from_json(e.at("code"), gen);
            s.final_loss = e.at("final_loss").get<double>();
            s.loss_history = e.value("loss_history", std::vector<double>{});
            if (e.contains("fine_tuned_weights"))
                s.fine_tuned_weights = weights_from_json(e.at("fine_tuned_weights"));
            file.segments.push_back(std::move(s));
        }
        return file;
    });
}

json direction_to_json(const EditDirection& d) {
    return {{"name", d.name}, {"space", std::string(to_string(d.space()))}, {"payload", payload_of(d.vector)}};
}

EditDirection direction_from_json(const json& j, const ToyGenerator& gen) {
    return guarded("edit direction", [&] {
        EditDirection d;
        d.name = j.value("name", std::string("direction"));
        d.vector = payload_from(parse_space(j.at("space").get<std::string>()), j.at("payload"));
        validate_direction(gen, d);
        return d;
    });
}

EditScript script_from_json(const json& j, const ToyGenerator& gen, const std::filesystem::path& base_dir) {
    return guarded("edit script", [&] {
        if (!j.is_array())
            fail(ErrorCode::InvalidArgument, "edit script must be a JSON array of steps");
        EditScript script;
        for (const auto& s : j) {
            EditStep step;
            const auto& seg = s.at("segments");
            if (seg.is_string()) {
                if (seg.get<std::string>() != "ALL")
                    fail(ErrorCode::InvalidArgument, "segments must be \"ALL\" or a list of ids");
            } else {
                step.segments = seg.get<std::vector<int>>();
            }
            const auto& dir = s.at("direction");
            if (dir.is_string()) {
                std::filesystem::path p = dir.get<std::string>();
                if (p.is_relative())
                    p = base_dir / p;
                step.direction = direction_from_json(read_json_file(p), gen);
            } else {
                step.direction = direction_from_json(dir, gen);
            }
            step.alpha = s.at("alpha").get<double>();
            step.reproject = s.value("reproject", true);
            script.push_back(std::move(step));
        }
        return script;
    });
}

json script_to_json(const EditScript& script) {
    json out = json::array();
    for (const auto& s : script) {
        json step = {{"direction", direction_to_json(s.direction)}, {"alpha", s.alpha}, {"reproject", s.reproject}};
        if (s.segments)
            step["segments"] = *s.segments;
        else
            step["segments"] = "ALL";
        out.push_back(std::move(step));
    }
    return out;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        fail(ErrorCode::Io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        fail(ErrorCode::Io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out)
        fail(ErrorCode::Io, "write failed for " + path.string());
}

} // namespace segedit
