#pragma once

#include "editing.hpp"
#include "generator.hpp"
#include "projection.hpp"

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace segedit {

using json = nlohmann::json;

// {space, payload, latent_dim, layer_count, generator_seed}
json code_to_json(const LatentCode& code, const ToyGenerator& gen);
// Refuses codes written for a generator with a different seed.
LatentCode code_from_json(const json& j, const ToyGenerator& gen);

json weights_to_json(const TunableWeights& w);
TunableWeights weights_from_json(const json& j);

json projection_config_to_json(const ProjectionConfig& cfg);
ProjectionConfig projection_config_from_json(const json& j);

// {generator_seed, space, segments: [{id, code, final_loss, ...}], config}
struct ProjectionFile {
    std::uint64_t generator_seed = 0;
    LatentSpace space = LatentSpace::W;
    ProjectionConfig config;
    std::vector<SegmentProjection> segments;
};

json projection_file_to_json(const ProjectionFile& file, const ToyGenerator& gen);
ProjectionFile projection_file_from_json(const json& j, const ToyGenerator& gen);

// {name, space, payload}
json direction_to_json(const EditDirection& d);
EditDirection direction_from_json(const json& j, const ToyGenerator& gen);

// Array of {segments: "ALL" | [ids], direction: {...} | "path", alpha, reproject}.
// Relative direction paths resolve against base_dir.
EditScript script_from_json(const json& j, const ToyGenerator& gen, const std::filesystem::path& base_dir);
json script_to_json(const EditScript& script);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const json& j, const std::filesystem::path& path);

} // namespace segedit
