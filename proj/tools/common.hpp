#pragma once

#include "handles.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, const std::string& data);
void write_file(const fs::path& path, const std::vector<std::uint8_t>& data);
std::string sha256_hex(const std::string& data);
std::string sha256_file(const fs::path& path);

// Shortest round-trip decimal form, '.' as separator.
std::string format_double(double v);

void ensure_directory(const fs::path& dir);

// Record of one command run. Written next to the outputs; `segedit replay`
// re-executes argv and checks the output hashes.
class Manifest {
public:
    Manifest(std::string command, std::vector<std::string> argv);

    void config(const std::string& key, json value) { config_[key] = std::move(value); }
    void input(const std::string& role, const fs::path& path);
    void output(const std::string& role, const fs::path& path);
    void generator_seed(std::uint64_t seed) { seed_ = seed; }
    void write(const fs::path& path) const;

private:
    std::string command_;
    std::vector<std::string> argv_;
    std::string cwd_;
    json config_ = json::object();
    json inputs_ = json::object();
    json outputs_ = json::object();
    std::uint64_t seed_ = 0;
    std::chrono::steady_clock::time_point start_;
};

// Parses "ALL" or a comma-separated list of ids; ALL yields an empty optional.
std::optional<std::vector<int>> parse_segments(const std::string& text);

} // namespace cli
