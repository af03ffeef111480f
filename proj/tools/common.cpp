#include "common.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

namespace cli {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw RuntimeError(SEGEDIT_ERR_IO, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out)
        throw RuntimeError(SEGEDIT_ERR_IO, "cannot write " + path.string());
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& data) {
    write_file(path, std::string(data.begin(), data.end()));
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw RuntimeError(SEGEDIT_ERR_INTERNAL, "SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string sha256_file(const fs::path& path) {
    return sha256_hex(read_file(path));
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc())
        throw RuntimeError(SEGEDIT_ERR_INTERNAL, "number formatting failed");
    return {buf, end};
}

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw RuntimeError(SEGEDIT_ERR_IO, "cannot create directory " + dir.string());
}

Manifest::Manifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)), cwd_(fs::current_path().string()),
      start_(std::chrono::steady_clock::now()) {}

void Manifest::input(const std::string& role, const fs::path& path) {
    inputs_[role] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
}

void Manifest::output(const std::string& role, const fs::path& path) {
    outputs_[role] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
}

void Manifest::write(const fs::path& path) const {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json j = {{"command", command_},
              {"argv", argv_},
              {"cwd", cwd_},
              {"version", segedit_version()},
              {"generator_seed", seed_},
              {"config", config_},
              {"inputs", inputs_},
              {"outputs", outputs_},
              {"wall_time_seconds", seconds}};
    write_file(path, j.dump(2) + "\n");
}

std::optional<std::vector<int>> parse_segments(const std::string& text) {
    if (text == "ALL" || text == "all")
        return std::nullopt;
    std::vector<int> ids;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        int v = 0;
        auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || end != item.data() + item.size() || v < 1)
            throw UsageError("--segments expects ALL or a comma-separated list of positive ids, got '" + text + "'");
        ids.push_back(v);
    }
    if (ids.empty())
        throw UsageError("--segments is empty");
    return ids;
}

} // namespace cli
