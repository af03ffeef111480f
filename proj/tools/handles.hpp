#pragma once

#include <segedit/segedit.h>

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace cli {

// Library failure; maps to exit code 1.
class RuntimeError : public std::runtime_error {
public:
    RuntimeError(segedit_status status, const std::string& what) : std::runtime_error(what), status_(status) {}
    segedit_status status() const noexcept { return status_; }

private:
    segedit_status status_;
};

// Bad command line discovered after parsing; maps to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void check(segedit_status status, const std::string& context = {}) {
    if (status == SEGEDIT_OK)
        return;
    std::string msg = segedit_last_error();
    if (msg.empty())
        msg = segedit_status_name(status);
    throw RuntimeError(status, context.empty() ? msg : context + ": " + msg);
}

template <class T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};

using Image = std::unique_ptr<segedit_image, Deleter<segedit_image, segedit_image_free>>;
using Labels = std::unique_ptr<segedit_labels, Deleter<segedit_labels, segedit_labels_free>>;
using Generator = std::unique_ptr<segedit_generator, Deleter<segedit_generator, segedit_generator_free>>;
using Projections = std::unique_ptr<segedit_projections, Deleter<segedit_projections, segedit_projections_free>>;
using Direction = std::unique_ptr<segedit_direction, Deleter<segedit_direction, segedit_direction_free>>;
using Script = std::unique_ptr<segedit_script, Deleter<segedit_script, segedit_script_free>>;

// Takes ownership of a malloc'd buffer returned by the library.
inline std::string take_string(char* s) {
    std::string out(s);
    segedit_buffer_free(s);
    return out;
}

inline std::vector<std::uint8_t> take_bytes(uint8_t* data, size_t size) {
    std::vector<std::uint8_t> out(data, data + size);
    segedit_buffer_free(data);
    return out;
}

inline Generator make_generator(std::uint64_t seed) {
    segedit_generator_config cfg;
    segedit_generator_config_default(&cfg);
    cfg.seed = seed;
    segedit_generator* g = nullptr;
    check(segedit_generator_create(&cfg, &g), "generator");
    return Generator(g);
}

inline Image load_image(const std::string& path) {
    segedit_image* img = nullptr;
    check(segedit_image_load(path.c_str(), &img), path);
    return Image(img);
}

inline Labels load_labels(const std::string& path, int width, int height) {
    segedit_labels* l = nullptr;
    check(segedit_labels_load(path.c_str(), width, height, &l), path);
    return Labels(l);
}

inline void save_image(const segedit_image* img, const std::string& path) {
    check(segedit_image_save(img, path.c_str()), path);
}

inline std::vector<std::uint8_t> encode_image(const segedit_image* img) {
    uint8_t* data = nullptr;
    size_t size = 0;
    check(segedit_image_encode(img, &data, &size), "encode image");
    return take_bytes(data, size);
}

inline std::vector<std::uint8_t> encode_labels(const segedit_labels* labels) {
    uint8_t* data = nullptr;
    size_t size = 0;
    check(segedit_labels_encode(labels, &data, &size), "encode labels");
    return take_bytes(data, size);
}

inline std::string projections_json(const segedit_generator* gen, const segedit_projections* p) {
    char* s = nullptr;
    check(segedit_projections_to_json(gen, p, &s), "serialise codes");
    return take_string(s);
}

inline Projections projections_from_json(const segedit_generator* gen, const std::string& json,
                                         const std::string& context) {
    segedit_projections* p = nullptr;
    check(segedit_projections_from_json(gen, json.c_str(), &p), context);
    return Projections(p);
}

} // namespace cli
