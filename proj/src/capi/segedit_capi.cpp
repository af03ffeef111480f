#include <segedit/segedit.h>

#include "editing.hpp"
#include "error.hpp"
#include "generator.hpp"
#include "image.hpp"
#include "levelset.hpp"
#include "poisson.hpp"
#include "projection.hpp"
#include "serialization.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <mutex>
#include <new>
#include <set>
#include <string>

using namespace segedit;

struct segedit_image {
    ImageBuffer value;
};

struct segedit_labels {
    LabelMap value;
};

struct segedit_generator {
    ToyGenerator value;
};

struct segedit_projections {
    ProjectionConfig config;
    std::vector<SegmentProjection> segments;
};

struct segedit_direction {
    EditDirection value;
};

struct segedit_script {
    EditScript value;
};

namespace {

thread_local std::string last_error;

segedit_status set_error(segedit_status status, const std::string& what) {
    last_error = what;
    return status;
}

template <class F>
segedit_status guarded(F&& fn) {
    try {
        fn();
        last_error.clear();
        return SEGEDIT_OK;
    } catch (const Error& e) {
        return set_error(static_cast<segedit_status>(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return set_error(SEGEDIT_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return set_error(SEGEDIT_ERR_INTERNAL, e.what());
    } catch (...) {
        return set_error(SEGEDIT_ERR_INTERNAL, "unknown error");
    }
}

void require(bool ok, const char* what) {
    if (!ok)
        fail(ErrorCode::InvalidArgument, what);
}

template <class T, class V>
void emit(T** out, V&& value) {
    *out = new T{std::forward<V>(value)};
}

char* copy_string(const std::string& s) {
    char* buf = static_cast<char*>(std::malloc(s.size() + 1));
    if (!buf)
        throw std::bad_alloc();
    std::memcpy(buf, s.c_str(), s.size() + 1);
    return buf;
}

void copy_bytes(const std::vector<std::uint8_t>& bytes, uint8_t** data, size_t* size) {
    auto* buf = static_cast<uint8_t*>(std::malloc(std::max<size_t>(bytes.size(), 1)));
    if (!buf)
        throw std::bad_alloc();
    std::memcpy(buf, bytes.data(), bytes.size());
    *data = buf;
    *size = bytes.size();
}

LatentSpace to_space(segedit_space s) {
    switch (s) {
    case SEGEDIT_SPACE_Z: return LatentSpace::Z;
    case SEGEDIT_SPACE_W: return LatentSpace::W;
    case SEGEDIT_SPACE_WPLUS: return LatentSpace::WPlus;
    case SEGEDIT_SPACE_S: return LatentSpace::SSpace;
    }
    fail(ErrorCode::InvalidArgument, "unknown latent space id " + std::to_string(static_cast<int>(s)));
}

segedit_space from_space(LatentSpace s) {
    switch (s) {
    case LatentSpace::Z: return SEGEDIT_SPACE_Z;
    case LatentSpace::W: return SEGEDIT_SPACE_W;
    case LatentSpace::WPlus: return SEGEDIT_SPACE_WPLUS;
    case LatentSpace::SSpace: return SEGEDIT_SPACE_S;
    }
    return SEGEDIT_SPACE_W;
}

ProjectionConfig to_config(const segedit_projection_config* c) {
    ProjectionConfig cfg;
    if (!c)
        return cfg;
    cfg.space = to_space(c->space);
    cfg.steps = c->steps;
    cfg.learning_rate = c->learning_rate;
    cfg.adam_beta1 = c->adam_beta1;
    cfg.adam_beta2 = c->adam_beta2;
    cfg.adam_epsilon = c->adam_epsilon;
    cfg.band_radius = c->band_radius;
    cfg.mean_latent_samples = c->mean_latent_samples;
    cfg.seed = c->seed;
    return cfg;
}

int threads_of(const segedit_projection_config* c) {
    return c ? std::max(1, c->threads) : 1;
}

StitchConfig to_stitch(const segedit_stitch_config* c) {
    StitchConfig cfg;
    if (!c)
        return cfg;
    cfg.enabled = c->enabled != 0;
    cfg.tol = c->tol;
    cfg.max_iters = c->max_iters;
    cfg.frame = c->neumann_frame ? FrameBoundary::Neumann : FrameBoundary::Reject;
    return cfg;
}

// Serialises callbacks from worker threads and turns per-segment step
// counts into one running total.
class ProgressCounter {
public:
    ProgressCounter(segedit_progress_fn fn, void* user, int total) : fn_(fn), user_(user), total_(total) {}

    ProgressFn callback() {
        if (!fn_)
            return {};
        return [this](int, int) {
            std::lock_guard lock(mutex_);
            ++done_;
            fn_(done_, total_, user_);
        };
    }

private:
    segedit_progress_fn fn_;
    void* user_;
    int total_;
    int done_ = 0;
    std::mutex mutex_;
};

bool is_global(const segedit_projections& p) {
    return p.segments.size() == 1 && p.segments[0].segment_id == 0;
}

BinaryMask mask_for(const SegmentProjection& s, const segedit_labels* labels, const ImageBuffer& target) {
    if (s.segment_id == 0)
        return full_mask(target.width(), target.height());
    require(labels != nullptr, "labels are required for segment projections");
    return mask_of(labels->value, s.segment_id);
}

} // namespace

extern "C" {

const char* segedit_last_error(void) {
    return last_error.c_str();
}

const char* segedit_status_name(segedit_status status) {
    switch (status) {
    case SEGEDIT_OK: return "ok";
    case SEGEDIT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SEGEDIT_ERR_IO: return "i/o error";
    case SEGEDIT_ERR_UNSUPPORTED_FORMAT: return "unsupported format";
    case SEGEDIT_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case SEGEDIT_ERR_INVALID_LABELS: return "invalid labels";
    case SEGEDIT_ERR_OUT_OF_RANGE: return "out of range";
    case SEGEDIT_ERR_SPACE_MISMATCH: return "space mismatch";
    case SEGEDIT_ERR_EMPTY_MASK: return "empty mask";
    case SEGEDIT_ERR_NON_FINITE: return "non-finite value";
    case SEGEDIT_ERR_CFL_VIOLATION: return "CFL violation";
    case SEGEDIT_ERR_NOT_CONVERGED: return "not converged";
    case SEGEDIT_ERR_SEED_MISMATCH: return "generator seed mismatch";
    case SEGEDIT_ERR_SEGMENT_CONSUMED: return "segment consumed";
    case SEGEDIT_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* segedit_version(void) {
    return "1.0.0";
}

void segedit_buffer_free(void* buffer) {
    std::free(buffer);
}

segedit_status segedit_space_parse(const char* name, segedit_space* out) {
    return guarded([&] {
        require(name && out, "null argument");
        *out = from_space(parse_space(name));
    });
}

const char* segedit_space_name(segedit_space space) {
    switch (space) {
    case SEGEDIT_SPACE_Z: return "Z";
    case SEGEDIT_SPACE_W: return "W";
    case SEGEDIT_SPACE_WPLUS: return "WPlus";
    case SEGEDIT_SPACE_S: return "SSpace";
    }
    return "unknown";
}

segedit_status segedit_image_create(int width, int height, const double* data, segedit_image** out) {
    return guarded([&] {
        require(out != nullptr, "null output");
        require(width > 0 && height > 0, "image dimensions must be positive");
        if (!data) {
            emit(out, ImageBuffer(width, height));
            return;
        }
        const std::size_t n = static_cast<std::size_t>(width) * height * 3;
        emit(out, ImageBuffer::from_data(width, height, std::vector<double>(data, data + n)));
    });
}

segedit_status segedit_image_load(const char* path, segedit_image** out) {
    return guarded([&] {
        require(path && out, "null argument");
        emit(out, load_image(path));
    });
}

segedit_status segedit_image_decode(const uint8_t* png, size_t size, segedit_image** out) {
    return guarded([&] {
        require(png && out, "null argument");
        emit(out, decode_image({png, size}));
    });
}

segedit_status segedit_image_save(const segedit_image* image, const char* path) {
    return guarded([&] {
        require(image && path, "null argument");
        save_image(image->value, path);
    });
}

segedit_status segedit_image_encode(const segedit_image* image, uint8_t** png, size_t* size) {
    return guarded([&] {
        require(image && png && size, "null argument");
        copy_bytes(encode_image(image->value), png, size);
    });
}

int segedit_image_width(const segedit_image* image) {
    return image ? image->value.width() : 0;
}

int segedit_image_height(const segedit_image* image) {
    return image ? image->value.height() : 0;
}

const double* segedit_image_data(const segedit_image* image) {
    return image ? image->value.data().data() : nullptr;
}

segedit_status segedit_image_mse(const segedit_image* a, const segedit_image* b, double* out) {
    return guarded([&] {
        require(a && b && out, "null argument");
        *out = mean_squared_error(a->value, b->value);
    });
}

void segedit_image_free(segedit_image* image) {
    delete image;
}

segedit_status segedit_labels_create(int width, int height, const uint8_t* labels, segedit_labels** out) {
    return guarded([&] {
        require(labels && out, "null argument");
        require(width > 0 && height > 0, "label map dimensions must be positive");
        const std::size_t n = static_cast<std::size_t>(width) * height;
        emit(out, LabelMap::from_labels(width, height, std::vector<std::uint8_t>(labels, labels + n)));
    });
}

segedit_status segedit_labels_load(const char* path, int expected_width, int expected_height, segedit_labels** out) {
    return guarded([&] {
        require(path && out, "null argument");
        if (expected_width > 0 && expected_height > 0) {
            emit(out, load_label_map(path, {expected_width, expected_height}));
        } else {
            std::ifstream in(path, std::ios::binary);
            if (!in)
                fail(ErrorCode::Io, std::string("cannot open ") + path);
            std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            emit(out, decode_label_map(bytes));
        }
    });
}

segedit_status segedit_labels_decode(const uint8_t* png, size_t size, segedit_labels** out) {
    return guarded([&] {
        require(png && out, "null argument");
        emit(out, decode_label_map({png, size}));
    });
}

segedit_status segedit_labels_save(const segedit_labels* labels, const char* path) {
    return guarded([&] {
        require(labels && path, "null argument");
        save_label_map(labels->value, path);
    });
}

segedit_status segedit_labels_encode(const segedit_labels* labels, uint8_t** png, size_t* size) {
    return guarded([&] {
        require(labels && png && size, "null argument");
        copy_bytes(encode_label_map(labels->value), png, size);
    });
}

int segedit_labels_width(const segedit_labels* labels) {
    return labels ? labels->value.width() : 0;
}

int segedit_labels_height(const segedit_labels* labels) {
    return labels ? labels->value.height() : 0;
}

int segedit_labels_segment_count(const segedit_labels* labels) {
    return labels ? labels->value.segment_count() : 0;
}

const uint8_t* segedit_labels_data(const segedit_labels* labels) {
    return labels ? labels->value.labels().data() : nullptr;
}

void segedit_labels_free(segedit_labels* labels) {
    delete labels;
}

segedit_status segedit_compose(const segedit_image* const* pieces, const int* ids, size_t count,
                               const segedit_labels* labels, const segedit_image* original, segedit_image** out) {
    return guarded([&] {
        require(labels && original && out, "null argument");
        require(count == 0 || (pieces && ids), "null pieces");
        std::vector<Piece> list;
        for (size_t i = 0; i < count; ++i) {
            require(pieces[i] != nullptr, "null piece");
            list.emplace_back(ids[i], pieces[i]->value);
        }
        emit(out, compose(list, labels->value, original->value));
    });
}

void segedit_generator_config_default(segedit_generator_config* cfg) {
    if (!cfg)
        return;
    const GeneratorConfig d;
    *cfg = {};
    cfg->latent_dim = d.latent_dim;
    cfg->layer_count = d.layer_count;
    cfg->base_resolution = d.base_resolution;
    for (std::size_t i = 0; i < d.channels.size(); ++i)
        cfg->channels[i] = d.channels[i];
    cfg->seed = d.seed;
}

segedit_status segedit_generator_create(const segedit_generator_config* cfg, segedit_generator** out) {
    return guarded([&] {
        require(out != nullptr, "null output");
        GeneratorConfig gc;
        if (cfg) {
            require(cfg->layer_count >= 1 && cfg->layer_count <= SEGEDIT_MAX_LAYERS, "layer_count must be 1..8");
            gc.latent_dim = cfg->latent_dim;
            gc.layer_count = cfg->layer_count;
            gc.base_resolution = cfg->base_resolution;
            gc.channels.assign(cfg->channels, cfg->channels + cfg->layer_count);
            gc.seed = cfg->seed;
        }
        emit(out, ToyGenerator(gc));
    });
}

int segedit_generator_output_size(const segedit_generator* gen) {
    return gen ? gen->value.output_size() : 0;
}

uint64_t segedit_generator_seed(const segedit_generator* gen) {
    return gen ? gen->value.config().seed : 0;
}

size_t segedit_generator_parameter_count(const segedit_generator* gen) {
    return gen ? gen->value.parameter_count() : 0;
}

void segedit_generator_free(segedit_generator* gen) {
    delete gen;
}

segedit_status segedit_synthesize_demo(const segedit_generator* gen, const segedit_labels* labels, uint64_t seed,
                                       segedit_image** out) {
    return guarded([&] {
        require(gen && labels && out, "null argument");
        emit(out, synthesize_demo(gen->value, labels->value, seed));
    });
}

void segedit_projection_config_default(segedit_projection_config* cfg) {
    if (!cfg)
        return;
    const ProjectionConfig d;
    cfg->space = from_space(d.space);
    cfg->steps = d.steps;
    cfg->learning_rate = d.learning_rate;
    cfg->adam_beta1 = d.adam_beta1;
    cfg->adam_beta2 = d.adam_beta2;
    cfg->adam_epsilon = d.adam_epsilon;
    cfg->band_radius = d.band_radius;
    cfg->mean_latent_samples = d.mean_latent_samples;
    cfg->seed = d.seed;
    cfg->threads = 1;
}

segedit_status segedit_project(const segedit_generator* gen, const segedit_image* target, const segedit_labels* labels,
                               const segedit_projection_config* cfg, segedit_progress_fn progress, void* user,
                               segedit_projections** out) {
    return guarded([&] {
        require(gen && target && labels && out, "null argument");
        const ProjectionConfig pc = to_config(cfg);
        pc.validate();
        ProgressCounter counter(progress, user, std::max(0, pc.steps) * labels->value.segment_count());
        auto segments = project_all(gen->value, target->value, labels->value, pc, threads_of(cfg), counter.callback());
        *out = new segedit_projections{pc, std::move(segments)};
    });
}

segedit_status segedit_project_global(const segedit_generator* gen, const segedit_image* target,
                                      const segedit_projection_config* cfg, segedit_progress_fn progress, void* user,
                                      segedit_projections** out) {
    return guarded([&] {
        require(gen && target && out, "null argument");
        const ProjectionConfig pc = to_config(cfg);
        pc.validate();
        ProgressCounter counter(progress, user, std::max(0, pc.steps));
        auto global = project_global(gen->value, target->value, pc, counter.callback());
        *out = new segedit_projections{pc, {std::move(global)}};
    });
}

void segedit_finetune_config_default(segedit_finetune_config* cfg) {
    if (!cfg)
        return;
    const FinetuneConfig d;
    cfg->steps = d.steps;
    cfg->learning_rate = d.learning_rate;
    cfg->band_radius = d.band_radius;
    cfg->threads = 1;
}

segedit_status segedit_finetune(const segedit_generator* gen, const segedit_projections* projections,
                                const segedit_image* target, const segedit_labels* labels,
                                const segedit_finetune_config* cfg, segedit_projections** out) {
    return guarded([&] {
        require(gen && projections && target && out, "null argument");
        FinetuneConfig fc;
        int threads = 1;
        if (cfg) {
            fc.steps = cfg->steps;
            fc.learning_rate = cfg->learning_rate;
            fc.band_radius = cfg->band_radius;
            threads = std::max(1, cfg->threads);
        }
        auto result = std::make_unique<segedit_projections>(*projections);
        auto& segs = result->segments;
        parallel_for(static_cast<int>(segs.size()), threads, [&](int i) {
            try {
                segs[i] = finetune_segment(gen->value, segs[i], target->value,
                                           mask_for(segs[i], labels, target->value), fc);
            } catch (const Error& e) {
                throw Error(e.code(), "segment " + std::to_string(segs[i].segment_id) + ": " + e.what());
            }
        });
        *out = result.release();
    });
}

size_t segedit_projections_count(const segedit_projections* p) {
    return p ? p->segments.size() : 0;
}

int segedit_projections_segment_id(const segedit_projections* p, size_t index) {
    return p && index < p->segments.size() ? p->segments[index].segment_id : -1;
}

double segedit_projections_final_loss(const segedit_projections* p, size_t index) {
    return p && index < p->segments.size() ? p->segments[index].final_loss : -1.0;
}

int segedit_projections_fine_tuned(const segedit_projections* p, size_t index) {
    return p && index < p->segments.size() && p->segments[index].fine_tuned_weights ? 1 : 0;
}

segedit_status segedit_projections_loss_history(const segedit_projections* p, size_t index, const double** values,
                                                size_t* count) {
    return guarded([&] {
        require(p && values && count, "null argument");
        if (index >= p->segments.size())
            fail(ErrorCode::OutOfRange, "projection index out of range");
        *values = p->segments[index].loss_history.data();
        *count = p->segments[index].loss_history.size();
    });
}

segedit_status segedit_projections_render(const segedit_generator* gen, const segedit_projections* p, size_t index,
                                          segedit_image** out) {
    return guarded([&] {
        require(gen && p && out, "null argument");
        if (index >= p->segments.size())
            fail(ErrorCode::OutOfRange, "projection index out of range");
        const auto& s = p->segments[index];
        emit(out, generator_for(gen->value, s).synthesize(s.code));
    });
}

segedit_status segedit_projections_to_json(const segedit_generator* gen, const segedit_projections* p, char** json) {
    return guarded([&] {
        require(gen && p && json, "null argument");
        ProjectionFile file{gen->value.config().seed, p->config.space, p->config, p->segments};
        *json = copy_string(projection_file_to_json(file, gen->value).dump(2));
    });
}

segedit_status segedit_projections_from_json(const segedit_generator* gen, const char* json,
                                             segedit_projections** out) {
    return guarded([&] {
        require(gen && json && out, "null argument");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(json);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::InvalidArgument, std::string("projection file: ") + e.what());
        }
        ProjectionFile file = projection_file_from_json(j, gen->value);
        std::sort(file.segments.begin(), file.segments.end(),
                  [](const auto& a, const auto& b) { return a.segment_id < b.segment_id; });
        for (std::size_t i = 1; i < file.segments.size(); ++i)
            if (file.segments[i].segment_id == file.segments[i - 1].segment_id)
                fail(ErrorCode::InvalidArgument, "projection file lists segment " +
                                                     std::to_string(file.segments[i].segment_id) + " twice");
        *out = new segedit_projections{file.config, std::move(file.segments)};
    });
}

void segedit_projections_free(segedit_projections* p) {
    delete p;
}

void segedit_stitch_config_default(segedit_stitch_config* cfg) {
    if (!cfg)
        return;
    const StitchConfig d;
    cfg->enabled = d.enabled ? 1 : 0;
    cfg->tol = d.tol;
    cfg->max_iters = d.max_iters;
    cfg->neumann_frame = d.frame == FrameBoundary::Neumann ? 1 : 0;
}

segedit_status segedit_reconstruct(const segedit_generator* gen, const segedit_projections* p,
                                   const segedit_labels* labels, const segedit_image* original,
                                   const segedit_stitch_config* stitch, segedit_image** out) {
    return guarded([&] {
        require(gen && p && original && out, "null argument");
        if (is_global(*p)) {
            const auto& s = p->segments[0];
            emit(out, generator_for(gen->value, s).synthesize(s.code));
            return;
        }
        require(labels != nullptr, "labels are required for a segmented reconstruction");
        emit(out, reconstruct(gen->value, p->segments, labels->value, original->value, to_stitch(stitch)));
    });
}

segedit_status segedit_direction_from_json(const segedit_generator* gen, const char* json, segedit_direction** out) {
    return guarded([&] {
        require(gen && json && out, "null argument");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(json);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::InvalidArgument, std::string("edit direction: ") + e.what());
        }
        emit(out, direction_from_json(j, gen->value));
    });
}

segedit_status segedit_direction_to_json(const segedit_direction* d, char** json) {
    return guarded([&] {
        require(d && json, "null argument");
        *json = copy_string(direction_to_json(d->value).dump(2));
    });
}

segedit_status segedit_direction_from_codes(const segedit_projections* a, size_t index_a,
                                            const segedit_projections* b, size_t index_b, const char* name,
                                            segedit_direction** out) {
    return guarded([&] {
        require(a && b && out, "null argument");
        if (index_a >= a->segments.size() || index_b >= b->segments.size())
            fail(ErrorCode::OutOfRange, "projection index out of range");
        emit(out, direction_from_codes(a->segments[index_a].code, b->segments[index_b].code, name ? name : "delta"));
    });
}

segedit_status segedit_direction_random(const segedit_generator* gen, segedit_space space, uint64_t seed,
                                        const char* name, segedit_direction** out) {
    return guarded([&] {
        require(gen && out, "null argument");
        emit(out, random_direction(gen->value, to_space(space), seed, name ? name : "random"));
    });
}

void segedit_direction_free(segedit_direction* d) {
    delete d;
}

segedit_status segedit_edit_simultaneous(const segedit_generator* gen, const segedit_projections* p,
                                         const segedit_direction* d, double alpha, segedit_projections** out) {
    return guarded([&] {
        require(gen && p && d && out, "null argument");
        auto edited = edit_simultaneous(gen->value, p->segments, d->value, alpha);
        *out = new segedit_projections{p->config, std::move(edited)};
    });
}

segedit_status segedit_script_from_json(const segedit_generator* gen, const char* json, const char* base_dir,
                                        segedit_script** out) {
    return guarded([&] {
        require(gen && json && out, "null argument");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(json);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::InvalidArgument, std::string("edit script: ") + e.what());
        }
        emit(out, script_from_json(j, gen->value, base_dir ? base_dir : "."));
    });
}

segedit_status segedit_script_single(const segedit_direction* d, const int* segments, size_t count, double alpha,
                                     int reproject, segedit_script** out) {
    return guarded([&] {
        require(d && out, "null argument");
        EditStep step;
        if (segments)
            step.segments = std::vector<int>(segments, segments + count);
        step.direction = d->value;
        step.alpha = alpha;
        step.reproject = reproject != 0;
        emit(out, EditScript{std::move(step)});
    });
}

size_t segedit_script_step_count(const segedit_script* script) {
    return script ? script->value.size() : 0;
}

void segedit_script_free(segedit_script* script) {
    delete script;
}

void segedit_edit_options_default(segedit_edit_options* opts) {
    if (!opts)
        return;
    opts->threads = 1;
    opts->quantize_between_steps = 0;
}

segedit_status segedit_edit_incremental(const segedit_generator* gen, const segedit_image* image,
                                        const segedit_labels* labels, const segedit_script* script,
                                        const segedit_projection_config* proj_cfg, const segedit_stitch_config* stitch,
                                        const segedit_edit_options* opts, segedit_projections** codes,
                                        segedit_progress_fn progress, void* user, segedit_image** out) {
    return guarded([&] {
        require(gen && image && labels && script && out, "null argument");
        const ProjectionConfig pc = to_config(proj_cfg);
        pc.validate();

        CodeCache cache;
        if (codes && *codes) {
            require(!is_global(**codes), "cached codes must be per-segment projections");
            for (const auto& s : (*codes)->segments)
                cache[s.segment_id] = s;
        }

        // Count the projections the run will perform so progress has a total.
        const int n = labels->value.segment_count();
        std::set<int> cached;
        for (const auto& [k, s] : cache)
            cached.insert(k);
        int projections = 0;
        for (const auto& step : script->value) {
            std::set<int> ids;
            if (step.segments)
                ids.insert(step.segments->begin(), step.segments->end());
            else
                for (int k = 1; k <= n; ++k)
                    ids.insert(k);
            for (int k : ids) {
                if (step.reproject || !cached.contains(k))
                    ++projections;
                cached.insert(k);
            }
        }
        ProgressCounter counter(progress, user, projections * std::max(0, pc.steps));

        IncrementalOptions io;
        if (opts) {
            io.threads = std::max(1, opts->threads);
            io.quantize_between_steps = opts->quantize_between_steps != 0;
        }
        io.progress = counter.callback();
        ImageBuffer result = edit_incremental(gen->value, image->value, labels->value, script->value, pc,
                                              to_stitch(stitch), cache, io);
        if (codes) {
            auto updated = std::make_unique<segedit_projections>();
            updated->config = pc;
            for (auto& [k, s] : cache)
                updated->segments.push_back(std::move(s));
            segedit_projections_free(*codes);
            *codes = updated.release();
        }
        emit(out, std::move(result));
    });
}

void segedit_refine_params_default(segedit_refine_params* params) {
    if (!params)
        return;
    const RefineParams d;
    params->dt = d.dt;
    params->iterations = d.iterations;
    params->smooth_radius = d.smooth_radius;
    params->max_growth = d.max_growth;
    params->reinit_interval = d.reinit_interval;
}

segedit_status segedit_refine_max_dt(const segedit_image* original, const segedit_image* rendered, int smooth_radius,
                                     double* out) {
    return guarded([&] {
        require(original && rendered && out, "null argument");
        *out = max_stable_dt(stopping_function(original->value, rendered->value, smooth_radius));
    });
}

segedit_status segedit_refine(const segedit_labels* labels, int segment, const segedit_image* original,
                              const segedit_image* rendered, const segedit_refine_params* params,
                              segedit_labels** out, segedit_image** speed) {
    return guarded([&] {
        require(labels && original && rendered && out, "null argument");
        RefineParams rp;
        if (params) {
            rp.dt = params->dt;
            rp.iterations = params->iterations;
            rp.smooth_radius = params->smooth_radius;
            rp.max_growth = params->max_growth;
            rp.reinit_interval = params->reinit_interval;
        }
        RefineResult r = refine_segment(labels->value, segment, original->value, rendered->value, rp);
        std::unique_ptr<segedit_image> speed_img;
        if (speed) {
            ImageBuffer f(r.speed.width, r.speed.height);
            for (int y = 0; y < f.height(); ++y)
                for (int x = 0; x < f.width(); ++x)
                    for (int c = 0; c < 3; ++c)
                        f.at(x, y, c) = r.speed.at(x, y);
            speed_img.reset(new segedit_image{std::move(f)});
        }
        emit(out, std::move(r.labels));
        if (speed)
            *speed = speed_img.release();
    });
}

} // extern "C"
