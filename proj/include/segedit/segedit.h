/* Segment-wise latent projection, editing and compositing.
 *
 * Every function returns a segedit_status. On failure a human-readable
 * message is available from segedit_last_error() on the calling thread
 * until the next failing call on that thread. Handles are opaque, owned by
 * the caller and released with the matching *_free function; freeing NULL
 * is a no-op. Buffers and strings returned through out-parameters are
 * released with segedit_buffer_free. Handles are immutable after creation
 * and may be shared between threads.
 */
#ifndef SEGEDIT_SEGEDIT_H
#define SEGEDIT_SEGEDIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SEGEDIT_API __declspec(dllexport)
#else
#define SEGEDIT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum segedit_status {
    SEGEDIT_OK = 0,
    SEGEDIT_ERR_INVALID_ARGUMENT = 1,
    SEGEDIT_ERR_IO = 2,
    SEGEDIT_ERR_UNSUPPORTED_FORMAT = 3,
    SEGEDIT_ERR_DIMENSION_MISMATCH = 4,
    SEGEDIT_ERR_INVALID_LABELS = 5,
    SEGEDIT_ERR_OUT_OF_RANGE = 6,
    SEGEDIT_ERR_SPACE_MISMATCH = 7,
    SEGEDIT_ERR_EMPTY_MASK = 8,
    SEGEDIT_ERR_NON_FINITE = 9,
    SEGEDIT_ERR_CFL_VIOLATION = 10,
    SEGEDIT_ERR_NOT_CONVERGED = 11,
    SEGEDIT_ERR_SEED_MISMATCH = 12,
    SEGEDIT_ERR_SEGMENT_CONSUMED = 13,
    SEGEDIT_ERR_INTERNAL = 99
} segedit_status;

typedef enum segedit_space {
    SEGEDIT_SPACE_Z = 0,
    SEGEDIT_SPACE_W = 1,
    SEGEDIT_SPACE_WPLUS = 2,
    SEGEDIT_SPACE_S = 3
} segedit_space;

typedef struct segedit_image segedit_image;
typedef struct segedit_labels segedit_labels;
typedef struct segedit_generator segedit_generator;
typedef struct segedit_projections segedit_projections;
typedef struct segedit_direction segedit_direction;
typedef struct segedit_script segedit_script;

/* Called after each optimizer step with the steps completed so far and the
 * total for the whole call. May be invoked from worker threads, but never
 * concurrently. */
typedef void (*segedit_progress_fn)(int done, int total, void* user);

SEGEDIT_API const char* segedit_last_error(void);
SEGEDIT_API const char* segedit_status_name(segedit_status status);
SEGEDIT_API const char* segedit_version(void);
SEGEDIT_API void segedit_buffer_free(void* buffer);

/* Spaces are named "Z", "W", "WPlus" and "SSpace". */
SEGEDIT_API segedit_status segedit_space_parse(const char* name, segedit_space* out);
SEGEDIT_API const char* segedit_space_name(segedit_space space);

/* Images: width x height x 3, row-major interleaved RGB in [0, 1]. */
SEGEDIT_API segedit_status segedit_image_create(int width, int height, const double* data, segedit_image** out);
SEGEDIT_API segedit_status segedit_image_load(const char* path, segedit_image** out);
SEGEDIT_API segedit_status segedit_image_decode(const uint8_t* png, size_t size, segedit_image** out);
SEGEDIT_API segedit_status segedit_image_save(const segedit_image* image, const char* path);
SEGEDIT_API segedit_status segedit_image_encode(const segedit_image* image, uint8_t** png, size_t* size);
SEGEDIT_API int segedit_image_width(const segedit_image* image);
SEGEDIT_API int segedit_image_height(const segedit_image* image);
SEGEDIT_API const double* segedit_image_data(const segedit_image* image);
SEGEDIT_API segedit_status segedit_image_mse(const segedit_image* a, const segedit_image* b, double* out);
SEGEDIT_API void segedit_image_free(segedit_image* image);

/* Label maps: one byte per pixel, 0 = excluded, 1..n = segments. Every
 * label 1..n must occur. */
SEGEDIT_API segedit_status segedit_labels_create(int width, int height, const uint8_t* labels, segedit_labels** out);
/* expected_width/height of 0 skip the dimension check. */
SEGEDIT_API segedit_status segedit_labels_load(const char* path, int expected_width, int expected_height,
                                               segedit_labels** out);
SEGEDIT_API segedit_status segedit_labels_decode(const uint8_t* png, size_t size, segedit_labels** out);
SEGEDIT_API segedit_status segedit_labels_save(const segedit_labels* labels, const char* path);
SEGEDIT_API segedit_status segedit_labels_encode(const segedit_labels* labels, uint8_t** png, size_t* size);
SEGEDIT_API int segedit_labels_width(const segedit_labels* labels);
SEGEDIT_API int segedit_labels_height(const segedit_labels* labels);
SEGEDIT_API int segedit_labels_segment_count(const segedit_labels* labels);
SEGEDIT_API const uint8_t* segedit_labels_data(const segedit_labels* labels);
SEGEDIT_API void segedit_labels_free(segedit_labels* labels);

/* Hard-cut composition of per-segment pieces; label 0 copies original.
 * pieces[i] belongs to segment ids[i]. */
SEGEDIT_API segedit_status segedit_compose(const segedit_image* const* pieces, const int* ids, size_t count,
                                           const segedit_labels* labels, const segedit_image* original,
                                           segedit_image** out);

#define SEGEDIT_MAX_LAYERS 8

typedef struct segedit_generator_config {
    int latent_dim;
    int layer_count;
    int base_resolution;
    int channels[SEGEDIT_MAX_LAYERS];
    uint64_t seed;
} segedit_generator_config;

SEGEDIT_API void segedit_generator_config_default(segedit_generator_config* cfg);
SEGEDIT_API segedit_status segedit_generator_create(const segedit_generator_config* cfg, segedit_generator** out);
SEGEDIT_API int segedit_generator_output_size(const segedit_generator* gen);
SEGEDIT_API uint64_t segedit_generator_seed(const segedit_generator* gen);
SEGEDIT_API size_t segedit_generator_parameter_count(const segedit_generator* gen);
SEGEDIT_API void segedit_generator_free(segedit_generator* gen);

/* Demo target: every segment k renders its own random W code drawn from
 * seed ^ k; label 0 pixels render a code drawn from seed itself. */
SEGEDIT_API segedit_status segedit_synthesize_demo(const segedit_generator* gen, const segedit_labels* labels,
                                                   uint64_t seed, segedit_image** out);

typedef struct segedit_projection_config {
    segedit_space space;
    int steps;
    double learning_rate;
    double adam_beta1;
    double adam_beta2;
    double adam_epsilon;
    int band_radius;
    int mean_latent_samples;
    uint64_t seed;
    int threads;
} segedit_projection_config;

SEGEDIT_API void segedit_projection_config_default(segedit_projection_config* cfg);

/* One projection per segment 1..n. Results do not depend on threads. */
SEGEDIT_API segedit_status segedit_project(const segedit_generator* gen, const segedit_image* target,
                                           const segedit_labels* labels, const segedit_projection_config* cfg,
                                           segedit_progress_fn progress, void* user, segedit_projections** out);
/* Single whole-frame code, stored as segment 0. */
SEGEDIT_API segedit_status segedit_project_global(const segedit_generator* gen, const segedit_image* target,
                                                  const segedit_projection_config* cfg, segedit_progress_fn progress,
                                                  void* user, segedit_projections** out);

typedef struct segedit_finetune_config {
    int steps;
    double learning_rate;
    int band_radius;
    int threads;
} segedit_finetune_config;

SEGEDIT_API void segedit_finetune_config_default(segedit_finetune_config* cfg);
/* Fine-tunes the final layer and RGB projection per segment with the codes
 * frozen. labels may be NULL only for a global (segment 0) projection. */
SEGEDIT_API segedit_status segedit_finetune(const segedit_generator* gen, const segedit_projections* projections,
                                            const segedit_image* target, const segedit_labels* labels,
                                            const segedit_finetune_config* cfg, segedit_projections** out);

SEGEDIT_API size_t segedit_projections_count(const segedit_projections* p);
SEGEDIT_API int segedit_projections_segment_id(const segedit_projections* p, size_t index);
SEGEDIT_API double segedit_projections_final_loss(const segedit_projections* p, size_t index);
SEGEDIT_API int segedit_projections_fine_tuned(const segedit_projections* p, size_t index);
/* Best-so-far loss per optimizer step. The pointer lives as long as p. */
SEGEDIT_API segedit_status segedit_projections_loss_history(const segedit_projections* p, size_t index,
                                                            const double** values, size_t* count);
/* Synthesizes one segment's code over the whole frame. */
SEGEDIT_API segedit_status segedit_projections_render(const segedit_generator* gen, const segedit_projections* p,
                                                      size_t index, segedit_image** out);
/* JSON text {generator_seed, space, segments, config}. */
SEGEDIT_API segedit_status segedit_projections_to_json(const segedit_generator* gen, const segedit_projections* p,
                                                       char** json);
/* Fails with SEGEDIT_ERR_SEED_MISMATCH for codes of another generator. */
SEGEDIT_API segedit_status segedit_projections_from_json(const segedit_generator* gen, const char* json,
                                                         segedit_projections** out);
SEGEDIT_API void segedit_projections_free(segedit_projections* p);

typedef struct segedit_stitch_config {
    int enabled;
    double tol;
    int max_iters;     /* <= 0: 10 x unknowns */
    int neumann_frame; /* 0: regions must keep off the image frame */
} segedit_stitch_config;

SEGEDIT_API void segedit_stitch_config_default(segedit_stitch_config* cfg);

/* Renders every segment, composes and optionally stitches. A global
 * projection (single segment 0) renders its code for the whole frame and
 * ignores labels and stitching. */
SEGEDIT_API segedit_status segedit_reconstruct(const segedit_generator* gen, const segedit_projections* p,
                                               const segedit_labels* labels, const segedit_image* original,
                                               const segedit_stitch_config* stitch, segedit_image** out);

/* Directions: JSON {name, space, payload}. */
SEGEDIT_API segedit_status segedit_direction_from_json(const segedit_generator* gen, const char* json,
                                                       segedit_direction** out);
SEGEDIT_API segedit_status segedit_direction_to_json(const segedit_direction* d, char** json);
/* Unit direction from segment a's code towards segment b's code. */
SEGEDIT_API segedit_status segedit_direction_from_codes(const segedit_projections* a, size_t index_a,
                                                        const segedit_projections* b, size_t index_b,
                                                        const char* name, segedit_direction** out);
/* Unit direction between two random codes of the given space. */
SEGEDIT_API segedit_status segedit_direction_random(const segedit_generator* gen, segedit_space space, uint64_t seed,
                                                    const char* name, segedit_direction** out);
SEGEDIT_API void segedit_direction_free(segedit_direction* d);

/* Applies the direction with the same alpha to every code. */
SEGEDIT_API segedit_status segedit_edit_simultaneous(const segedit_generator* gen, const segedit_projections* p,
                                                     const segedit_direction* d, double alpha,
                                                     segedit_projections** out);

/* Edit scripts: JSON array of {segments: "ALL" | [ids], direction:
 * {...} | "file.json", alpha, reproject}. Relative direction paths resolve
 * against base_dir (may be NULL for the working directory). */
SEGEDIT_API segedit_status segedit_script_from_json(const segedit_generator* gen, const char* json,
                                                    const char* base_dir, segedit_script** out);
/* Single-step script. segments == NULL selects every segment. */
SEGEDIT_API segedit_status segedit_script_single(const segedit_direction* d, const int* segments, size_t count,
                                                 double alpha, int reproject, segedit_script** out);
SEGEDIT_API size_t segedit_script_step_count(const segedit_script* script);
SEGEDIT_API void segedit_script_free(segedit_script* script);

typedef struct segedit_edit_options {
    int threads;
    /* Round the composite to 8 bits after every step, making a scripted
     * run identical to chaining single-step runs through PNG files. */
    int quantize_between_steps;
} segedit_edit_options;

SEGEDIT_API void segedit_edit_options_default(segedit_edit_options* opts);

/* Sequential edit: per step, (re)project the step's segments against the
 * current image, apply the direction, compose, stitch and continue from
 * the result. codes may be NULL; otherwise it seeds the code cache and is
 * replaced by the cache after the run (segments sorted by id). */
SEGEDIT_API segedit_status segedit_edit_incremental(const segedit_generator* gen, const segedit_image* image,
                                                    const segedit_labels* labels, const segedit_script* script,
                                                    const segedit_projection_config* proj_cfg,
                                                    const segedit_stitch_config* stitch,
                                                    const segedit_edit_options* opts, segedit_projections** codes,
                                                    segedit_progress_fn progress, void* user, segedit_image** out);

typedef struct segedit_refine_params {
    double dt;
    int iterations;
    int smooth_radius;
    int max_growth;
    int reinit_interval;
} segedit_refine_params;

SEGEDIT_API void segedit_refine_params_default(segedit_refine_params* params);
/* Largest dt satisfying the CFL bound for this stopping function. */
SEGEDIT_API segedit_status segedit_refine_max_dt(const segedit_image* original, const segedit_image* rendered,
                                                 int smooth_radius, double* out);
/* Level-set growth of segment k. speed (optional) receives the normalised
 * stopping function replicated to three channels. */
SEGEDIT_API segedit_status segedit_refine(const segedit_labels* labels, int segment, const segedit_image* original,
                                          const segedit_image* rendered, const segedit_refine_params* params,
                                          segedit_labels** out, segedit_image** speed);

#ifdef __cplusplus
}
#endif

#endif
