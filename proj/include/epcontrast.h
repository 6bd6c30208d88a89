/*
 * epcontrast C API.
 *
 * Opaque handles are created by *_create / *_load / producer functions and
 * released with the matching *_destroy. Every fallible function returns an
 * epc_status; on failure the message is available from epc_last_error() on
 * the calling thread until the next failing call.
 *
 * Strings returned as `const char*` are owned by the handle they came from
 * and stay valid until that handle is destroyed or modified.
 */
#ifndef EPCONTRAST_H_
#define EPCONTRAST_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(EPC_BUILDING_LIBRARY)
#define EPC_API __declspec(dllexport)
#else
#define EPC_API __declspec(dllimport)
#endif
#else
#define EPC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum epc_status {
  EPC_OK = 0,
  EPC_ERR_SHAPE = 1,
  EPC_ERR_EMPTY_REDUCTION = 2,
  EPC_ERR_PARSE = 3,
  EPC_ERR_RANGE = 4,
  EPC_ERR_FORMAT = 5,
  EPC_ERR_LENGTH = 6,
  EPC_ERR_PARTITION = 7,
  EPC_ERR_CACHE = 8,
  EPC_ERR_BUDGET = 9,
  EPC_ERR_DOMAIN = 10,
  EPC_ERR_CONFIG = 11,
  EPC_ERR_IO = 12,
  EPC_ERR_INVALID_ARGUMENT = 13,
  EPC_ERR_INTERNAL = 100
} epc_status;

typedef enum epc_loss_kind {
  EPC_LOSS_PC = 0, /* point-level InfoNCE */
  EPC_LOSS_AG = 1, /* point-to-segment contrast */
  EPC_LOSS_CC = 2, /* channel contrast */
  EPC_LOSS_EP = 3  /* AG + lambda * CC */
} epc_loss_kind;

typedef struct epc_config epc_config;
typedef struct epc_cloud epc_cloud;
typedef struct epc_segments epc_segments;
typedef struct epc_model epc_model;
typedef struct epc_history epc_history;
typedef struct epc_probe_result epc_probe_result;
typedef struct epc_bench_report epc_bench_report;
typedef struct epc_check_report epc_check_report;

EPC_API const char* epc_version(void);
EPC_API const char* epc_last_error(void);
EPC_API const char* epc_status_name(epc_status status);
EPC_API epc_status epc_parse_loss_kind(const char* name, epc_loss_kind* out);

/* ---- configuration ------------------------------------------------------ */

EPC_API epc_status epc_config_create(epc_config** out);
EPC_API void epc_config_destroy(epc_config* cfg);
EPC_API epc_status epc_config_set(epc_config* cfg, const char* key, const char* value);
EPC_API epc_status epc_config_get(const epc_config* cfg, const char* key, const char** value);
EPC_API epc_status epc_config_load_file(epc_config* cfg, const char* path);
/* Applies EPC_SEED from the environment when set. */
EPC_API epc_status epc_config_apply_environment(epc_config* cfg);
/* Derives every sub-seed from `seed`; call after all overrides. */
EPC_API epc_status epc_config_finalize(epc_config* cfg);
EPC_API const char* epc_config_resolved(epc_config* cfg);

/* ---- point clouds ------------------------------------------------------- */

/* positions and colors: n*3 doubles row-major; labels may be NULL. */
EPC_API epc_status epc_cloud_create(size_t n, const double* positions, const double* colors,
                                    const uint32_t* labels, epc_cloud** out);
/* Reads EPCC binary or ASCII "x y z r g b [label]". */
EPC_API epc_status epc_cloud_load(const char* path, epc_cloud** out);
EPC_API epc_status epc_cloud_save_binary(const epc_cloud* cloud, const char* path);
EPC_API epc_status epc_cloud_save_ascii(const epc_cloud* cloud, const char* path);
EPC_API void epc_cloud_destroy(epc_cloud* cloud);
EPC_API size_t epc_cloud_size(const epc_cloud* cloud);
EPC_API int epc_cloud_has_labels(const epc_cloud* cloud);
EPC_API epc_status epc_cloud_positions(const epc_cloud* cloud, double* out, size_t capacity);
EPC_API epc_status epc_cloud_colors(const epc_cloud* cloud, double* out, size_t capacity);
EPC_API epc_status epc_cloud_labels(const epc_cloud* cloud, uint32_t* out, size_t capacity);

/* Synthetic labeled scene `index` of the configured generator. */
EPC_API epc_status epc_scene_generate(const epc_config* cfg, uint64_t index, epc_cloud** out);

/* Two augmented views; point i of each view corresponds to point i of `cloud`. */
EPC_API epc_status epc_cloud_view_pair(const epc_cloud* cloud, const epc_config* cfg,
                                       uint64_t seed, epc_cloud** view1, epc_cloud** view2);

/* ---- superpoints -------------------------------------------------------- */

/* K-means superpoints. target_segments == 0 uses kmeans.segments from cfg.
 * `clamped` (may be NULL) is set to 1 when the target exceeded N. */
EPC_API epc_status epc_segments_kmeans(const epc_cloud* cloud, const epc_config* cfg,
                                       size_t target_segments, epc_segments** out,
                                       int* clamped);
EPC_API epc_status epc_segments_create(size_t n, const uint32_t* segment_of, size_t num_segments,
                                       epc_segments** out);
EPC_API void epc_segments_destroy(epc_segments* seg);
EPC_API size_t epc_segments_count(const epc_segments* seg);
EPC_API size_t epc_segments_points(const epc_segments* seg);
EPC_API epc_status epc_segments_ids(const epc_segments* seg, uint32_t* out, size_t capacity);
/* One decimal segment id per line. */
EPC_API epc_status epc_segments_save(const epc_segments* seg, const char* path);

/* ---- losses ------------------------------------------------------------- */

/* f1, f2: n*c doubles row-major. grad_f1/grad_f2 may be NULL, otherwise n*c.
 * Loss settings come from the loss.* keys of cfg. seg is required for AG/EP. */
EPC_API epc_status epc_loss_eval(epc_loss_kind kind, size_t n, size_t c, const double* f1,
                                 const double* f2, const epc_segments* seg, const epc_config* cfg,
                                 uint64_t sample_seed, double* value, double* grad_f1,
                                 double* grad_f2);
EPC_API epc_status epc_loss_oracle(epc_loss_kind kind, size_t n, size_t c, const double* f1,
                                   const double* f2, const epc_segments* seg,
                                   const epc_config* cfg, double* value);
EPC_API epc_status epc_count_pairs(epc_loss_kind kind, uint64_t n, uint64_t m, uint64_t c,
                                   uint64_t* positives, uint64_t* negatives);

/* ---- encoder and training ----------------------------------------------- */

EPC_API epc_status epc_model_init(const epc_config* cfg, epc_model** out);
EPC_API epc_status epc_model_load(const char* path, epc_model** out);
EPC_API epc_status epc_model_save(const epc_model* model, const char* path);
EPC_API void epc_model_destroy(epc_model* model);
EPC_API uint64_t epc_model_hash(const epc_model* model);
EPC_API size_t epc_model_channels(const epc_model* model);
/* Embedding of `cloud`: epc_cloud_size(cloud) * channels doubles. */
EPC_API epc_status epc_model_embed(const epc_model* model, const epc_cloud* cloud, double* out,
                                   size_t capacity);

typedef void (*epc_step_callback)(uint64_t step, uint64_t epoch, double loss, double lr,
                                  void* userdata);

/* Runs the configured pre-training on `scenes`. Either output may be NULL. */
EPC_API epc_status epc_pretrain(const epc_config* cfg, const epc_cloud* const* scenes,
                                size_t count, epc_step_callback on_step, void* userdata,
                                epc_model** model, epc_history** history);
EPC_API void epc_history_destroy(epc_history* history);
EPC_API size_t epc_history_length(const epc_history* history);
EPC_API epc_status epc_history_loss(const epc_history* history, double* out, size_t capacity);
/* "step,epoch,loss,lr" CSV. */
EPC_API const char* epc_history_csv(epc_history* history);

/* Linear probe of frozen embeddings; label fraction from probe.label_fraction. */
EPC_API epc_status epc_probe(const epc_model* model, const epc_config* cfg,
                             const epc_cloud* const* train, size_t train_count,
                             const epc_cloud* const* test, size_t test_count,
                             epc_probe_result** out);
EPC_API void epc_probe_result_destroy(epc_probe_result* result);
EPC_API double epc_probe_accuracy(const epc_probe_result* result);
/* Newline-separated warnings, empty when none. */
EPC_API const char* epc_probe_warnings(const epc_probe_result* result);

/* Mean |cosine| between distinct channel maps over the scenes. */
EPC_API epc_status epc_channel_redundancy(const epc_model* model, const epc_cloud* const* scenes,
                                          size_t count, double* out);

/* ---- benchmark ---------------------------------------------------------- */

EPC_API epc_status epc_bench(const epc_config* cfg, epc_loss_kind kind, const size_t* sizes,
                             size_t count, epc_bench_report** out);
EPC_API void epc_bench_report_destroy(epc_bench_report* report);
EPC_API const char* epc_bench_report_csv(epc_bench_report* report);
EPC_API const char* epc_bench_report_table(epc_bench_report* report);
EPC_API double epc_bench_report_exponent(const epc_bench_report* report);
EPC_API epc_status epc_fit_exponent(const double* sizes, const double* measurements, size_t count,
                                    double* out);

/* ---- self check --------------------------------------------------------- */

/* Oracle-equivalence and gradient-check suites. Returns EPC_OK when the
 * suites ran; *passed reports the verdict. */
EPC_API epc_status epc_self_check(uint64_t seed, size_t oracle_instances,
                                  size_t gradient_instances, epc_check_report** out,
                                  int* passed);
EPC_API void epc_check_report_destroy(epc_check_report* report);
EPC_API const char* epc_check_report_text(const epc_check_report* report);

#ifdef __cplusplus
}
#endif

#endif /* EPCONTRAST_H_ */
