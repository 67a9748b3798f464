/* SPDX-License-Identifier: Apache-2.0 */
/* C interface to the uvcot library. Every function returns a status code;
 * on failure uvcot_last_error() describes the problem for the calling thread.
 * Handles are opaque and owned by the caller (free with the matching *_free). */
#ifndef UVCOT_H
#define UVCOT_H

#include <stddef.h>
#include <stdint.h>

#if defined(UVCOT_BUILDING_LIBRARY)
#define UVCOT_API __attribute__((visibility("default")))
#else
#define UVCOT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum uvcot_status {
  UVCOT_OK = 0,
  UVCOT_ERR_INVALID_ARGUMENT = 1,
  UVCOT_ERR_CONFIG = 2,
  UVCOT_ERR_IO = 3,
  UVCOT_ERR_PARSE = 4,          /* malformed JSON / JSONL / numbers */
  UVCOT_ERR_DIMENSION = 5,
  UVCOT_ERR_BACKEND = 6,        /* transport, HTTP status, unparseable model output */
  UVCOT_ERR_EMPTY_RESULT = 7,   /* no pairs produced or none usable */
  UVCOT_ERR_PARTIAL_ITERATION = 8,
  UVCOT_ERR_VERIFY_FAILED = 9,
  UVCOT_ERR_INTERNAL = 10
} uvcot_status;

typedef struct uvcot_config uvcot_config;
typedef struct uvcot_policy uvcot_policy;

UVCOT_API const char* uvcot_version(void);
/* Message for the last failing call on this thread; "" when none. */
UVCOT_API const char* uvcot_last_error(void);
/* CLI exit code for a status: 0 ok, 2 empty result, 3 partial iteration, 1 otherwise. */
UVCOT_API int uvcot_exit_code(uvcot_status status);
/* Releases strings returned through char** out-parameters. */
UVCOT_API void uvcot_string_free(char* s);

/* ---- configuration ---- */
/* Loads, applies UVCOT_API_KEY / UVCOT_API_BASE and validates. */
UVCOT_API uvcot_status uvcot_config_load(const char* path, uvcot_config** out);
/* Built-in defaults, not validated. */
UVCOT_API uvcot_status uvcot_config_default(uvcot_config** out);
UVCOT_API uvcot_status uvcot_config_parse(const char* text, uvcot_config** out);
/* "section.key" = value, same syntax as the config file. */
UVCOT_API uvcot_status uvcot_config_set(uvcot_config* cfg, const char* key, const char* value);
/* "no-gamma", "naive-dpo" or "single-pass". */
UVCOT_API uvcot_status uvcot_config_apply_ablation(uvcot_config* cfg, const char* name);
UVCOT_API uvcot_status uvcot_config_validate(const uvcot_config* cfg);
/* data.queries from the config file, or NULL. Valid until the handle changes. */
UVCOT_API const char* uvcot_config_queries_path(const uvcot_config* cfg);
UVCOT_API void uvcot_config_free(uvcot_config* cfg);

/* ---- policy checkpoints ---- */
UVCOT_API uvcot_status uvcot_policy_create(size_t feature_dim, uvcot_policy** out);
UVCOT_API uvcot_status uvcot_policy_load(const char* path, uvcot_policy** out);
UVCOT_API uvcot_status uvcot_policy_save(const uvcot_policy* policy, const char* path);
UVCOT_API size_t uvcot_policy_feature_dim(const uvcot_policy* policy);
/* Copies min(n, feature_dim) weights into out. */
UVCOT_API uvcot_status uvcot_policy_weights(const uvcot_policy* policy, double* out, size_t n);
UVCOT_API uvcot_status uvcot_policy_set_weights(uvcot_policy* policy, const double* w, size_t n);
UVCOT_API void uvcot_policy_free(uvcot_policy* policy);

/* ---- preference math ---- */
typedef struct uvcot_pair_logps {
  double logp_w_policy;
  double logp_w_ref;
  double logp_l_policy;
  double logp_l_ref;
  double s_w;
  double s_l;
} uvcot_pair_logps;

UVCOT_API double uvcot_sigmoid(double x);
UVCOT_API double uvcot_shifted_preference_prob(double r_w, double r_l, double delta_r);
UVCOT_API uvcot_status uvcot_sdpo_loss(const uvcot_pair_logps* p, double beta, double g_scale,
                                       double* out);
UVCOT_API uvcot_status uvcot_dpo_loss(const uvcot_pair_logps* p, double beta, double* out);
UVCOT_API uvcot_status uvcot_sdpo_grad_logps(const uvcot_pair_logps* p, double beta,
                                             double g_scale, double* d_logp_w,
                                             double* d_logp_l);

/* ---- whole commands ---- */
typedef struct uvcot_gen_data_summary {
  size_t queries;
  size_t skipped_queries;
  size_t pairs;
  size_t dropped_generation;
  size_t dropped_evaluation;
} uvcot_gen_data_summary;

/* policy_path may be NULL (uniform policy). Zero pairs gives
 * UVCOT_ERR_EMPTY_RESULT after the (empty) output files are written. */
UVCOT_API uvcot_status uvcot_run_gen_data(const uvcot_config* cfg, const char* queries_path,
                                          const char* out_path, const char* policy_path,
                                          uvcot_gen_data_summary* summary);

typedef struct uvcot_train_summary {
  size_t pairs;
  size_t skipped_pairs;
  size_t epochs;
  double loss_start;
  double loss_end;
} uvcot_train_summary;

/* loss_csv may be NULL (defaults to "<policy_out>.loss.csv"). */
UVCOT_API uvcot_status uvcot_run_train(const uvcot_config* cfg, const char* pairs_path,
                                       const char* queries_path, const char* policy_in,
                                       const char* policy_out, const char* loss_csv,
                                       uvcot_train_summary* summary);

typedef struct uvcot_iterate_summary {
  int completed_iterations;
  int aborted;
  double baseline_region_accuracy;
  double baseline_answer_score;
  double final_region_accuracy;
  double final_answer_score;
} uvcot_iterate_summary;

/* On abort the summary is still filled and UVCOT_ERR_PARTIAL_ITERATION returned. */
UVCOT_API uvcot_status uvcot_run_iterate(const uvcot_config* cfg, const char* queries_path,
                                         const char* out_dir, uvcot_iterate_summary* summary);

UVCOT_API uvcot_status uvcot_make_queries(const uvcot_config* cfg, size_t count, uint64_t seed,
                                          const char* out_path);

/* Runs the property suite. *report receives the pass/fail table (free with
 * uvcot_string_free). Returns UVCOT_ERR_VERIFY_FAILED if any property fails. */
UVCOT_API uvcot_status uvcot_run_verify(int inject_grad_sign_flip, char** report);

#ifdef __cplusplus
}
#endif

#endif /* UVCOT_H */
