/* C interface to the instructav toolkit.
 *
 * Every call returns an iav_status. On failure the calling thread's last error
 * is set to a JSON document {"code","message","context"}; read it with
 * iav_last_error(). Strings handed back through char** outputs are owned by
 * the caller and released with iav_string_free(). */
#ifndef INSTRUCTAV_H
#define INSTRUCTAV_H

#include <stddef.h>
#include <stdint.h>

#if defined(INSTRUCTAV_BUILDING)
#define IAV_API __attribute__((visibility("default")))
#else
#define IAV_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum iav_status {
  IAV_OK = 0,
  IAV_E_INVALID_ARGUMENT = 1,
  IAV_E_CONFIG = 2,
  IAV_E_USAGE = 3,
  IAV_E_CORPUS_NOT_FOUND = 4,
  IAV_E_IO = 5,
  IAV_E_MALFORMED_LINE = 6,
  IAV_E_INSUFFICIENT_CORPUS = 7,
  IAV_E_INSUFFICIENT_VERIFIED = 8,
  IAV_E_TEMPLATE = 9,
  IAV_E_BACKEND_UNAVAILABLE = 10,
  IAV_E_AUTH_MISSING = 11,
  IAV_E_PROMPT_TOO_LONG = 12,
  IAV_E_UNKNOWN_ID = 13,
  IAV_E_DUPLICATE_ID = 14,
  IAV_E_MISSING_PREDICTION = 15,
  IAV_E_EMPTY_SEQUENCE = 16,
  IAV_E_DIMENSION_MISMATCH = 17,
  IAV_E_OUT_OF_RANGE = 18,
  IAV_E_DUPLICATE_RATING = 19,
  IAV_E_TRAINING_DIVERGED = 20,
  IAV_E_INTERNAL = 99
} iav_status;

/* Labels at the boundary. */
#define IAV_LABEL_NONE (-1)
#define IAV_LABEL_DIFFERENT_AUTHOR 0
#define IAV_LABEL_SAME_AUTHOR 1

typedef struct iav_context iav_context;
typedef struct iav_session iav_session;

IAV_API const char* iav_version(void);
/* Empty string when the thread has no recorded failure. */
IAV_API const char* iav_last_error(void);
IAV_API const char* iav_status_name(iav_status status);
/* Nonzero for usage and configuration errors (CLI exit code 2). */
IAV_API int iav_status_is_usage(iav_status status);
IAV_API void iav_string_free(char* s);

/* config_path may be NULL for defaults. */
IAV_API iav_status iav_context_create(const char* config_path, iav_context** out);
/* Dotted key and TOML literal, e.g. ("backend.retry_limit", "5"). Validated. */
IAV_API iav_status iav_context_set(iav_context* ctx, const char* key, const char* value);
/* Effective configuration as JSON. */
IAV_API iav_status iav_context_describe(const iav_context* ctx, char** out_json);
IAV_API void iav_context_destroy(iav_context* ctx);

typedef struct iav_build_options {
  const char* corpus_path;
  const char* corpus_name; /* NULL: file stem */
  const char* setting;     /* "cls" or "cls-expl" */
  size_t pool;             /* 0: train + test */
  size_t train;
  size_t test;
  const char* out_prefix;
} iav_build_options;

/* Seed comes from the context ("seed"). out_summary_json may be NULL. */
IAV_API iav_status iav_build_dataset(iav_context* ctx, const iav_build_options* options, char** out_summary_json);

IAV_API iav_status iav_generate_file(iav_context* ctx, const char* in_path, const char* out_path, size_t* out_count);

/* kept_path and dropped_path may be NULL. */
IAV_API iav_status iav_verify_file(iav_context* ctx, const char* in_path, const char* label_field,
                                   const char* kept_path, const char* dropped_path, char** out_summary_json);

/* labels_path and report_path may be NULL. out_table is the aligned text table. */
IAV_API iav_status iav_evaluate(iav_context* ctx, const char* gold_path, const char* pred_path,
                                const char* labels_path, const char* report_path, char** out_report_json,
                                char** out_table);

IAV_API iav_status iav_correlate(const char* scores_path, const char* pred_path, const char* gold_path,
                                 double fraction, char** out_json);

IAV_API iav_status iav_fewshot_prompts(iav_context* ctx, const char* test_path, const char* demos_path,
                                       const size_t* ks, size_t n_ks, const char* out_path, size_t* out_count);

typedef struct iav_lora_demo_options {
  size_t d;
  size_t r;
  size_t steps;
  double lr;
  uint64_t seed;
  const char* trace_csv_path; /* NULL: not written */
  const char* adapter_path;   /* NULL: not written */
} iav_lora_demo_options;

/* Summary JSON: base_accuracy, final_accuracy, final_loss, w0_unchanged. */
IAV_API iav_status iav_lora_demo(const iav_lora_demo_options* options, char** out_summary_json);

IAV_API iav_status iav_lora_param_budget(uint64_t d, uint64_t r, uint64_t layers, uint64_t matrices_per_layer,
                                         uint64_t base_params, uint64_t* out_trainable, double* out_ratio);

/* out_label receives IAV_LABEL_SAME_AUTHOR, IAV_LABEL_DIFFERENT_AUTHOR or IAV_LABEL_NONE. */
IAV_API iav_status iav_parse_answer(const char* text, int* out_label);

/* Uses the context's phrase policy; ctx may be NULL for the default policy.
 * Result JSON: passed, reason, matched_phrases. */
IAV_API iav_status iav_verify_alignment(const iav_context* ctx, const char* text, int label, char** out_json);

/* F1 of ROUGE-1, ROUGE-2 and ROUGE-L over tokenize()d text. */
IAV_API iav_status iav_rouge(const char* candidate, const char* reference, double* out_r1, double* out_r2,
                             double* out_rl);

/* Opens (creating if absent) an append-only ratings file and replays it. */
IAV_API iav_status iav_session_open(const iav_context* ctx, const char* ratings_path, iav_session** out);
/* Validates, then appends one line to the ratings file. timestamp may be NULL. */
IAV_API iav_status iav_session_record(iav_session* session, const char* sample_id, const char* evaluator_id,
                                      const char* system_name, int coverage, int relevance, int reasonableness,
                                      int persuasiveness, const char* timestamp);
IAV_API iav_status iav_session_has(const iav_session* session, const char* sample_id, const char* evaluator_id,
                                   const char* system_name, int* out_has);
IAV_API iav_status iav_session_size(const iav_session* session, size_t* out_size);
IAV_API iav_status iav_session_coverage_max(const iav_session* session, const char* system_name, int* out_max);
IAV_API iav_status iav_session_summary_json(const iav_session* session, char** out_json);
IAV_API iav_status iav_session_summary_table(const iav_session* session, char** out_table);
/* {"id","human_mean"} per sample. coverage_max <= 0 uses the rubric value for
 * system_name; system_name NULL or "" takes every rating. */
IAV_API iav_status iav_session_export_scores(const iav_session* session, const char* out_path,
                                             const char* system_name, int coverage_max, size_t* out_count);
IAV_API void iav_session_close(iav_session* session);

#ifdef __cplusplus
}
#endif

#endif
