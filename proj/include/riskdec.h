#ifndef RISKDEC_H
#define RISKDEC_H

/*
 * C interface to the risk-decomposition toolkit. Datasets and probes are
 * opaque handles; structured results travel as JSON strings that the caller
 * releases with riskdec_string_free. Every function returns a status code;
 * on failure riskdec_last_error() describes the problem for the calling
 * thread.
 *
 * Status codes match the CLI exit codes: 0 success, 2 caller/contract error,
 * 3 data or format error, 4 numerical failure.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RISKDEC_API __declspec(dllexport)
#else
#define RISKDEC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum riskdec_status {
  RISKDEC_OK = 0,
  RISKDEC_ERR_USAGE = 2,
  RISKDEC_ERR_DATA = 3,
  RISKDEC_ERR_NUMERIC = 4
} riskdec_status;

typedef struct riskdec_dataset riskdec_dataset;
typedef struct riskdec_probe riskdec_probe;

RISKDEC_API const char* riskdec_version(void);

/* Message for the most recent failure on this thread; empty if none. */
RISKDEC_API const char* riskdec_last_error(void);

RISKDEC_API void riskdec_string_free(char* s);

/* -------- datasets -------- */

RISKDEC_API riskdec_status riskdec_dataset_load_fvec(const char* path, riskdec_dataset** out);
RISKDEC_API riskdec_status riskdec_dataset_load_csv(const char* path, int has_header,
                                                    riskdec_dataset** out);
RISKDEC_API riskdec_status riskdec_dataset_save_fvec(const riskdec_dataset* ds, const char* path);

/* features: n*d row-major doubles; labels: n entries, each < n_classes. */
RISKDEC_API riskdec_status riskdec_dataset_create(const double* features, const uint32_t* labels,
                                                  uint32_t n, uint32_t d, uint32_t n_classes,
                                                  const char* name, riskdec_dataset** out);
RISKDEC_API void riskdec_dataset_free(riskdec_dataset* ds);

RISKDEC_API uint32_t riskdec_dataset_rows(const riskdec_dataset* ds);
RISKDEC_API uint32_t riskdec_dataset_dim(const riskdec_dataset* ds);
RISKDEC_API uint32_t riskdec_dataset_classes(const riskdec_dataset* ds);
RISKDEC_API riskdec_status riskdec_dataset_copy_features(const riskdec_dataset* ds, double* out);
RISKDEC_API riskdec_status riskdec_dataset_copy_labels(const riskdec_dataset* ds, uint32_t* out);

/* -------- probes -------- */

/* config_json (nullable): {"grad_tol": 1e-6, "max_iter": 500, "seed": 0} */
RISKDEC_API riskdec_status riskdec_probe_train(const riskdec_dataset* train, double lambda,
                                               const char* config_json, riskdec_probe** out);
RISKDEC_API void riskdec_probe_free(riskdec_probe* probe);
RISKDEC_API riskdec_status riskdec_probe_predict(const riskdec_probe* probe,
                                                 const double* features, uint32_t n, uint32_t d,
                                                 uint32_t* labels_out);
RISKDEC_API riskdec_status riskdec_probe_risk(const riskdec_probe* probe,
                                              const riskdec_dataset* eval_ds, double* risk_out);
RISKDEC_API riskdec_status riskdec_probe_to_json(const riskdec_probe* probe, char** json_out);

/* -------- risk decomposition -------- */

/*
 * options_json keys (all optional unless noted):
 *   "seed": integer               sampling + tuning seed (default 0)
 *   "sub_size": integer           carved subset size (default min(|test|, |train|/10))
 *   "ref_risk": number            externally supplied reference risk; exactly one
 *                                 of ref_risk / raw_train must be given
 *   "bayes_risk": number          irreducible risk to subtract (default 0)
 *   "lambda": number              fixed penalty instead of tuning
 *   "lambda_grid": [numbers]      tuning grid (default 7 points 1e-4..1e2)
 *   "val_fraction": number        tuning slice fraction (default 0.1)
 *   "grad_tol", "max_iter":       trainer controls
 * Result JSON: {hr_FF, hr_AF, hr_AS, hr_US, approx, usability, probe_gen,
 *               encoder_gen, bayes_risk, total, flags[]}
 */
RISKDEC_API riskdec_status riskdec_decompose(const riskdec_dataset* train,
                                             const riskdec_dataset* test,
                                             const riskdec_dataset* raw_train /* nullable */,
                                             const char* options_json /* nullable */,
                                             char** result_json);

/* Swapped-order generalization errors; same options minus the hr_FF source. */
RISKDEC_API riskdec_status riskdec_alternative(const riskdec_dataset* train,
                                               const riskdec_dataset* test,
                                               const char* options_json /* nullable */,
                                               char** result_json);

/*
 * options_json: {"settings": ["full","30-shot","1%",...], "seeds": [ints],
 *                plus the tuning/trainer keys above}
 */
RISKDEC_API riskdec_status riskdec_fewshot(const riskdec_dataset* train,
                                           const riskdec_dataset* test,
                                           const char* options_json /* nullable */,
                                           char** result_json);

/* -------- representation statistics -------- */

/* Result: {effective_dim, uniformity, alignment?, warnings?} */
RISKDEC_API riskdec_status riskdec_repstats(const riskdec_dataset* z,
                                            const riskdec_dataset* pairs /* nullable */,
                                            char** result_json);

/* rows_json: [{"effective_dim":..,"uniformity":..,"alignment":..,"agg_risk":..},...] */
RISKDEC_API riskdec_status riskdec_stats_regression(const char* rows_json, char** result_json);

/* -------- scaling laws -------- */

RISKDEC_API riskdec_status riskdec_scaling_predict(double approx, double encoder_gen,
                                                   double usability, double probe_gen,
                                                   double n_decomposition, double n_probe,
                                                   double alpha, double w, double* risk_out);

/*
 * observations_json: array of {encoder, components{...}, N, n, observed_risk,
 * group?, p?}. options_json: {"holdout": "none"|"iid"|"group:<key>",
 * "law": "decomposition"|"standard"}.
 */
RISKDEC_API riskdec_status riskdec_scaling_fit(const char* observations_json,
                                               const char* options_json /* nullable */,
                                               char** result_json);

/* -------- synthetic tasks -------- */

/* task_json: {"n_classes","d_raw","sigma","delta"|"means","n_pre","n_tr","n_te","seed"} */
RISKDEC_API riskdec_status riskdec_synth_gen(const char* task_json, riskdec_dataset** pretrain,
                                             riskdec_dataset** train, riskdec_dataset** test);
RISKDEC_API riskdec_status riskdec_synth_bayes_risk(const char* task_json, double* risk_out,
                                                    double* std_error_out /* nullable */);

/* encoder_json: {"kind": "identity"|"constant"|"one_hot_train"|
 *   "random_projection"|"noisy_identity"|"pca_pretrained", ...params} */
RISKDEC_API riskdec_status riskdec_synth_apply_encoder(const char* encoder_json,
                                                       const riskdec_dataset* pretrain,
                                                       const riskdec_dataset* train,
                                                       const riskdec_dataset* ds,
                                                       riskdec_dataset** out);

/* encoders_json: array of encoder specs; result: one decomposition per spec. */
RISKDEC_API riskdec_status riskdec_synth_sweep(const char* task_json, const char* encoders_json,
                                               const char* options_json /* nullable */,
                                               char** result_json);

/* -------- design-choice analysis -------- */

/*
 * options_json: {"method": "ca"|"gla", "hparam": name, "metric": name,
 *   "controls": [names], "log_hparam": bool, "log_metric": bool}
 */
RISKDEC_API riskdec_status riskdec_analyze(const char* table_csv_path, const char* options_json,
                                           char** result_json);

/* -------- reporting -------- */

/* table_json: {"metrics":[..],"models":[{"id":..,"values":[..]},..]} */
RISKDEC_API riskdec_status riskdec_radar_normalize(const char* table_json, char** result_json);

RISKDEC_API riskdec_status riskdec_store_put(const char* store_dir, const char* command,
                                             const char* encoder_id, const char* config_json,
                                             const char* result_json, int force,
                                             int* was_cached /* nullable */,
                                             char** path_out /* nullable */);

/* Writes components.csv, radar.json, scaling_obs.json, frontier.csv. */
RISKDEC_API riskdec_status riskdec_report(const char* store_dir, const char* out_dir,
                                          char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* RISKDEC_H */
