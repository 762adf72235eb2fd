/* Generated by cbindgen; do not edit. */

#ifndef GGFA_H
#define GGFA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GgfaStatus {
  GGFA_STATUS_OK = 0,
  GGFA_STATUS_NULL_POINTER = 1,
  GGFA_STATUS_INVALID_ARGUMENT = 2,
  GGFA_STATUS_IO = 3,
  GGFA_STATUS_DATA = 4,
  GGFA_STATUS_NUMERICAL = 5,
  GGFA_STATUS_CAPACITY = 6,
  GGFA_STATUS_PANIC = 7,
} GgfaStatus;

typedef struct GgfaDataset GgfaDataset;

/*
 A model together with the column schema its parameters refer to.
 */
typedef struct GgfaModel GgfaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the calling thread's last error message into `buf` (NUL-terminated,
 truncated to `len - 1` bytes) and returns the full message length in bytes.
 Pass a null `buf` to query the length.
 */
size_t ggfa_last_error_message(char *buf, size_t len);

/*
 Reads a model document written by the command-line tool or `ggfa_model_save`.
 */
enum GgfaStatus ggfa_model_load(const char *path, struct GgfaModel **out);

enum GgfaStatus ggfa_model_save(const struct GgfaModel *model, const char *path);

/*
 Releases a model; null is ignored.
 */
void ggfa_model_free(struct GgfaModel *model);

/*
 Number of continuous variables, binary variables and latent dimensions.
 Any output pointer may be null.
 */
enum GgfaStatus ggfa_model_dims(const struct GgfaModel *model, size_t *p_x, size_t *q, size_t *p_z);

/*
 `log p(x, y)` of a complete row; `x` has `p_x` entries, `y` has `q`.
 */
enum GgfaStatus ggfa_model_log_joint(const struct GgfaModel *model,
                                     const double *x,
                                     const uint8_t *y,
                                     double *out);

/*
 Posterior mean (`p_z` entries) and, if `cov_out` is non-null, covariance
 (`p_z * p_z` entries) of the latent vector given a complete row.
 */
enum GgfaStatus ggfa_model_posterior(const struct GgfaModel *model,
                                     const double *x,
                                     const uint8_t *y,
                                     double *mean_out,
                                     double *cov_out);

/*
 Creates the canonical form of `model` as a new handle. If non-null,
 `ratios_out` receives the `p_z` contribution ratios.
 */
enum GgfaStatus ggfa_model_canonicalize(const struct GgfaModel *model,
                                        struct GgfaModel **out,
                                        double *ratios_out);

/*
 Log mixing weights of all `2^q` binary states; state `k` has variable `s`
 equal to bit `s` of `k`. `len` must equal `2^q`.
 */
enum GgfaStatus ggfa_model_mixing_table(const struct GgfaModel *model,
                                        double *log_pi_out,
                                        size_t len);

/*
 Reads a CSV data file described by a `name,kind` schema file.
 */
enum GgfaStatus ggfa_dataset_load_csv(const char *data_path,
                                      const char *schema_path,
                                      struct GgfaDataset **out);

/*
 Releases a dataset; null is ignored.
 */
void ggfa_dataset_free(struct GgfaDataset *dataset);

enum GgfaStatus ggfa_dataset_rows(const struct GgfaDataset *dataset, size_t *out);

/*
 Log-likelihood of a dataset, marginalizing missing cells.
 */
enum GgfaStatus ggfa_log_likelihood(const struct GgfaModel *model,
                                    const struct GgfaDataset *dataset,
                                    double *out);

/*
 Multi-start maximum-likelihood fit, returned in canonical form.
 `log_lik_out` may be null.
 */
enum GgfaStatus ggfa_fit(const struct GgfaDataset *dataset,
                         size_t p_z,
                         size_t n_restarts,
                         uint64_t seed,
                         struct GgfaModel **out,
                         double *log_lik_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GGFA_H */
