#ifndef SME_FFI_H
#define SME_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Controller selector.
 */
typedef enum SmeController {
  SME_CONTROLLER_SME = 0,
  SME_CONTROLLER_CPG_RBF = 1,
} SmeController;

/**
 * Episode reset behaviour for [`sme_env_reset`].
 */
typedef enum SmeReset {
  SME_RESET_FULL = 0,
  SME_RESET_POSE_ONLY = 1,
  SME_RESET_NONE = 2,
} SmeReset;

/**
 * Result code of every fallible call.
 */
typedef enum SmeStatus {
  SME_STATUS_OK = 0,
  SME_STATUS_NULL_POINTER = 1,
  SME_STATUS_CONFIG = 2,
  SME_STATUS_DIMENSION = 3,
  SME_STATUS_DEGENERATE = 4,
  SME_STATUS_INSUFFICIENT_DATA = 5,
  SME_STATUS_EXPLORATION_MODE = 6,
  SME_STATUS_PARSE = 7,
  SME_STATUS_IO = 8,
  /**
   * The handle is in the wrong state for the call (e.g. no results yet).
   */
  SME_STATUS_STATE = 9,
  SME_STATUS_PANIC = 10,
} SmeStatus;

/**
 * Surrogate hexapod with its current world state.
 */
typedef struct SmeEnv SmeEnv;

/**
 * Resolved experiment configuration plus the learning curve of its last run.
 */
typedef struct SmeExperiment SmeExperiment;

/**
 * Feature generator of one controller.
 */
typedef struct SmeRhythm SmeRhythm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t sme_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sme_version(void);

/**
 * Creates the default feature generator of `controller`.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum SmeStatus sme_rhythm_new(enum SmeController controller, struct SmeRhythm **out);

/**
 * # Safety
 * `h` must be null or a handle from [`sme_rhythm_new`] not yet freed.
 */
void sme_rhythm_free(struct SmeRhythm *h);

/**
 * Number of features; 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live rhythm handle.
 */
size_t sme_rhythm_n_features(const struct SmeRhythm *h);

/**
 * Copies the current features into `buf`, which must hold exactly
 * [`sme_rhythm_n_features`] values.
 *
 * # Safety
 * `h` must be a live rhythm handle; `buf` valid for `len` doubles.
 */
enum SmeStatus sme_rhythm_features(const struct SmeRhythm *h, double *buf, size_t len);

/**
 * Advances the generator by one control step.
 *
 * # Safety
 * `h` must be a live rhythm handle.
 */
enum SmeStatus sme_rhythm_advance(struct SmeRhythm *h);

/**
 * Returns the generator to its initial state.
 *
 * # Safety
 * `h` must be a live rhythm handle.
 */
enum SmeStatus sme_rhythm_reset(struct SmeRhythm *h);

/**
 * Creates the default hexapod surrogate at its neutral pose.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum SmeStatus sme_env_new(struct SmeEnv **out);

/**
 * # Safety
 * `h` must be null or a handle from [`sme_env_new`] not yet freed.
 */
void sme_env_free(struct SmeEnv *h);

/**
 * Number of joint commands [`sme_env_step`] expects.
 *
 * # Safety
 * `h` must be null or a live env handle.
 */
size_t sme_env_n_joints(const struct SmeEnv *h);

/**
 * # Safety
 * `h` must be a live env handle.
 */
enum SmeStatus sme_env_reset(struct SmeEnv *h, enum SmeReset mode);

/**
 * Applies one step of joint commands and writes the step reward.
 *
 * # Safety
 * `h` must be a live env handle; `commands` valid for `len` doubles;
 * `reward` valid for one write.
 */
enum SmeStatus sme_env_step(struct SmeEnv *h, const double *commands, size_t len, double *reward);

/**
 * Writes the body pose `(x, y, psi)`.
 *
 * # Safety
 * `h` must be a live env handle; the outputs valid for one write each.
 */
enum SmeStatus sme_env_pose(const struct SmeEnv *h, double *x, double *y, double *psi);

/**
 * Parses a `key = value` configuration (same schema as the CLI config
 * file) into an experiment handle.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out` valid for one write.
 */
enum SmeStatus sme_experiment_new(const char *config, struct SmeExperiment **out);

/**
 * # Safety
 * `h` must be null or a handle from [`sme_experiment_new`] not yet freed.
 */
void sme_experiment_free(struct SmeExperiment *h);

/**
 * Runs every repetition with at most `jobs` worker threads and stores the
 * learning curve in the handle.
 *
 * # Safety
 * `h` must be a live experiment handle.
 */
enum SmeStatus sme_experiment_run(struct SmeExperiment *h, size_t jobs);

/**
 * # Safety
 * `h` must be null or a live experiment handle.
 */
size_t sme_experiment_repetitions(const struct SmeExperiment *h);

/**
 * # Safety
 * `h` must be null or a live experiment handle.
 */
size_t sme_experiment_episodes(const struct SmeExperiment *h);

/**
 * Copies the episodic rewards of `repetition`; `len` must equal the
 * episode count.
 *
 * # Safety
 * `h` must be a live experiment handle; `buf` valid for `len` doubles.
 */
enum SmeStatus sme_experiment_rewards(const struct SmeExperiment *h,
                                      size_t repetition,
                                      double *buf,
                                      size_t len);

/**
 * Median over repetitions of the mean of each run's last few episodes.
 *
 * # Safety
 * `h` must be a live experiment handle; `out` valid for one write.
 */
enum SmeStatus sme_experiment_final_reward(const struct SmeExperiment *h, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SME_FFI_H */
