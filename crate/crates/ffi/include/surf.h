#ifndef SURF_H
#define SURF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SurfStatus {
  SURF_STATUS_OK = 0,
  SURF_STATUS_NULL_POINTER = 1,
  SURF_STATUS_INVALID_ARGUMENT = 2,
  SURF_STATUS_DIMENSION = 3,
  SURF_STATUS_CONTRACT = 4,
  SURF_STATUS_NOT_READY = 5,
  SURF_STATUS_CONFLICT = 6,
  SURF_STATUS_NOT_FOUND = 7,
  SURF_STATUS_CONFIG = 8,
  SURF_STATUS_FORMAT = 9,
  SURF_STATUS_IO = 10,
  SURF_STATUS_PANIC = 11,
} SurfStatus;

// Experiment settings, built from defaults, a file or `key=value` pairs.
typedef struct SurfConfig SurfConfig;

// A policy restored from a checkpoint.
typedef struct SurfPolicy SurfPolicy;

// A learned reward ensemble.
typedef struct SurfReward SurfReward;

// A training run in progress.
typedef struct SurfTrainer SurfTrainer;

// Summary of a finished run.
typedef struct SurfRunSummary {
  double final_return;
  // NaN when no held-out labels exist.
  double heldout_accuracy;
  size_t labels_used;
  size_t sessions;
} SurfRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message, NUL-terminated and
// truncated to `capacity`, into `buf`. Returns the full message length
// excluding the terminator, or 0 when there is no error.
//
// # Safety
// `buf` must be null or point to `capacity` writable bytes.
size_t surf_last_error_message(char *buf, size_t capacity);

// Bradley-Terry probability that the second segment is preferred, given the
// two predicted returns.
double surf_preference_prob(double return0, double return1);

// # Safety
// `out` must be a valid pointer to write the handle to.
enum SurfStatus surf_config_new(struct SurfConfig **out);

// Parses a `key = value` config file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SurfStatus surf_config_load(const char *path, struct SurfConfig **out);

// # Safety
// `cfg` must be a live config handle; `key` and `value` NUL-terminated.
enum SurfStatus surf_config_set(struct SurfConfig *cfg, const char *key, const char *value);

// # Safety
// `cfg` must be null or a handle not yet freed.
void surf_config_free(struct SurfConfig *cfg);

// Validates `cfg` and builds a trainer. The config handle stays owned by the
// caller.
//
// # Safety
// `cfg` must be a live config handle and `out` a valid pointer.
enum SurfStatus surf_trainer_new(const struct SurfConfig *cfg, struct SurfTrainer **out);

// Runs state-entropy pre-training; a no-op when already done.
//
// # Safety
// `t` must be a live trainer handle.
enum SurfStatus surf_trainer_pretrain(struct SurfTrainer *t);

// Advances the main loop by up to `steps` environment steps, pre-training
// first if needed. `taken` may be null.
//
// # Safety
// `t` must be a live trainer handle; `taken` null or valid.
enum SurfStatus surf_trainer_advance(struct SurfTrainer *t, size_t steps, size_t *taken);

// Runs to completion and fills `summary`.
//
// # Safety
// `t` must be a live trainer handle and `summary` valid.
enum SurfStatus surf_trainer_run(struct SurfTrainer *t, struct SurfRunSummary *summary);

// Environment steps taken so far, or 0 for a null handle.
//
// # Safety
// `t` must be null or a live trainer handle.
size_t surf_trainer_env_steps(const struct SurfTrainer *t);

// Preference labels consumed so far, or 0 for a null handle.
//
// # Safety
// `t` must be null or a live trainer handle.
size_t surf_trainer_labels_used(const struct SurfTrainer *t);

// Writes the current reward ensemble and policy to `path`.
//
// # Safety
// `t` must be a live trainer handle and `path` NUL-terminated.
enum SurfStatus surf_trainer_save_checkpoint(const struct SurfTrainer *t, const char *path);

// # Safety
// `t` must be null or a handle not yet freed.
void surf_trainer_free(struct SurfTrainer *t);

// # Safety
// `path` must be NUL-terminated and `out` valid.
enum SurfStatus surf_reward_load(const char *path, struct SurfReward **out);

// Mean ensemble reward of one `(state, action)`.
//
// # Safety
// `r` must be a live handle, `state` and `action` must hold the given
// counts, and `out` must be valid.
enum SurfStatus surf_reward_eval(const struct SurfReward *r,
                                 const double *state,
                                 size_t state_len,
                                 const double *action,
                                 size_t action_len,
                                 double *out);

// # Safety
// `r` must be null or a handle not yet freed.
void surf_reward_free(struct SurfReward *r);

// # Safety
// `path` must be NUL-terminated and `out` valid.
enum SurfStatus surf_policy_load(const char *path, struct SurfPolicy **out);

// Action dimension of the policy, or 0 for a null handle.
//
// # Safety
// `p` must be null or a live policy handle.
size_t surf_policy_action_dim(const struct SurfPolicy *p);

// Deterministic action for `state`, written to `action[0..action_len]`.
//
// # Safety
// `p` must be a live handle; `state` and `action` must hold the given counts.
enum SurfStatus surf_policy_act(const struct SurfPolicy *p,
                                const double *state,
                                size_t state_len,
                                double *action,
                                size_t action_len);

// # Safety
// `p` must be null or a handle not yet freed.
void surf_policy_free(struct SurfPolicy *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURF_H */
