#ifndef NBALLS_H
#define NBALLS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every call.
 */
typedef enum NballsStatus {
  NBALLS_STATUS_OK = 0,
  NBALLS_STATUS_NULL_POINTER = 1,
  NBALLS_STATUS_INVALID_ARGUMENT = 2,
  /*
   The orbit reached a singular (triple or floor-plus-pair) collision.
   */
  NBALLS_STATUS_SINGULAR = 3,
  /*
   The configuration text could not be parsed or validated.
   */
  NBALLS_STATUS_CONFIG = 4,
  NBALLS_STATUS_IO = 5,
  /*
   The output buffer is too small; the required length was stored.
   */
  NBALLS_STATUS_BUFFER_TOO_SMALL = 6,
  /*
   The experiment ran and raised red flags (see its report).
   */
  NBALLS_STATUS_RED_FLAG = 7,
  NBALLS_STATUS_INTERNAL = 8,
} NballsStatus;

/*
 Masses and energy.
 */
typedef struct NballsConfig NballsConfig;

/*
 Event-driven simulator owning its configuration.
 */
typedef struct NballsSimulator NballsSimulator;

/*
 One collision. `kind` is 0 for the floor and `i` for the pair `(i, i+1)`.
 */
typedef struct NballsEvent {
  uint64_t n;
  double t;
  uint32_t kind;
} NballsEvent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated)
 and stores its length without the NUL in `len_out`.

 # Safety
 `buf` must be null or writable for `cap` bytes; `len_out` must be null or valid.
 */
enum NballsStatus nballs_last_error(char *buf, size_t cap, size_t *len_out);

/*
 Library version as a static NUL-terminated string.
 */
const char *nballs_version(void);

/*
 Creates a configuration from `n` strictly decreasing masses and an energy.

 # Safety
 `masses` must point to `n` doubles; `out` must be valid for writing.
 */
enum NballsStatus nballs_config_new(const double *masses,
                                    size_t n,
                                    double energy,
                                    struct NballsConfig **out);

/*
 # Safety
 `cfg` must be null or a handle from [`nballs_config_new`] not yet freed.
 */
void nballs_config_free(struct NballsConfig *cfg);

/*
 Number of balls.

 # Safety
 `cfg` must be a valid handle.
 */
size_t nballs_config_balls(const struct NballsConfig *cfg);

/*
 Simulator started from the state sampled with `seed` on the energy surface.

 # Safety
 `cfg` must be a valid handle; `out` must be valid for writing.
 */
enum NballsStatus nballs_simulator_new(const struct NballsConfig *cfg,
                                       uint64_t seed,
                                       struct NballsSimulator **out);

/*
 Simulator started from explicit heights `q` and velocities `v` (bottom ball first).

 # Safety
 `q` and `v` must point to `n` doubles; `cfg` must be valid; `out` writable.
 */
enum NballsStatus nballs_simulator_from_state(const struct NballsConfig *cfg,
                                              double t,
                                              const double *q,
                                              const double *v,
                                              size_t n,
                                              struct NballsSimulator **out);

/*
 # Safety
 `sim` must be null or a live simulator handle.
 */
void nballs_simulator_free(struct NballsSimulator *sim);

/*
 Advances to the next collision and describes it in `event`.

 Simultaneous commuting collisions are returned one per call, in order.

 # Safety
 `sim` must be a live handle; `event` must be valid for writing.
 */
enum NballsStatus nballs_simulator_step(struct NballsSimulator *sim, struct NballsEvent *event);

/*
 Copies the current state (time, heights, velocities) out of the simulator.

 # Safety
 `t` must be writable; `q` and `v` must be writable for `n` doubles.
 */
enum NballsStatus nballs_simulator_state(const struct NballsSimulator *sim,
                                         double *t,
                                         double *q,
                                         double *v,
                                         size_t n);

/*
 Lyapunov exponents per collision (descending) of the orbit sampled with
 `seed`, over `steps` collisions. `out` receives `2 (N - 1)` values.

 # Safety
 `cfg` must be valid; `out` writable for `len` doubles.
 */
enum NballsStatus nballs_lyapunov(const struct NballsConfig *cfg,
                                  uint64_t seed,
                                  size_t steps,
                                  size_t every,
                                  double *out,
                                  size_t len);

/*
 Time after which every sampled closed-cone vector has `Q > e0`; a
 negative value means the cutoff was reached first.

 # Safety
 `cfg` must be valid; `tau` writable.
 */
enum NballsStatus nballs_tau(const struct NballsConfig *cfg,
                             uint64_t seed,
                             double e0,
                             size_t interior,
                             size_t boundary,
                             size_t cutoff,
                             double *tau);

/*
 Least expansion `sigma` on the cone of a `2d x 2d` matrix given row-major.

 # Safety
 `m` must point to `(2d)^2` doubles; `sigma` writable.
 */
enum NballsStatus nballs_sigma(const double *m, size_t d, uint64_t seed, double *sigma);

/*
 Parses and runs an experiment configuration, writing its artifacts.
 Returns [`NballsStatus::RedFlag`] when the run raised red flags.

 # Safety
 `config_text` must be a NUL-terminated UTF-8 string.
 */
enum NballsStatus nballs_run_experiment(const char *config_text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NBALLS_H */
