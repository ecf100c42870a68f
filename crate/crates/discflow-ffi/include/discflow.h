#ifndef DISCFLOW_H
#define DISCFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Time integrator.
typedef enum DfScheme {
  DF_SCHEME_SEMI_IMPLICIT = 0,
  DF_SCHEME_EXPLICIT_RK4 = 1,
} DfScheme;

// Result code of every fallible call.
typedef enum DfStatus {
  DF_STATUS_OK = 0,
  DF_STATUS_NULL_POINTER = 1,
  DF_STATUS_INVALID_ARGUMENT = 2,
  DF_STATUS_INVALID_STATE = 3,
  DF_STATUS_NOT_SOLVABLE = 4,
  DF_STATUS_NO_CONVERGENCE = 5,
  DF_STATUS_BLOW_UP = 6,
  DF_STATUS_MONITOR_VIOLATION = 7,
  DF_STATUS_FINISHED = 8,
  DF_STATUS_IO = 9,
  DF_STATUS_PANIC = 10,
} DfStatus;

// Prescribed interior and boundary curvatures on a grid.
typedef struct DfData DfData;

// Running integrator. Owns copies of its grid and data.
typedef struct DfFlow DfFlow;

// Collocation grid on the closed unit disc.
typedef struct DfGrid DfGrid;

// Integrator settings; obtain defaults from [`df_flow_config_default`].
typedef struct DfFlowConfig {
  double dt_init;
  double dt_max;
  double cfl_safety;
  double t_end;
  enum DfScheme scheme;
} DfFlowConfig;

// Scalar diagnostics of a state.
typedef struct DfDiagnostics {
  double t;
  double energy;
  double mass;
  double rho;
  double alpha;
  double beta;
  double deviation_f;
  double deviation_g;
  double gauss_bonnet_residual;
} DfDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Length in bytes of the last error message on this thread, excluding the
// terminator; 0 when the last call succeeded.
size_t df_last_error_length(void);

// Copies the last error message into `buf` (NUL-terminated, truncated to
// `len - 1` bytes). Returns the number of bytes written, excluding the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t df_last_error_message(char *buf, size_t len);

// Creates a grid with `n_r` radial and `n_theta` angular nodes.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum DfStatus df_grid_new(size_t n_r, size_t n_theta, struct DfGrid **out);

// Releases a grid; null is ignored.
//
// # Safety
// `grid` must come from [`df_grid_new`] and not be used afterwards.
void df_grid_free(struct DfGrid *grid);

// Number of nodes, `n_r * n_theta`; 0 for a null grid.
//
// # Safety
// `grid` must be null or a live grid handle.
size_t df_grid_len(const struct DfGrid *grid);

// Writes the Cartesian coordinates of every node.
//
// # Safety
// `x` and `y` must point to `len` writable doubles.
enum DfStatus df_grid_nodes(const struct DfGrid *grid, double *x, double *y, size_t len);

// Creates data from nodal values of `f` (`n_r * n_theta`) and boundary
// values of `j` (`n_theta`).
//
// # Safety
// `f` and `j` must point to `f_len` and `j_len` readable doubles.
enum DfStatus df_data_new(const struct DfGrid *grid,
                          const double *f,
                          size_t f_len,
                          const double *j,
                          size_t j_len,
                          struct DfData **out);

// Creates constant data `f`, `j`.
//
// # Safety
// `grid` must be a live grid handle and `out` a valid handle slot.
enum DfStatus df_data_new_constant(const struct DfGrid *grid,
                                   double f,
                                   double j,
                                   struct DfData **out);

// Releases data; null is ignored.
//
// # Safety
// `data` must come from a `df_data_new*` call and not be used afterwards.
void df_data_free(struct DfData *data);

// Writes the cap conformal factor of the given radius and scale.
//
// # Safety
// `u` must point to `len` writable doubles.
enum DfStatus df_cap_profile(const struct DfGrid *grid,
                             double radius,
                             double scale,
                             double *u,
                             size_t len);

// Residual of the stationary problem for the conformal factor `u`.
//
// # Safety
// `u` must point to `len` readable doubles and `residual` be writable.
enum DfStatus df_problem_residual(const struct DfData *data,
                                  const double *u,
                                  size_t len,
                                  double *residual);

// Default integrator settings.
struct DfFlowConfig df_flow_config_default(void);

// Starts a flow from `(u, rho)` at `t = 0`.
//
// # Safety
// `u` must point to `len` readable doubles; `config` must be null (defaults)
// or valid; `out` must be a valid handle slot.
enum DfStatus df_flow_new(const struct DfData *data,
                          const double *u,
                          size_t len,
                          double rho,
                          const struct DfFlowConfig *config,
                          struct DfFlow **out);

// Releases a flow; null is ignored.
//
// # Safety
// `flow` must come from [`df_flow_new`] and not be used afterwards.
void df_flow_free(struct DfFlow *flow);

// Advances one step; the step size goes to `dt` when it is non-null.
// Returns [`DfStatus::Finished`] once `t_end` has been reached.
//
// # Safety
// `flow` must be a live flow handle; `dt` null or writable.
enum DfStatus df_flow_step(struct DfFlow *flow, double *dt);

// Steps until `t_end`.
//
// # Safety
// `flow` must be a live flow handle.
enum DfStatus df_flow_run(struct DfFlow *flow);

// Current time and `rho`.
//
// # Safety
// `flow` must be a live flow handle; `t` and `rho` null or writable.
enum DfStatus df_flow_time(struct DfFlow *flow, double *t, double *rho);

// Copies the current conformal factor.
//
// # Safety
// `u` must point to `len` writable doubles.
enum DfStatus df_flow_state(struct DfFlow *flow, double *u, size_t len);

// Diagnostics of the current state.
//
// # Safety
// `flow` must be a live flow handle and `out` writable.
enum DfStatus df_flow_diagnostics(struct DfFlow *flow, struct DfDiagnostics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISCFLOW_H */
