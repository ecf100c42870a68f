#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "discflow.h"

int main(void) {
  DfGrid *grid = NULL;
  if (df_grid_new(16, 32, &grid) != DF_STATUS_OK) return 1;
  size_t n = df_grid_len(grid);
  double radius = 1.0 / sqrt(3.0);
  DfData *data = NULL;
  if (df_data_new_constant(grid, 1.0, radius, &data) != DF_STATUS_OK) return 2;
  double *u = malloc(n * sizeof(double));
  if (df_cap_profile(grid, radius, 1.0, u, n) != DF_STATUS_OK) return 3;
  double residual = 1.0;
  if (df_problem_residual(data, u, n, &residual) != DF_STATUS_OK || !(residual < 1e-10)) return 4;

  DfFlowConfig cfg = df_flow_config_default();
  cfg.t_end = 0.05;
  DfFlow *flow = NULL;
  if (df_flow_new(data, u, n, 1.5707963267948966, &cfg, &flow) != DF_STATUS_OK) return 5;
  if (df_flow_run(flow) != DF_STATUS_OK) return 6;
  DfDiagnostics d;
  if (df_flow_diagnostics(flow, &d) != DF_STATUS_OK || d.t != 0.05) return 7;

  DfGrid *bad = NULL;
  if (df_grid_new(0, 0, &bad) != DF_STATUS_INVALID_ARGUMENT) return 8;
  char msg[128];
  if (df_last_error_message(msg, sizeof msg) == 0) return 9;

  printf("residual %.3e mass %.6f\n", residual, d.mass);
  df_flow_free(flow);
  df_data_free(data);
  df_grid_free(grid);
  free(u);
  return 0;
}
