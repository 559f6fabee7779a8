#ifndef HSFEM_H
#define HSFEM_H

/* Generated by cbindgen from the hsfem-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes mirroring the solver's error taxonomy (and the CLI's exit
 * codes for config/solver/invariant failures).
 */
typedef enum HsfemStatus {
  HSFEM_STATUS_OK = 0,
  HSFEM_STATUS_INVALID_ARGUMENT = 1,
  HSFEM_STATUS_CONFIG_ERROR = 2,
  HSFEM_STATUS_SOLVER_FAILURE = 3,
  HSFEM_STATUS_INVARIANT_VIOLATION = 4,
  HSFEM_STATUS_IO_ERROR = 5,
  HSFEM_STATUS_DOMAIN_ERROR = 6,
  HSFEM_STATUS_UNSUPPORTED_MESH = 7,
  HSFEM_STATUS_EVALUATION_ERROR = 8,
  HSFEM_STATUS_NULL_POINTER = 9,
  HSFEM_STATUS_PANIC = 10,
} HsfemStatus;

/**
 * Opaque configuration handle: a key/value set resolved and validated when
 * a run starts.
 */
typedef struct HsfemConfig HsfemConfig;

/**
 * Opaque result handle of one completed run.
 */
typedef struct HsfemOutcome HsfemOutcome;

/**
 * One per-step diagnostics record.
 */
typedef struct HsfemRecord {
  double t;
  double min_n;
  double max_n;
  double min_dtn;
  double mass;
  double mass_balance_residual;
  double energy_lhs;
  double energy_rhs;
  double grad_p;
  double complementarity;
  /**
   * NaN on all but the first record.
   */
  double h4_min;
  uint64_t snaps;
} HsfemRecord;

/**
 * Mesh certificate report.
 */
typedef struct HsfemMeshReport {
  uint64_t nodes;
  uint64_t elements;
  bool all_right_angled;
  bool all_nonobtuse;
  double max_angle;
  double h_diameter;
  double h_leg;
  double stiffness_max_offdiag;
} HsfemMeshReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. Valid until
 * the next failing call; never null.
 */
const char *hsfem_last_error_message(void);

/**
 * Crate version as a static string.
 */
const char *hsfem_version(void);

/**
 * Create an empty configuration. Populate it with [`hsfem_config_set`];
 * required keys are k, nu, P_max, tau, nx, ny, alpha.
 */
struct HsfemConfig *hsfem_config_new(void);

/**
 * Load a `key = value` configuration file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum HsfemStatus hsfem_config_load(const char *path, struct HsfemConfig **out);

/**
 * Set one configuration key (overwrites a previous value). Unknown keys are
 * rejected; values are validated when the configuration is used.
 *
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
enum HsfemStatus hsfem_config_set(struct HsfemConfig *cfg, const char *key, const char *value);

/**
 * # Safety
 * `cfg` must come from this library and not be freed twice.
 */
void hsfem_config_free(struct HsfemConfig *cfg);

/**
 * Integrate the configuration to t_final. On success the outcome handle
 * owns the mesh, the final state and the per-step diagnostics records.
 *
 * # Safety
 * `cfg` must be a live configuration handle and `out` a valid pointer.
 */
enum HsfemStatus hsfem_run(const struct HsfemConfig *cfg, struct HsfemOutcome **out);

/**
 * # Safety
 * `outcome` must come from this library and not be freed twice.
 */
void hsfem_outcome_free(struct HsfemOutcome *outcome);

/**
 * # Safety
 * `outcome` must be a live outcome handle.
 */
size_t hsfem_outcome_num_nodes(const struct HsfemOutcome *outcome);

/**
 * Number of completed steps (records = steps + 1).
 *
 * # Safety
 * `outcome` must be a live outcome handle.
 */
size_t hsfem_outcome_num_steps(const struct HsfemOutcome *outcome);

/**
 * # Safety
 * `outcome` must be a live outcome handle.
 */
double hsfem_outcome_final_time(const struct HsfemOutcome *outcome);

/**
 * Minimum entry of the initial residual vector (the measured monotonicity
 * precondition).
 *
 * # Safety
 * `outcome` must be a live outcome handle.
 */
double hsfem_outcome_h4_min(const struct HsfemOutcome *outcome);

/**
 * Copy the final nodal density into `buf` (length must equal the node
 * count).
 *
 * # Safety
 * `outcome` must be live; `buf` must point to `len` writable doubles.
 */
enum HsfemStatus hsfem_outcome_density(const struct HsfemOutcome *outcome, double *buf, size_t len);

/**
 * Copy the final nodal pressure into `buf`.
 *
 * # Safety
 * As [`hsfem_outcome_density`].
 */
enum HsfemStatus hsfem_outcome_pressure(const struct HsfemOutcome *outcome,
                                        double *buf,
                                        size_t len);

/**
 * Copy node coordinates into two buffers of node-count length.
 *
 * # Safety
 * `outcome` must be live; both buffers must hold `len` writable doubles.
 */
enum HsfemStatus hsfem_outcome_node_coords(const struct HsfemOutcome *outcome,
                                           double *x,
                                           double *y,
                                           size_t len);

/**
 * # Safety
 * `outcome` must be a live outcome handle.
 */
size_t hsfem_outcome_num_records(const struct HsfemOutcome *outcome);

/**
 * Fetch record `index` (0 is the initial state).
 *
 * # Safety
 * `outcome` must be live and `record` a valid pointer.
 */
enum HsfemStatus hsfem_outcome_record(const struct HsfemOutcome *outcome,
                                      size_t index,
                                      struct HsfemRecord *record);

/**
 * Build the configured mesh and report its angle classification and the
 * stiffness off-diagonal certificate.
 *
 * # Safety
 * `cfg` must be a live configuration handle and `report` a valid pointer.
 */
enum HsfemStatus hsfem_check_mesh(const struct HsfemConfig *cfg, struct HsfemMeshReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HSFEM_H */
