#ifndef ZEROSHAPE_H
#define ZEROSHAPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ZsStatus {
  ZS_STATUS_OK = 0,
  /**
   * Malformed or inconsistent input.
   */
  ZS_STATUS_INPUT_ERROR = 1,
  /**
   * The analysis is numerically ill-posed for this input.
   */
  ZS_STATUS_NUMERICAL_ERROR = 2,
  ZS_STATUS_NULL_POINTER = 3,
  /**
   * The caller's buffer is shorter than the result; the required length
   * was still written.
   */
  ZS_STATUS_BUFFER_TOO_SMALL = 4,
  /**
   * An internal panic was caught at the boundary.
   */
  ZS_STATUS_PANIC = 5,
} ZsStatus;

/**
 * Opaque analysis case: network, operating point and droop-augmented
 * Jacobian.
 */
typedef struct ZsCase ZsCase;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *zs_version(void);

/**
 * Message of the last failed call on this thread, empty after a success.
 * Valid until the next `zs_*` call on the same thread.
 */
const char *zs_last_error(void);

/**
 * Build a case from a built-in fixture name, including `random-seed-N`.
 *
 * # Safety
 * `name` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum ZsStatus zs_case_from_fixture(const char *name, struct ZsCase **out);

/**
 * Build a case from grid-model and operating-point JSON documents.
 *
 * # Safety
 * Both strings must be valid NUL-terminated strings and `out` a valid pointer.
 */
enum ZsStatus zs_case_from_json(const char *network_json, const char *op_json, struct ZsCase **out);

/**
 * Release a case. Null is ignored.
 *
 * # Safety
 * `case` must come from a `zs_case_from_*` call and not be freed twice.
 */
void zs_case_free(struct ZsCase *case_);

/**
 * Number of converter nodes.
 *
 * # Safety
 * `case` must be a live handle and `out` a valid pointer.
 */
enum ZsStatus zs_case_node_count(const struct ZsCase *case_, size_t *out);

/**
 * Nominal angular frequency in rad/s.
 *
 * # Safety
 * `case` must be a live handle and `out` a valid pointer.
 */
enum ZsStatus zs_case_omega0(const struct ZsCase *case_, double *out);

/**
 * Add frequency droop of the given gain at one node. Gains accumulate.
 *
 * # Safety
 * `case` must be a live handle.
 */
enum ZsStatus zs_case_apply_droop(struct ZsCase *case_, size_t node, double gain);

/**
 * Real positive zeros in rad/s, ascending. `len` receives the count.
 *
 * # Safety
 * `case` must be a live handle, `buf` valid for `cap` doubles and `len` a
 * valid pointer.
 */
enum ZsStatus zs_case_zeros(const struct ZsCase *case_, double *buf, size_t cap, size_t *len);

/**
 * Smallest real positive zero in rad/s.
 *
 * # Safety
 * `case` must be a live handle and `out` a valid pointer.
 */
enum ZsStatus zs_case_dominant_zero(const struct ZsCase *case_, double *out);

/**
 * Participation factors, zero sensitivities to droop gain and the
 * system sensitivity at the zero `z0`. Each array holds one entry per
 * node; `len` receives the node count.
 *
 * # Safety
 * `case` must be a live handle; the four arrays must be valid for `cap`
 * doubles and the remaining pointers valid.
 */
enum ZsStatus zs_case_sensitivity(const struct ZsCase *case_,
                                  double z0,
                                  double *p_re,
                                  double *p_im,
                                  double *dz_re,
                                  double *dz_im,
                                  size_t cap,
                                  size_t *len,
                                  double *s_sys_re,
                                  double *s_sys_im);

/**
 * Node indices ordered by descending zero sensitivity at `z0`, the best
 * droop placement first.
 *
 * # Safety
 * `case` must be a live handle, `order` valid for `cap` entries and `len`
 * a valid pointer.
 */
enum ZsStatus zs_case_rank(const struct ZsCase *case_,
                           double z0,
                           size_t *order,
                           size_t cap,
                           size_t *len);

/**
 * Whether the symmetric part of the real operating admittance is positive
 * definite (`passive` = 1), and its smallest eigenvalue.
 *
 * # Safety
 * `case` must be a live handle and the outputs valid pointers.
 */
enum ZsStatus zs_case_passivity_gate(const struct ZsCase *case_,
                                     int *passive,
                                     double *min_eigenvalue);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZEROSHAPE_H */
