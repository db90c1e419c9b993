#ifndef CML_H
#define CML_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CmlStatus {
  CML_STATUS_OK = 0,
  CML_STATUS_NULL_POINTER = 1,
  CML_STATUS_INVALID_ARGUMENT = 2,
  CML_STATUS_INFEASIBLE_TOPOLOGY = 3,
  CML_STATUS_NON_CONVERGENCE = 4,
  CML_STATUS_IO = 5,
  CML_STATUS_INCONCLUSIVE = 6,
  CML_STATUS_PANIC = 7,
} CmlStatus;

// Weighted atoms on the torus.
typedef struct CmlDivisor CmlDivisor;

// Torus grid sample.
typedef struct CmlField CmlField;

// Converged solution of the singular Liouville equation.
typedef struct CmlSolution CmlSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *cml_last_error_message(void);

// Copies `n * n` row-major samples into a new torus field.
//
// # Safety
// `values` must point to `n * n` doubles; `out` must be writable.
enum CmlStatus cml_field_new(size_t n, const double *values, struct CmlField **out);

// Grid size per axis, or 0 for NULL.
//
// # Safety
// `field` must be NULL or a live handle.
size_t cml_field_size(const struct CmlField *field);

// Copies the samples into `buf`, which must hold `len >= n * n` doubles.
//
// # Safety
// `field` must be a live handle and `buf` writable for `len` doubles.
enum CmlStatus cml_field_values(const struct CmlField *field, double *buf, size_t len);

// # Safety
// `field` must be NULL or a handle not yet freed.
void cml_field_free(struct CmlField *field);

// Builds a divisor from `count` atoms at `(xs[i], ys[i])` with weights
// `betas[i]`. Weights below −1 are rejected.
//
// # Safety
// The three arrays must hold `count` doubles; `out` must be writable.
enum CmlStatus cml_divisor_new(const double *xs,
                               const double *ys,
                               const double *betas,
                               size_t count,
                               struct CmlDivisor **out);

// Euler characteristic of the torus with this divisor, or NaN for NULL.
//
// # Safety
// `divisor` must be NULL or a live handle.
double cml_divisor_euler_characteristic(const struct CmlDivisor *divisor);

// # Safety
// `divisor` must be NULL or a handle not yet freed.
void cml_divisor_free(struct CmlDivisor *divisor);

// Solves with constant curvature `curvature` on an `n × n` grid. All
// weights must exceed −1; use [`cml_continue_cusp`] for cusps.
//
// # Safety
// `divisor` must be a live handle; `out` must be writable.
enum CmlStatus cml_solve(const struct CmlDivisor *divisor,
                         double curvature,
                         size_t n,
                         double tol,
                         struct CmlSolution **out);

// Like [`cml_solve`] with a sampled curvature field. Bounds are checked
// on the grid the field was sampled on.
//
// # Safety
// `divisor` and `curvature` must be live handles; `out` must be writable.
enum CmlStatus cml_solve_grid(const struct CmlDivisor *divisor,
                              const struct CmlField *curvature,
                              double tol,
                              struct CmlSolution **out);

// Runs the default cone-to-cusp schedule towards `target` with constant
// curvature. Stage areas are written to `areas` (up to `stages` entries)
// and the last stage's solution to `out`.
//
// # Safety
// `target` must be a live handle, `areas` NULL or writable for `stages`
// doubles, `out` writable.
enum CmlStatus cml_continue_cusp(const struct CmlDivisor *target,
                                 double curvature,
                                 size_t n,
                                 uint32_t stages,
                                 double tol,
                                 double *areas,
                                 struct CmlSolution **out);

// Total area of the metric e^{2u}|dz|², or NaN for NULL.
//
// # Safety
// `sol` must be NULL or a live handle.
double cml_solution_area(const struct CmlSolution *sol);

// |∫K dA − 2πχ|, or NaN for NULL.
//
// # Safety
// `sol` must be NULL or a live handle.
double cml_solution_gb_defect(const struct CmlSolution *sol);

// Final Newton residual (sup norm), or NaN for NULL.
//
// # Safety
// `sol` must be NULL or a live handle.
double cml_solution_residual(const struct CmlSolution *sol);

// Newton iterations used, or 0 for NULL.
//
// # Safety
// `sol` must be NULL or a live handle.
size_t cml_solution_iterations(const struct CmlSolution *sol);

// Regular part v of the solution as a new field handle.
//
// # Safety
// `sol` must be a live handle; `out` must be writable.
enum CmlStatus cml_solution_regular_part(const struct CmlSolution *sol, struct CmlField **out);

// # Safety
// `sol` must be NULL or a handle not yet freed.
void cml_solution_free(struct CmlSolution *sol);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CML_H */
