#ifndef ORLICZFB_H
#define ORLICZFB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum OrliczStatus {
  ORLICZ_STATUS_OK = 0,
  ORLICZ_STATUS_NULL_ARGUMENT = 1,
  ORLICZ_STATUS_INVALID_ARGUMENT = 2,
  ORLICZ_STATUS_DOMAIN_ERROR = 3,
  ORLICZ_STATUS_NUMERICAL_ERROR = 4,
  ORLICZ_STATUS_INCONCLUSIVE = 5,
  ORLICZ_STATUS_IO_ERROR = 6,
} OrliczStatus;

/**
 * Opaque nodal field handle.
 */
typedef struct OrliczField OrliczField;

/**
 * Opaque N-function handle.
 */
typedef struct OrliczGFunction OrliczGFunction;

/**
 * Opaque grid handle (rectangle with Dirichlet data).
 */
typedef struct OrliczGrid OrliczGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * `g(t) = t^(p-1)`.
 */
enum OrliczStatus orlicz_gfunction_power(double p, struct OrliczGFunction **out);

/**
 * `g(t) = t^a ln(b t + c)`, `c >= 1`.
 */
enum OrliczStatus orlicz_gfunction_power_log(double a,
                                             double b,
                                             double c,
                                             struct OrliczGFunction **out);

/**
 * C¹ spliced powers with exponents `a1, a2`, splice point `s`, and
 * leading coefficient `c1`.
 */
enum OrliczStatus orlicz_gfunction_spliced(double a1,
                                           double a2,
                                           double s,
                                           double c1,
                                           struct OrliczGFunction **out);

/**
 * Weighted sum of `n` parts.
 *
 * # Safety
 * `parts` must point to `n` valid handles and `weights` to `n` doubles.
 */
enum OrliczStatus orlicz_gfunction_sum(const struct OrliczGFunction *const *parts,
                                       const double *weights,
                                       size_t n,
                                       struct OrliczGFunction **out);

enum OrliczStatus orlicz_gfunction_product(const struct OrliczGFunction *g1,
                                           const struct OrliczGFunction *g2,
                                           struct OrliczGFunction **out);

enum OrliczStatus orlicz_gfunction_compose(const struct OrliczGFunction *g1,
                                           const struct OrliczGFunction *g2,
                                           struct OrliczGFunction **out);

/**
 * # Safety
 * `f` must be a handle from one of the constructors, not yet freed.
 */
void orlicz_gfunction_free(struct OrliczGFunction *f);

/**
 * Certified lower ellipticity bound δ.
 */
double orlicz_gfunction_delta(const struct OrliczGFunction *f);

/**
 * Certified upper ellipticity bound g₀.
 */
double orlicz_gfunction_g0(const struct OrliczGFunction *f);

enum OrliczStatus orlicz_eval_g(const struct OrliczGFunction *f, double t, double *out);

enum OrliczStatus orlicz_eval_big_g(const struct OrliczGFunction *f, double t, double *out);

enum OrliczStatus orlicz_g_inverse(const struct OrliczGFunction *f, double y, double *out);

/**
 * Young conjugate `G̃(y) = ∫_0^y g⁻¹`.
 */
enum OrliczStatus orlicz_gtilde(const struct OrliczGFunction *f, double y, double *out);

/**
 * The slope `λ*` with `g(λ*)λ* − G(λ*) = λ`.
 */
enum OrliczStatus orlicz_lambda_star(const struct OrliczGFunction *f, double lambda, double *out);

/**
 * Empirical range of `t g'(t)/g(t)` on a log grid; returns
 * `NumericalError` when the certified bounds fail to bracket it.
 */
enum OrliczStatus orlicz_check_condition(const struct OrliczGFunction *f,
                                         double tmin,
                                         double tmax,
                                         size_t n,
                                         double *delta_emp,
                                         double *g0_emp);

/**
 * Uniform rectangle grid with zero Dirichlet data; `ny = 1` is 1D.
 */
enum OrliczStatus orlicz_grid_rectangle(size_t nx,
                                        size_t ny,
                                        double lx,
                                        double ly,
                                        struct OrliczGrid **out);

/**
 * # Safety
 * `g` must be a live grid handle.
 */
void orlicz_grid_free(struct OrliczGrid *g);

/**
 * Dirichlet data `(1 - x)^+ * scale` on the whole boundary.
 */
enum OrliczStatus orlicz_grid_set_phi0_strip(struct OrliczGrid *g, double scale);

/**
 * Dirichlet data from a full nodal array of length `nx * ny` (interior
 * entries ignored).
 *
 * # Safety
 * `values` must point to `n` doubles.
 */
enum OrliczStatus orlicz_grid_set_phi0_values(struct OrliczGrid *g, const double *values, size_t n);

/**
 * Minimize `J` with default options and the given seed and restart
 * count; returns a field handle.
 */
enum OrliczStatus orlicz_minimize(const struct OrliczGrid *g,
                                  const struct OrliczGFunction *f,
                                  double lambda,
                                  uint64_t seed,
                                  size_t restarts,
                                  struct OrliczField **out);

/**
 * # Safety
 * `f` must be a live field handle.
 */
void orlicz_field_free(struct OrliczField *f);

size_t orlicz_field_node_count(const struct OrliczField *f);

/**
 * Borrow the nodal values (row-major; valid while the handle lives).
 */
enum OrliczStatus orlicz_field_values(const struct OrliczField *f, const double **ptr, size_t *len);

/**
 * Write the field in the `ORLICZFB 1` format.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string.
 */
enum OrliczStatus orlicz_field_write(const struct OrliczField *f, const char *path);

/**
 * Read a field file.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string.
 */
enum OrliczStatus orlicz_field_read(const char *path, struct OrliczField **out);

/**
 * Exact 1D minimizer serialized as JSON (free with
 * `orlicz_string_free`).
 */
enum OrliczStatus orlicz_exact_solve_1d(double a,
                                        double b,
                                        double length,
                                        const struct OrliczGFunction *f,
                                        double lambda,
                                        char **json_out);

/**
 * Run the measurement suite; the report is returned as JSON (free with
 * `orlicz_string_free`). `weak_mode != 0` asserts only the
 * weak-solution bounds.
 */
enum OrliczStatus orlicz_verify(const struct OrliczField *u,
                                const struct OrliczGFunction *f,
                                double lambda,
                                int32_t weak_mode,
                                int32_t *pass,
                                char **json_out);

/**
 * # Safety
 * `s` must have been returned by this library and not yet freed.
 */
void orlicz_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORLICZFB_H */
