/* msjump: multi-state jump process simulation and occurrence/exposure
 * estimation toolkit.
 *
 * C interface to the shared library. All functions return msjump_status;
 * on failure msjump_last_error() carries a thread-local message that stays
 * valid until the next failing call on the same thread. Objects returned
 * through out-parameters are owned by the caller and released with the
 * matching *_free function.
 */
#ifndef MSJUMP_H
#define MSJUMP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    MSJUMP_OK = 0,
    MSJUMP_ERR_VALIDATION = 1, /* bad input: config, expression, precondition */
    MSJUMP_ERR_RUNTIME = 2     /* I/O or numerical failure */
} msjump_status;

const char* msjump_version(void);
const char* msjump_last_error(void);

/* --- intensity expressions ---------------------------------------------- */

typedef struct msjump_expr msjump_expr;

/* Arithmetic over t (calendar time) and u (duration) with + - * /, unary
 * minus, sin, cos, exp, log. Parse errors carry the byte offset in the
 * message. */
msjump_status msjump_expr_parse(const char* text, msjump_expr** out);
void msjump_expr_free(msjump_expr* expr);

int msjump_expr_uses_duration(const msjump_expr* expr);

/* u may be NULL for expressions that do not use duration. */
msjump_status msjump_expr_eval(const msjump_expr* expr, double t, const double* u,
                               double* value_out);

/* Canonical form. Writes up to capacity bytes (NUL included) and reports the
 * full length via needed; returns MSJUMP_OK even when truncated. */
msjump_status msjump_expr_print(const msjump_expr* expr, char* buffer, size_t capacity,
                                size_t* needed);

/* Grid-scan upper bound times a 1.2 safety factor; dominates the expression
 * on [t_lo, t_hi] x [u_lo, u_hi]. */
msjump_status msjump_expr_upper_bound(const msjump_expr* expr, double t_lo, double t_hi,
                                      double u_lo, double u_hi, double* bound_out);

/* --- configs and commands ------------------------------------------------ */

typedef struct msjump_config msjump_config;

/* Loads and validates a config file (strict: unknown keys are errors). */
msjump_status msjump_config_load(const char* path, msjump_config** out);
void msjump_config_free(msjump_config* config);

typedef struct {
    uint64_t seed;      /* master seed override, used when has_seed != 0 */
    int has_seed;
    int paper_scale;    /* run paper-sized variants where the config has one */
    int threads;        /* 0 = config / hardware default */
    int log_scale_ci;   /* force log-scale intervals in estimate output */
} msjump_run_options;

void msjump_run_options_init(msjump_run_options* options);

typedef struct msjump_strings msjump_strings;
size_t msjump_strings_count(const msjump_strings* list);
const char* msjump_strings_get(const msjump_strings* list, size_t index);
void msjump_strings_free(msjump_strings* list);

/* Runs one command: simulate, estimate, sweep, clt, independence,
 * lemma-check, surface, lasso, tree or slice. Writes CSV outputs plus a JSON
 * manifest into out_dir; files_out (optional) receives the written paths. */
msjump_status msjump_run(const char* command, const msjump_config* config, const char* out_dir,
                         const msjump_run_options* options, msjump_strings** files_out);

#ifdef __cplusplus
}
#endif

#endif /* MSJUMP_H */
