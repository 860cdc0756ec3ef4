#include "msjump/msjump.h"

#include <cstring>
#include <string>
#include <vector>

#include "config.hpp"
#include "expr.hpp"
#include "runner.hpp"

struct msjump_expr {
    msj::IntensityExpr expr;
};

struct msjump_config {
    msj::AppConfig config;
};

struct msjump_strings {
    std::vector<std::string> items;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
msjump_status guarded(Fn&& fn) {
    try {
        fn();
        return MSJUMP_OK;
    } catch (const msj::Error& err) {
        g_last_error = err.what();
        return err.kind() == msj::Error::Kind::Validation ? MSJUMP_ERR_VALIDATION
                                                          : MSJUMP_ERR_RUNTIME;
    } catch (const std::exception& err) {
        g_last_error = err.what();
        return MSJUMP_ERR_RUNTIME;
    } catch (...) {
        g_last_error = "unknown error";
        return MSJUMP_ERR_RUNTIME;
    }
}

msjump_status invalid_argument(const char* what) {
    g_last_error = what;
    return MSJUMP_ERR_VALIDATION;
}

}  // namespace

extern "C" {

const char* msjump_version(void) { return "0.1.0"; }

const char* msjump_last_error(void) { return g_last_error.c_str(); }

msjump_status msjump_expr_parse(const char* text, msjump_expr** out) {
    if (!text || !out) return invalid_argument("null argument");
    return guarded([&] { *out = new msjump_expr{msj::IntensityExpr::parse(text)}; });
}

void msjump_expr_free(msjump_expr* expr) { delete expr; }

int msjump_expr_uses_duration(const msjump_expr* expr) {
    return expr && expr->expr.uses_duration() ? 1 : 0;
}

msjump_status msjump_expr_eval(const msjump_expr* expr, double t, const double* u,
                               double* value_out) {
    if (!expr || !value_out) return invalid_argument("null argument");
    return guarded([&] { *value_out = u ? expr->expr.eval(t, *u) : expr->expr.eval(t); });
}

msjump_status msjump_expr_print(const msjump_expr* expr, char* buffer, size_t capacity,
                                size_t* needed) {
    if (!expr) return invalid_argument("null argument");
    return guarded([&] {
        std::string text = expr->expr.str();
        if (needed) *needed = text.size() + 1;
        if (buffer && capacity > 0) {
            size_t n = std::min(capacity - 1, text.size());
            std::memcpy(buffer, text.data(), n);
            buffer[n] = '\0';
        }
    });
}

msjump_status msjump_expr_upper_bound(const msjump_expr* expr, double t_lo, double t_hi,
                                      double u_lo, double u_hi, double* bound_out) {
    if (!expr || !bound_out) return invalid_argument("null argument");
    return guarded([&] { *bound_out = expr->expr.upper_bound(t_lo, t_hi, u_lo, u_hi); });
}

msjump_status msjump_config_load(const char* path, msjump_config** out) {
    if (!path || !out) return invalid_argument("null argument");
    return guarded([&] { *out = new msjump_config{msj::AppConfig::load(path)}; });
}

void msjump_config_free(msjump_config* config) { delete config; }

void msjump_run_options_init(msjump_run_options* options) {
    if (!options) return;
    options->seed = 0;
    options->has_seed = 0;
    options->paper_scale = 0;
    options->threads = 0;
    options->log_scale_ci = 0;
}

size_t msjump_strings_count(const msjump_strings* list) { return list ? list->items.size() : 0; }

const char* msjump_strings_get(const msjump_strings* list, size_t index) {
    if (!list || index >= list->items.size()) return nullptr;
    return list->items[index].c_str();
}

void msjump_strings_free(msjump_strings* list) { delete list; }

msjump_status msjump_run(const char* command, const msjump_config* config, const char* out_dir,
                         const msjump_run_options* options, msjump_strings** files_out) {
    if (!command || !config || !out_dir) return invalid_argument("null argument");
    return guarded([&] {
        msj::RunOptions run_options;
        if (options) {
            if (options->has_seed) run_options.seed_override = options->seed;
            run_options.paper_scale = options->paper_scale != 0;
            run_options.threads = options->threads;
            run_options.log_scale_ci = options->log_scale_ci != 0;
        }
        auto result = msj::run_command(command, config->config, out_dir, run_options);
        if (files_out) *files_out = new msjump_strings{std::move(result.files)};
    });
}

}  // extern "C"
