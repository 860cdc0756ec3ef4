#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aggregate.hpp"
#include "rates.hpp"
#include "simulate.hpp"

namespace msj::experiments {

// Common frame for the Monte-Carlo studies: one model, one censoring law,
// one master seed. Replication r of study `tag` at mesh M draws its cohort
// from derive_seed(master, tag, M, r), so no streams are shared across
// meshes or replications and every study is bit-reproducible.
struct StudySetup {
    IntensityModel model;
    int initial_state = 0;
    double horizon = 40.0;
    CensoringSpec censoring;
    std::uint64_t master_seed = 0;
    int threads = 0;
};

double true_intensity(const IntensityModel& model, int from, int to, double t,
                      std::optional<double> u = std::nullopt);

// Kolmogorov-Smirnov distance between the sample and N(0, sd^2).
double ks_distance_to_normal(std::vector<double> values, double sd);

double pearson_correlation(std::span<const double> x, std::span<const double> y);

struct SweepRow {
    int m_bins = 0;
    double delta = 0.0;
    double var_z = 0.0;
    double scaled_abs_bias = 0.0;
    int reps = 0;
    int reps_used = 0;
    std::int64_t n = 0;
};

// Per mesh M: `reps` cohorts of size n, mu-hat from the bin containing
// t_eval on [0, horizon] split into M bins, Z = sqrt(n Delta)(mu-hat - mu).
std::vector<SweepRow> bias_variance_sweep(const StudySetup& setup, int from, int to,
                                          double t_eval, std::int64_t n, int reps,
                                          std::span<const int> m_list);

struct CLTSample {
    int m_bins = 0;
    double delta = 0.0;
    std::vector<double> z_values;
    double matched_sd = 0.0;
    double sample_variance = 0.0;
    double theorem_variance = 0.0;  // mu(t) / p-hat_c(t), calibration cohort
    double ks_distance = 0.0;
    int reps = 0;
    int reps_used = 0;
};

std::vector<CLTSample> clt_study(const StudySetup& setup, int from, int to, double t_eval,
                                 std::int64_t n, int reps, std::span<const int> m_list);

struct IndependenceResult {
    bool semi_markov = false;
    double s_eval = 0.0;
    double t_eval = 0.0;
    double corr = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    int reps = 0;
    int reps_used = 0;
};

// Correlation across replications of mu-hat at two distinct interior times
// (same transition). Throws if both times land in one bin.
IndependenceResult independence_check(const StudySetup& setup, int from, int to, double s_eval,
                                      double t_eval, std::int64_t n, int reps, int m_bins);

// Semi-Markov flavour: two boxes with distinct time bins sharing one
// duration bin.
IndependenceResult independence_check_2d(const StudySetup& setup, int from, int to,
                                         double s_eval, double t_eval, double u_eval,
                                         std::int64_t n, int reps, const TimeDurationGrid& grid);

struct MomentCheckRow {
    std::string quantity;
    double observed = 0.0;
    double predicted = 0.0;
    double mc_se = 0.0;
};

// First-order moment identities for the per-subject bin occurrence X and
// exposure Y at an interior time: E[X] ~ Var(X) ~ Delta p_c(t) mu(t),
// E[Y] ~ Delta p_c(t), Var(Y) ~ Delta^2 p_c(t). Predictions use the
// empirical occupation probability of the same cohort.
std::vector<MomentCheckRow> lemma_moment_check(const StudySetup& setup, int from, int to,
                                               double t_eval, double delta, std::int64_t n);

// Semi-Markov version on a (time, duration) box; the occupation-derivative
// nuisance is estimated by a central finite difference of step delta_u / 2.
std::vector<MomentCheckRow> lemma_moment_check_2d(const StudySetup& setup, int from, int to,
                                                  double t_eval, double u_eval, double delta_t,
                                                  double delta_u, std::int64_t n);

struct ConsistencyRow {
    std::int64_t n = 0;
    int m_bins = 0;
    double delta = 0.0;
    double rmse = 0.0;
    int reps = 0;
    int reps_used = 0;
};

// RMSE of mu-hat(t_eval) under the mesh rule Delta = 4 / sqrt(n).
std::vector<ConsistencyRow> consistency_study(const StudySetup& setup, int from, int to,
                                              double t_eval,
                                              std::span<const std::pair<std::int64_t, int>> runs);

}  // namespace msj::experiments
