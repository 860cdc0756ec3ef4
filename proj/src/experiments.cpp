#include "experiments.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"
#include "rng.hpp"

namespace msj::experiments {

double true_intensity(const IntensityModel& model, int from, int to, double t,
                      std::optional<double> u) {
    for (const auto& tr : model.transitions)
        if (tr.from == from && tr.to == to) {
            if (tr.expr.uses_duration()) {
                if (!u) throw ValidationError("transition needs a duration argument");
                return tr.expr.eval(t, *u);
            }
            return tr.expr.eval(t);
        }
    throw ValidationError("transition not present in the model");
}

double ks_distance_to_normal(std::vector<double> values, double sd) {
    if (values.empty()) throw ValidationError("KS distance of an empty sample");
    if (!(sd > 0.0)) throw ValidationError("KS distance needs a positive sd");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        double f = normal_cdf(values[i] / sd);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ValidationError("correlation needs two samples of equal length >= 2");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw ValidationError("degenerate sample in correlation");
    return sxy / std::sqrt(sxx * syy);
}

namespace {

struct RepWindow {
    double t_lo, t_hi;
    bool use_duration = false;
    double u_lo = 0.0, u_hi = 0.0;
};

// One replication: a fresh cohort reduced to occurrence/exposure in the
// requested windows. Nothing is stored per subject.
std::vector<SubjectWindowStats> replicate_windows(const PathSimulator& sim,
                                                  const StudySetup& setup, std::int64_t n,
                                                  std::uint64_t seed, int from, int to,
                                                  std::span<const RepWindow> windows) {
    std::vector<SubjectWindowStats> out(windows.size());
    for (std::int64_t i = 0; i < n; ++i) {
        RngStream stream(seed, static_cast<std::uint64_t>(i));
        Trajectory traj = sim.simulate_path(setup.initial_state, stream);
        traj = apply_censoring(std::move(traj), setup.censoring, stream);
        for (std::size_t w = 0; w < windows.size(); ++w) {
            const RepWindow& win = windows[w];
            SubjectWindowStats s =
                win.use_duration
                    ? window_stats_2d(traj, from, to, win.t_lo, win.t_hi, win.u_lo, win.u_hi)
                    : window_stats_1d(traj, from, to, win.t_lo, win.t_hi);
            out[w].occ += s.occ;
            out[w].expo += s.expo;
        }
    }
    return out;
}

double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) throw ValidationError("variance needs at least two replications");
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(xs.size() - 1);
}

std::uint64_t rep_seed(const StudySetup& setup, std::string_view tag, std::uint64_t mesh,
                       std::uint64_t rep) {
    return derive_seed(derive_seed(derive_seed(setup.master_seed, tag), mesh), rep);
}

}  // namespace

std::vector<SweepRow> bias_variance_sweep(const StudySetup& setup, int from, int to,
                                          double t_eval, std::int64_t n, int reps,
                                          std::span<const int> m_list) {
    if (reps < 2) throw ValidationError("sweep needs at least two replications");
    PathSimulator sim(setup.model, setup.horizon);
    double mu_t = true_intensity(setup.model, from, to, t_eval,
                                 setup.model.kind == ModelKind::SemiMarkov
                                     ? std::optional<double>(t_eval)
                                     : std::nullopt);

    std::vector<SweepRow> rows;
    for (int m_bins : m_list) {
        TimeGrid grid{0.0, setup.horizon, m_bins};
        int bin = grid.bin_of(t_eval);  // right-open bin containing t_eval
        if (bin < 0) throw ValidationError("t_eval outside the grid");
        RepWindow window{grid.lo(bin), grid.hi(bin)};

        std::vector<double> mu_hats(static_cast<std::size_t>(reps),
                                    std::numeric_limits<double>::quiet_NaN());
        parallel_for(reps, setup.threads, [&](std::int64_t r) {
            auto stats = replicate_windows(
                sim, setup, n,
                rep_seed(setup, "sweep", static_cast<std::uint64_t>(m_bins),
                         static_cast<std::uint64_t>(r)),
                from, to, std::span(&window, 1));
            if (stats[0].expo > 0.0)
                mu_hats[static_cast<std::size_t>(r)] =
                    static_cast<double>(stats[0].occ) / stats[0].expo;
        });

        std::vector<double> z_values, used;
        double scale = std::sqrt(static_cast<double>(n) * grid.delta());
        for (double mu : mu_hats) {
            if (std::isnan(mu)) continue;
            used.push_back(mu);
            z_values.push_back(scale * (mu - mu_t));
        }
        if (used.size() < 2) throw RuntimeError("all replications hit an empty bin");
        double mean_mu = 0.0;
        for (double mu : used) mean_mu += mu;
        mean_mu /= static_cast<double>(used.size());

        SweepRow row;
        row.m_bins = m_bins;
        row.delta = grid.delta();
        row.var_z = sample_variance(z_values);
        row.scaled_abs_bias = scale * std::abs(mean_mu - mu_t);
        row.reps = reps;
        row.reps_used = static_cast<int>(used.size());
        row.n = n;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<CLTSample> clt_study(const StudySetup& setup, int from, int to, double t_eval,
                                 std::int64_t n, int reps, std::span<const int> m_list) {
    if (reps < 2)
        throw ValidationError("clt study needs at least two replications to match a variance");
    PathSimulator sim(setup.model, setup.horizon);
    double mu_t = true_intensity(setup.model, from, to, t_eval,
                                 setup.model.kind == ModelKind::SemiMarkov
                                     ? std::optional<double>(t_eval)
                                     : std::nullopt);

    // Occupation probability for the theorem-scale variance, from a separate
    // calibration cohort.
    double p_hat;
    {
        auto cohort = simulate_cohort(sim, setup.initial_state, 100000,
                                      setup.censoring, derive_seed(setup.master_seed, "clt-p"),
                                      setup.threads);
        p_hat = occupation_probability(cohort, from, t_eval);
    }
    if (!(p_hat > 0.0)) throw RuntimeError("empty occupation probability at t_eval");

    std::vector<CLTSample> samples;
    for (int m_bins : m_list) {
        TimeGrid grid{0.0, setup.horizon, m_bins};
        int bin = grid.bin_of(t_eval);
        if (bin < 0) throw ValidationError("t_eval outside the grid");
        RepWindow window{grid.lo(bin), grid.hi(bin)};

        std::vector<double> mu_hats(static_cast<std::size_t>(reps),
                                    std::numeric_limits<double>::quiet_NaN());
        parallel_for(reps, setup.threads, [&](std::int64_t r) {
            auto stats = replicate_windows(
                sim, setup, n,
                rep_seed(setup, "clt", static_cast<std::uint64_t>(m_bins),
                         static_cast<std::uint64_t>(r)),
                from, to, std::span(&window, 1));
            if (stats[0].expo > 0.0)
                mu_hats[static_cast<std::size_t>(r)] =
                    static_cast<double>(stats[0].occ) / stats[0].expo;
        });

        CLTSample sample;
        sample.m_bins = m_bins;
        sample.delta = grid.delta();
        sample.reps = reps;
        double scale = std::sqrt(static_cast<double>(n) * grid.delta());
        for (double mu : mu_hats)
            if (!std::isnan(mu)) sample.z_values.push_back(scale * (mu - mu_t));
        sample.reps_used = static_cast<int>(sample.z_values.size());
        if (sample.reps_used < 2) throw RuntimeError("all replications hit an empty bin");
        sample.sample_variance = sample_variance(sample.z_values);
        sample.matched_sd = std::sqrt(sample.sample_variance);
        sample.theorem_variance = mu_t / p_hat;
        sample.ks_distance = ks_distance_to_normal(sample.z_values, sample.matched_sd);
        samples.push_back(std::move(sample));
    }
    return samples;
}

namespace {

IndependenceResult correlation_of_windows(const StudySetup& setup, int from, int to,
                                          std::int64_t n, int reps,
                                          std::span<const RepWindow> windows,
                                          std::string_view tag, bool semi) {
    PathSimulator sim(setup.model, setup.horizon);
    std::vector<double> mu_s(static_cast<std::size_t>(reps),
                             std::numeric_limits<double>::quiet_NaN());
    std::vector<double> mu_t(static_cast<std::size_t>(reps),
                             std::numeric_limits<double>::quiet_NaN());
    parallel_for(reps, setup.threads, [&](std::int64_t r) {
        auto stats = replicate_windows(sim, setup, n,
                                       rep_seed(setup, tag, 0, static_cast<std::uint64_t>(r)),
                                       from, to, windows);
        if (stats[0].expo > 0.0)
            mu_s[static_cast<std::size_t>(r)] = static_cast<double>(stats[0].occ) / stats[0].expo;
        if (stats[1].expo > 0.0)
            mu_t[static_cast<std::size_t>(r)] = static_cast<double>(stats[1].occ) / stats[1].expo;
    });

    std::vector<double> xs, ys;
    for (int r = 0; r < reps; ++r) {
        double a = mu_s[static_cast<std::size_t>(r)];
        double b = mu_t[static_cast<std::size_t>(r)];
        if (std::isnan(a) || std::isnan(b)) continue;
        xs.push_back(a);
        ys.push_back(b);
    }
    if (xs.size() < 8) throw RuntimeError("too few usable replications for a correlation");

    IndependenceResult result;
    result.semi_markov = semi;
    result.corr = pearson_correlation(xs, ys);
    result.reps = reps;
    result.reps_used = static_cast<int>(xs.size());
    // Fisher interval at 95%.
    double z = 0.5 * std::log((1.0 + result.corr) / (1.0 - result.corr));
    double half = 1.959963984540054 / std::sqrt(static_cast<double>(xs.size()) - 3.0);
    result.ci_lo = std::tanh(z - half);
    result.ci_hi = std::tanh(z + half);
    return result;
}

}  // namespace

IndependenceResult independence_check(const StudySetup& setup, int from, int to, double s_eval,
                                      double t_eval, std::int64_t n, int reps, int m_bins) {
    TimeGrid grid{0.0, setup.horizon, m_bins};
    int bin_s = grid.bin_of(s_eval);
    int bin_t = grid.bin_of(t_eval);
    if (bin_s < 0 || bin_t < 0) throw ValidationError("evaluation time outside the grid");
    if (bin_s == bin_t)
        throw ValidationError("s and t fall into the same bin; pick distinct time points");

    RepWindow windows[2] = {{grid.lo(bin_s), grid.hi(bin_s)}, {grid.lo(bin_t), grid.hi(bin_t)}};
    auto result = correlation_of_windows(setup, from, to, n, reps, windows, "indep", false);
    result.s_eval = s_eval;
    result.t_eval = t_eval;
    return result;
}

IndependenceResult independence_check_2d(const StudySetup& setup, int from, int to,
                                         double s_eval, double t_eval, double u_eval,
                                         std::int64_t n, int reps,
                                         const TimeDurationGrid& grid) {
    int bin_s = grid.time.bin_of(s_eval);
    int bin_t = grid.time.bin_of(t_eval);
    int bin_u = grid.duration.bin_of(u_eval);
    if (bin_s < 0 || bin_t < 0 || bin_u < 0)
        throw ValidationError("evaluation point outside the grid");
    if (bin_s == bin_t)
        throw ValidationError("s and t fall into the same bin; pick distinct time points");

    RepWindow windows[2] = {
        {grid.time.lo(bin_s), grid.time.hi(bin_s), true, grid.duration.lo(bin_u),
         grid.duration.hi(bin_u)},
        {grid.time.lo(bin_t), grid.time.hi(bin_t), true, grid.duration.lo(bin_u),
         grid.duration.hi(bin_u)},
    };
    auto result = correlation_of_windows(setup, from, to, n, reps, windows, "indep2d", true);
    result.s_eval = s_eval;
    result.t_eval = t_eval;
    return result;
}

namespace {

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
    double se_mean = 0.0;
    double se_variance = 0.0;
};

Moments subject_moments(std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    Moments m;
    for (double x : xs) m.mean += x;
    m.mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        double d = x - m.mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m.variance = m2 / (n - 1.0);
    m.se_mean = std::sqrt(m.variance / n);
    // SE of the sample variance via the fourth central moment.
    double mu4 = m4 / n;
    double var_of_var = (mu4 - m.variance * m.variance * (n - 3.0) / (n - 1.0)) / n;
    m.se_variance = std::sqrt(std::max(var_of_var, 0.0));
    return m;
}

}  // namespace

std::vector<MomentCheckRow> lemma_moment_check(const StudySetup& setup, int from, int to,
                                               double t_eval, double delta, std::int64_t n) {
    PathSimulator sim(setup.model, setup.horizon);
    int m_bins = static_cast<int>(std::round(setup.horizon / delta));
    TimeGrid grid{0.0, setup.horizon, m_bins};
    int bin = grid.bin_of(t_eval);
    if (bin < 0) throw ValidationError("t_eval outside the grid");
    const double t_lo = grid.lo(bin), t_hi = grid.hi(bin);
    const double delta_eff = grid.delta();

    std::vector<double> xs(static_cast<std::size_t>(n)), ys(static_cast<std::size_t>(n));
    std::vector<Trajectory> cohort =
        simulate_cohort(sim, setup.initial_state, n, setup.censoring,
                        derive_seed(setup.master_seed, "lemma"), setup.threads);
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        auto s = window_stats_1d(cohort[i], from, to, t_lo, t_hi);
        xs[i] = static_cast<double>(s.occ);
        ys[i] = s.expo;
    }

    double p_hat = occupation_probability(cohort, from, t_eval);
    double mu_t = true_intensity(setup.model, from, to, t_eval,
                                 setup.model.kind == ModelKind::SemiMarkov
                                     ? std::optional<double>(t_eval)
                                     : std::nullopt);

    auto mx = subject_moments(xs);
    auto my = subject_moments(ys);
    double lead = delta_eff * p_hat * mu_t;
    return {
        {"mean_X", mx.mean, lead, mx.se_mean},
        {"var_X", mx.variance, lead, mx.se_variance},
        {"mean_Y", my.mean, delta_eff * p_hat, my.se_mean},
        {"var_Y", my.variance, delta_eff * delta_eff * p_hat, my.se_variance},
    };
}

std::vector<MomentCheckRow> lemma_moment_check_2d(const StudySetup& setup, int from, int to,
                                                  double t_eval, double u_eval, double delta_t,
                                                  double delta_u, std::int64_t n) {
    PathSimulator sim(setup.model, setup.horizon);
    TimeGrid tg{0.0, setup.horizon, static_cast<int>(std::round(setup.horizon / delta_t))};
    TimeGrid ug{0.0, setup.horizon, static_cast<int>(std::round(setup.horizon / delta_u))};
    int bt = tg.bin_of(t_eval), bu = ug.bin_of(u_eval);
    if (bt < 0 || bu < 0) throw ValidationError("evaluation point outside the grid");

    std::vector<double> xs(static_cast<std::size_t>(n)), ys(static_cast<std::size_t>(n));
    std::vector<Trajectory> cohort =
        simulate_cohort(sim, setup.initial_state, n, setup.censoring,
                        derive_seed(setup.master_seed, "lemma2d"), setup.threads);
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        auto s = window_stats_2d(cohort[i], from, to, tg.lo(bt), tg.hi(bt), ug.lo(bu),
                                 ug.hi(bu));
        xs[i] = static_cast<double>(s.occ);
        ys[i] = s.expo;
    }

    // d/du of the duration-resolved occupation probability, by a central
    // difference of the empirical curve (step delta_u / 2).
    double h = delta_u / 2.0;
    double p_up = occupation_probability_duration(cohort, from, t_eval, u_eval + h);
    double p_dn = occupation_probability_duration(cohort, from, t_eval, u_eval - h);
    double dp = (p_up - p_dn) / (2.0 * h);
    double mu_tu = true_intensity(setup.model, from, to, t_eval, u_eval);

    auto mx = subject_moments(xs);
    auto my = subject_moments(ys);
    const double d1 = tg.delta(), d2 = ug.delta();
    double lead = d1 * d2 * mu_tu * dp;
    return {
        {"mean_X", mx.mean, lead, mx.se_mean},
        {"var_X", mx.variance, lead, mx.se_variance},
        {"mean_Y", my.mean, d1 * d2 * dp, my.se_mean},
        {"var_Y", my.variance, d1 * d1 * d2 * dp, my.se_variance},
    };
}

std::vector<ConsistencyRow> consistency_study(const StudySetup& setup, int from, int to,
                                              double t_eval,
                                              std::span<const std::pair<std::int64_t, int>> runs) {
    PathSimulator sim(setup.model, setup.horizon);
    double mu_t = true_intensity(setup.model, from, to, t_eval,
                                 setup.model.kind == ModelKind::SemiMarkov
                                     ? std::optional<double>(t_eval)
                                     : std::nullopt);

    std::vector<ConsistencyRow> rows;
    for (auto [n, reps] : runs) {
        double delta = 4.0 / std::sqrt(static_cast<double>(n));
        int m_bins = std::max(1, static_cast<int>(std::round(setup.horizon / delta)));
        TimeGrid grid{0.0, setup.horizon, m_bins};
        int bin = grid.bin_of(t_eval);
        RepWindow window{grid.lo(bin), grid.hi(bin)};

        std::vector<double> sq_errors(static_cast<std::size_t>(reps),
                                      std::numeric_limits<double>::quiet_NaN());
        parallel_for(reps, setup.threads, [&](std::int64_t r) {
            auto stats = replicate_windows(
                sim, setup, n,
                rep_seed(setup, "consistency", static_cast<std::uint64_t>(n),
                         static_cast<std::uint64_t>(r)),
                from, to, std::span(&window, 1));
            if (stats[0].expo > 0.0) {
                double mu = static_cast<double>(stats[0].occ) / stats[0].expo;
                sq_errors[static_cast<std::size_t>(r)] = (mu - mu_t) * (mu - mu_t);
            }
        });

        ConsistencyRow row;
        row.n = n;
        row.m_bins = m_bins;
        row.delta = grid.delta();
        row.reps = reps;
        double sum = 0.0;
        int used = 0;
        for (double e : sq_errors) {
            if (std::isnan(e)) continue;
            sum += e;
            ++used;
        }
        if (used == 0) throw RuntimeError("all replications hit an empty bin");
        row.reps_used = used;
        row.rmse = std::sqrt(sum / used);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace msj::experiments
