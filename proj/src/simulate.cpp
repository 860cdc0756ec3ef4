#include "simulate.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"

namespace msj {

int Trajectory::state_at(double t) const {
    int state = initial_state;
    for (const Jump& j : jumps) {
        if (j.time <= t)
            state = j.to;
        else
            break;
    }
    return state;
}

double Trajectory::duration_at(double t) const {
    double last = 0.0;
    for (const Jump& j : jumps) {
        if (j.time <= t)
            last = j.time;
        else
            break;
    }
    return t - last;
}

CensoringSpec CensoringSpec::uniform(double lo, double hi) {
    if (!(lo < hi)) throw ValidationError("uniform censoring requires lo < hi");
    return {Law::Uniform, lo, hi};
}

CensoringSpec CensoringSpec::fixed(double r) {
    if (!(r > 0.0)) throw ValidationError("fixed censoring requires r > 0");
    return {Law::Fixed, r, r};
}

CensoringSpec CensoringSpec::none(double horizon) {
    if (!(horizon > 0.0)) throw ValidationError("horizon must be positive");
    return {Law::None, horizon, horizon};
}

PathSimulator::PathSimulator(const IntensityModel& model, double horizon, double window)
    : model_(model), horizon_(horizon), window_(window) {
    if (!(window > 0.0)) throw ValidationError("look-ahead window must be positive");
    model_.validate(horizon);

    int n_states = model_.states.size();
    n_windows_ = static_cast<int>(std::ceil(horizon_ / window_));
    outgoing_.resize(static_cast<std::size_t>(n_states));
    exit_uses_duration_.resize(static_cast<std::size_t>(n_states), false);
    bounds_1d_.resize(static_cast<std::size_t>(n_states));
    bounds_2d_.resize(static_cast<std::size_t>(n_states));

    for (int s = 0; s < n_states; ++s) {
        outgoing_[static_cast<std::size_t>(s)] = model_.outgoing(s);
        const auto& out = outgoing_[static_cast<std::size_t>(s)];
        if (out.empty()) continue;
        if (out.size() > 64)
            throw ValidationError("more than 64 transitions out of one state");

        IntensityExpr exit = model_.transitions[static_cast<std::size_t>(out[0])].expr;
        for (std::size_t i = 1; i < out.size(); ++i)
            exit = IntensityExpr::sum(exit,
                                      model_.transitions[static_cast<std::size_t>(out[i])].expr);
        bool uses_u = exit.uses_duration();
        exit_uses_duration_[static_cast<std::size_t>(s)] = uses_u;

        // Bounds over aligned windows [k w, min((k+2) w, horizon)] dominate
        // every look-ahead window [t, t+w) with t in [k w, (k+1) w).
        if (!uses_u) {
            auto& row = bounds_1d_[static_cast<std::size_t>(s)];
            row.resize(static_cast<std::size_t>(n_windows_));
            for (int k = 0; k < n_windows_; ++k) {
                double t_lo = k * window_;
                double t_hi = std::min((k + 2) * window_, horizon_);
                row[static_cast<std::size_t>(k)] = exit.upper_bound(t_lo, t_hi, 0.0, 0.0);
            }
        } else {
            // Duration never exceeds calendar time, so only l <= k is needed.
            auto& row = bounds_2d_[static_cast<std::size_t>(s)];
            row.resize(static_cast<std::size_t>(n_windows_) * (n_windows_ + 1) / 2);
            for (int k = 0; k < n_windows_; ++k) {
                double t_lo = k * window_;
                double t_hi = std::min((k + 2) * window_, horizon_);
                for (int l = 0; l <= k; ++l) {
                    double u_lo = l * window_;
                    double u_hi = std::min((l + 2) * window_, horizon_);
                    row[static_cast<std::size_t>(k) * (k + 1) / 2 + l] =
                        exit.upper_bound(t_lo, t_hi, u_lo, u_hi);
                }
            }
        }
    }
}

double PathSimulator::bound_for(int state, double t, double u) const {
    int k = std::min(static_cast<int>(t / window_), n_windows_ - 1);
    if (!exit_uses_duration_[static_cast<std::size_t>(state)])
        return bounds_1d_[static_cast<std::size_t>(state)][static_cast<std::size_t>(k)];
    int l = std::min(static_cast<int>(u / window_), k);
    return bounds_2d_[static_cast<std::size_t>(state)]
                     [static_cast<std::size_t>(k) * (k + 1) / 2 + l];
}

Trajectory PathSimulator::simulate_path(int initial_state, RngStream& stream,
                                        SimStats* stats) const {
    if (initial_state < 0 || initial_state >= model_.states.size())
        throw ValidationError("initial state index out of range");

    Trajectory traj;
    traj.initial_state = initial_state;
    traj.censor_time = horizon_;

    constexpr std::size_t kJumpCap = 1u << 20;
    double t = 0.0;
    double u = 0.0;  // duration: equals t before the first jump
    int state = initial_state;
    double dest_rates[64];

    while (t < horizon_) {
        const auto& out = outgoing_[static_cast<std::size_t>(state)];
        if (out.empty()) break;

        double bound = bound_for(state, t, u);
        double window_end = std::min(t + window_, horizon_);
        if (bound <= 0.0) {
            u += window_end - t;
            t = window_end;
            if (stats) ++stats->rebounds;
            continue;
        }

        double s = t + stream.exponential(bound);
        if (s >= window_end) {
            u += window_end - t;
            t = window_end;
            if (stats) ++stats->rebounds;
            continue;
        }

        double u_s = u + (s - t);
        double total = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto& tr = model_.transitions[static_cast<std::size_t>(out[i])];
            double v = tr.expr.uses_duration() ? tr.expr.eval(s, u_s) : tr.expr.eval(s);
            if (v < 0.0)
                throw RuntimeError("negative intensity for " + model_.states.label(tr.from) +
                                   " -> " + model_.states.label(tr.to) + " at t=" +
                                   std::to_string(s));
            dest_rates[i] = v;
            total += v;
        }

        double ratio = total / bound;
        if (stats) {
            ++stats->proposals;
            stats->max_accept_ratio = std::max(stats->max_accept_ratio, ratio);
        }
        if (ratio > 1.0 + 1e-12)
            throw RuntimeError("thinning bound violated in state " + model_.states.label(state) +
                               " at t=" + std::to_string(s) + " (ratio " +
                               std::to_string(ratio) + ")");

        if (stream.next_double() < ratio) {
            double pick = stream.next_double() * total;
            double cum = 0.0;
            int dest = model_.transitions[static_cast<std::size_t>(out.back())].to;
            for (std::size_t i = 0; i < out.size(); ++i) {
                cum += dest_rates[i];
                if (pick < cum) {
                    dest = model_.transitions[static_cast<std::size_t>(out[i])].to;
                    break;
                }
            }
            traj.jumps.push_back({s, state, dest});
            if (traj.jumps.size() > kJumpCap)
                throw RuntimeError("path exceeded the jump cap; model intensities look runaway");
            if (stats) ++stats->accepts;
            state = dest;
            t = s;
            u = 0.0;
        } else {
            t = s;
            u = u_s;
        }
    }
    return traj;
}

double draw_censor_time(const CensoringSpec& spec, RngStream& stream) {
    switch (spec.law) {
        case CensoringSpec::Law::Uniform: return stream.uniform(spec.lo, spec.hi);
        case CensoringSpec::Law::Fixed: return spec.lo;
        case CensoringSpec::Law::None: return spec.lo;
    }
    return spec.lo;
}

Trajectory apply_censoring(Trajectory traj, const CensoringSpec& spec, RngStream& stream) {
    double r = draw_censor_time(spec, stream);
    auto cut = std::find_if(traj.jumps.begin(), traj.jumps.end(),
                            [&](const Jump& j) { return j.time >= r; });
    traj.jumps.erase(cut, traj.jumps.end());
    traj.censor_time = r;
    return traj;
}

void SimConfig::validate() const {
    if (n < 1) throw ValidationError("subject count n must be >= 1");
    if (!(horizon > 0.0)) throw ValidationError("horizon must be positive");
    if (censoring.law != CensoringSpec::Law::None && censoring.upper() > horizon)
        throw ValidationError("horizon must cover the censoring upper bound");
    if (initial_state < 0 || initial_state >= model.states.size())
        throw ValidationError("initial state not in the state space");
    model.validate(horizon);
}

std::vector<Trajectory> simulate_cohort(const SimConfig& config) {
    config.validate();
    PathSimulator sim(config.model, config.horizon);
    return simulate_cohort(sim, config.initial_state, config.n, config.censoring,
                           config.master_seed, config.threads);
}

std::vector<Trajectory> simulate_cohort(const PathSimulator& sim, int initial_state,
                                        std::int64_t n, const CensoringSpec& censoring,
                                        std::uint64_t master_seed, int threads) {
    if (n < 1) throw ValidationError("subject count n must be >= 1");
    std::vector<Trajectory> cohort(static_cast<std::size_t>(n));
    parallel_for(n, threads, [&](std::int64_t i) {
        RngStream stream(master_seed, static_cast<std::uint64_t>(i));
        Trajectory traj = sim.simulate_path(initial_state, stream);
        traj = apply_censoring(std::move(traj), censoring, stream);
        traj.subject_id = i;
        cohort[static_cast<std::size_t>(i)] = std::move(traj);
    });
    return cohort;
}

void check_trajectory(const Trajectory& traj, const IntensityModel* model) {
    double prev_time = 0.0;
    int state = traj.initial_state;
    for (const Jump& j : traj.jumps) {
        if (!(j.time > prev_time))
            throw ValidationError("jump times not strictly increasing for subject " +
                                  std::to_string(traj.subject_id));
        if (j.from != state)
            throw ValidationError("jump chain broken for subject " +
                                  std::to_string(traj.subject_id));
        if (j.from == j.to)
            throw ValidationError("self jump for subject " + std::to_string(traj.subject_id));
        if (model && model->is_absorbing(j.from))
            throw ValidationError("jump departs an absorbing state for subject " +
                                  std::to_string(traj.subject_id));
        if (j.time > traj.censor_time)
            throw ValidationError("jump after censor time for subject " +
                                  std::to_string(traj.subject_id));
        prev_time = j.time;
        state = j.to;
    }
}

}  // namespace msj
