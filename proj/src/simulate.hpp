#pragma once

#include <cstdint>
#include <vector>

#include "model.hpp"
#include "rng.hpp"

namespace msj {

struct Jump {
    double time;
    int from;
    int to;
};

// One subject's censored event history. Uncensored paths carry
// censor_time == horizon (administrative censoring at the window end).
struct Trajectory {
    std::int64_t subject_id = 0;
    int initial_state = 0;
    std::vector<Jump> jumps;
    double censor_time = 0.0;

    int state_at(double t) const;      // cadlag: a jump at t has already happened
    double duration_at(double t) const;  // time since the last jump at or before t
};

struct CensoringSpec {
    enum class Law { Uniform, Fixed, None };

    Law law = Law::None;
    double lo = 0.0;  // Uniform lower bound; Fixed time; None horizon
    double hi = 0.0;  // Uniform upper bound

    static CensoringSpec uniform(double lo, double hi);
    static CensoringSpec fixed(double r);
    static CensoringSpec none(double horizon);

    double upper() const { return law == Law::Uniform ? hi : lo; }
};

struct SimStats {
    std::uint64_t proposals = 0;  // accept/reject evaluations
    std::uint64_t accepts = 0;
    std::uint64_t rebounds = 0;   // window exhaustions
    double max_accept_ratio = 0.0;
};

// Exact simulation by thinning: the total exit intensity on each one-year
// look-ahead window is dominated by a precomputed grid-scan bound; proposals
// are exponential in the bound and accepted with probability Lambda/B.
// Bounds are tabulated once per (state, aligned time window[, duration
// window]) so construction cost is paid once per model, not per path.
class PathSimulator {
public:
    PathSimulator(const IntensityModel& model, double horizon, double window = 1.0);

    // Uncensored path from t=0; stops at the horizon or in an absorbing
    // state. Throws RuntimeError if an acceptance ratio exceeds 1 (a bound
    // violation) or a negative intensity is encountered.
    Trajectory simulate_path(int initial_state, RngStream& stream,
                             SimStats* stats = nullptr) const;

    const IntensityModel& model() const { return model_; }
    double horizon() const { return horizon_; }

private:
    double bound_for(int state, double t, double u) const;

    IntensityModel model_;
    double horizon_;
    double window_;
    int n_windows_;
    std::vector<std::vector<int>> outgoing_;       // per state
    std::vector<bool> exit_uses_duration_;         // per state
    std::vector<std::vector<double>> bounds_1d_;   // [state][k]
    std::vector<std::vector<double>> bounds_2d_;   // [state][k*(k+1)/2 + l], l <= k
};

double draw_censor_time(const CensoringSpec& spec, RngStream& stream);

// Truncates jumps at an independently drawn censor time R (jumps strictly
// before R survive) and stamps censor_time = R.
Trajectory apply_censoring(Trajectory traj, const CensoringSpec& spec, RngStream& stream);

struct SimConfig {
    IntensityModel model;
    int initial_state = 0;
    std::int64_t n = 0;
    double horizon = 0.0;
    CensoringSpec censoring;
    std::uint64_t master_seed = 0;
    int threads = 0;  // 0 = hardware default

    void validate() const;
};

// Subject i uses the counter-based stream (master_seed, i); the output is
// identical for any thread count.
std::vector<Trajectory> simulate_cohort(const SimConfig& config);
std::vector<Trajectory> simulate_cohort(const PathSimulator& sim, int initial_state,
                                        std::int64_t n, const CensoringSpec& censoring,
                                        std::uint64_t master_seed, int threads);

// Validates the Trajectory type invariants; used by tests and ingestion.
void check_trajectory(const Trajectory& traj, const IntensityModel* model = nullptr);

}  // namespace msj
