#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "simulate.hpp"

namespace msj {

// Equidistant grid of right-open bins [t_{m-1}, t_m), m = 1..bins.
struct TimeGrid {
    double t0 = 0.0;
    double t_max = 0.0;
    int bins = 0;

    double delta() const { return (t_max - t0) / bins; }
    double lo(int m) const { return t0 + m * (t_max - t0) / bins; }
    double hi(int m) const { return t0 + (m + 1) * (t_max - t0) / bins; }
    double mid(int m) const { return t0 + (m + 0.5) * (t_max - t0) / bins; }

    // Bin containing t, or -1 outside [t0, t_max). Consistent with lo/hi
    // at bin boundaries.
    int bin_of(double t) const;

    void validate() const;
};

struct TimeDurationGrid {
    TimeGrid time;
    TimeGrid duration;

    void validate() const {
        time.validate();
        duration.validate();
    }
};

// Per-bin occurrence counts (per ordered transition) and exposure times
// (per state) for a cohort on a 1D time grid.
struct OETable {
    TimeGrid grid;
    int n_states = 0;
    std::int64_t n_subjects = 0;
    std::vector<std::int64_t> occurrence;  // [(from * n_states + to) * bins + m]
    std::vector<double> exposure;          // [state * bins + m]

    std::int64_t occ(int from, int to, int m) const {
        return occurrence[static_cast<std::size_t>((from * n_states + to) * grid.bins + m)];
    }
    double expo(int state, int m) const {
        return exposure[static_cast<std::size_t>(state * grid.bins + m)];
    }

    // Transitions with at least one observed jump, sorted by (from, to).
    std::vector<std::pair<int, int>> observed_transitions() const;
};

struct OETable2D {
    TimeDurationGrid grid;
    int n_states = 0;
    std::int64_t n_subjects = 0;
    std::vector<std::int64_t> occurrence;  // [(from * S + to) * M1 * M2 + m1 * M2 + m2]
    std::vector<double> exposure;          // [state * M1 * M2 + m1 * M2 + m2]

    int boxes() const { return grid.time.bins * grid.duration.bins; }
    std::int64_t occ(int from, int to, int m1, int m2) const {
        return occurrence[static_cast<std::size_t>((from * n_states + to) * boxes() +
                                                   m1 * grid.duration.bins + m2)];
    }
    double expo(int state, int m1, int m2) const {
        return exposure[static_cast<std::size_t>(state * boxes() + m1 * grid.duration.bins + m2)];
    }

    std::vector<std::pair<int, int>> observed_transitions() const;
};

// Occurrence counts jumps with time in the bin and time < censor; exposure is
// the exact Lebesgue time in the state within the bin before censoring,
// accumulated with compensated summation in subject order (deterministic).
OETable aggregate_1d(std::span<const Trajectory> cohort, const TimeGrid& grid, int n_states);

// 2D version over (time, duration) boxes. Duration advances at unit rate and
// resets to zero at each jump (and equals calendar time before the first
// jump), so sojourns split exactly at box boundary crossings.
OETable2D aggregate_2d(std::span<const Trajectory> cohort, const TimeDurationGrid& grid,
                       int n_states);

// Sums an OETable2D over duration bins; equals aggregate_1d exactly on counts
// when the duration grid covers every realized duration.
OETable marginalize_duration(const OETable2D& table);

// Per-subject occurrence/exposure restricted to one time window (and
// optionally one duration window): the X_i / Y_i of the moment checks, also
// used by experiments that only need a single bin.
struct SubjectWindowStats {
    std::int64_t occ = 0;
    double expo = 0.0;
};

SubjectWindowStats window_stats_1d(const Trajectory& traj, int from, int to, double t_lo,
                                   double t_hi);
SubjectWindowStats window_stats_2d(const Trajectory& traj, int from, int to, double t_lo,
                                   double t_hi, double u_lo, double u_hi);

// Empirical P(Z_t = j, t <= R).
double occupation_probability(std::span<const Trajectory> cohort, int state, double t);

// Empirical P(Z_t = j, U_t <= u, t <= R).
double occupation_probability_duration(std::span<const Trajectory> cohort, int state, double t,
                                       double u);

}  // namespace msj
