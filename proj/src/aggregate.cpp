#include "aggregate.hpp"

#include <algorithm>
#include <cmath>

namespace msj {

namespace {

// Compensated (Kahan) accumulation into a flat array.
struct KahanArray {
    std::vector<double> sum;
    std::vector<double> comp;

    explicit KahanArray(std::size_t n) : sum(n, 0.0), comp(n, 0.0) {}

    void add(std::size_t idx, double v) {
        double y = v - comp[idx];
        double t = sum[idx] + y;
        comp[idx] = (t - sum[idx]) - y;
        sum[idx] = t;
    }
};

// Occupancy segments of a censored trajectory: state j over [start, end),
// with duration u(s) = s - start within the segment.
template <typename Fn>
void for_each_segment(const Trajectory& traj, Fn&& fn) {
    double start = 0.0;
    int state = traj.initial_state;
    for (const Jump& j : traj.jumps) {
        if (j.time > start) fn(state, start, j.time);
        start = j.time;
        state = j.to;
    }
    if (traj.censor_time > start) fn(state, start, traj.censor_time);
}

}  // namespace

int TimeGrid::bin_of(double t) const {
    if (t < t0 || t >= t_max) return -1;
    int m = static_cast<int>((t - t0) / delta());
    if (m >= bins) m = bins - 1;
    // Edge arithmetic wins over the division at representability limits.
    while (m > 0 && t < lo(m)) --m;
    while (m + 1 < bins && t >= hi(m)) ++m;
    return m;
}

void TimeGrid::validate() const {
    if (bins < 1) throw ValidationError("grid needs at least one bin");
    if (!(t_max > t0)) throw ValidationError("grid needs t_max > t0");
}

std::vector<std::pair<int, int>> OETable::observed_transitions() const {
    std::vector<std::pair<int, int>> out;
    for (int from = 0; from < n_states; ++from)
        for (int to = 0; to < n_states; ++to) {
            if (from == to) continue;
            for (int m = 0; m < grid.bins; ++m)
                if (occ(from, to, m) > 0) {
                    out.emplace_back(from, to);
                    break;
                }
        }
    return out;
}

std::vector<std::pair<int, int>> OETable2D::observed_transitions() const {
    std::vector<std::pair<int, int>> out;
    for (int from = 0; from < n_states; ++from)
        for (int to = 0; to < n_states; ++to) {
            if (from == to) continue;
            bool any = false;
            for (int m1 = 0; m1 < grid.time.bins && !any; ++m1)
                for (int m2 = 0; m2 < grid.duration.bins && !any; ++m2)
                    any = occ(from, to, m1, m2) > 0;
            if (any) out.emplace_back(from, to);
        }
    return out;
}

namespace {

// Adds the overlap of [a, b) with each grid bin into cells [base + m].
void spread_exposure(const TimeGrid& grid, double a, double b, std::size_t base,
                     KahanArray& acc) {
    a = std::max(a, grid.t0);
    b = std::min(b, grid.t_max);
    if (!(a < b)) return;
    int m = std::max(0, grid.bin_of(a));
    for (; m < grid.bins && grid.lo(m) < b; ++m) {
        double piece = std::min(b, grid.hi(m)) - std::max(a, grid.lo(m));
        if (piece > 0.0) acc.add(base + static_cast<std::size_t>(m), piece);
    }
}

void check_state(int state, int n_states, std::int64_t subject) {
    if (state < 0 || state >= n_states)
        throw ValidationError("state index " + std::to_string(state) +
                              " out of range for subject " + std::to_string(subject));
}

}  // namespace

OETable aggregate_1d(std::span<const Trajectory> cohort, const TimeGrid& grid, int n_states) {
    grid.validate();
    OETable table;
    table.grid = grid;
    table.n_states = n_states;
    table.n_subjects = static_cast<std::int64_t>(cohort.size());
    table.occurrence.assign(static_cast<std::size_t>(n_states) * n_states * grid.bins, 0);
    KahanArray expo(static_cast<std::size_t>(n_states) * grid.bins);

    for (const Trajectory& traj : cohort) {
        check_state(traj.initial_state, n_states, traj.subject_id);
        for (const Jump& j : traj.jumps) {
            check_state(j.from, n_states, traj.subject_id);
            check_state(j.to, n_states, traj.subject_id);
            if (j.time >= traj.censor_time) continue;
            int m = grid.bin_of(j.time);
            if (m >= 0)
                ++table.occurrence[static_cast<std::size_t>(
                    (j.from * n_states + j.to) * grid.bins + m)];
        }
        for_each_segment(traj, [&](int state, double a, double b) {
            spread_exposure(grid, a, b, static_cast<std::size_t>(state) * grid.bins, expo);
        });
    }
    table.exposure = std::move(expo.sum);
    return table;
}

OETable2D aggregate_2d(std::span<const Trajectory> cohort, const TimeDurationGrid& grid,
                       int n_states) {
    grid.validate();
    OETable2D table;
    table.grid = grid;
    table.n_states = n_states;
    table.n_subjects = static_cast<std::int64_t>(cohort.size());
    const int m1 = grid.time.bins, m2 = grid.duration.bins;
    table.occurrence.assign(static_cast<std::size_t>(n_states) * n_states * m1 * m2, 0);
    KahanArray expo(static_cast<std::size_t>(n_states) * m1 * m2);

    for (const Trajectory& traj : cohort) {
        check_state(traj.initial_state, n_states, traj.subject_id);
        double seg_start = 0.0;
        for (const Jump& j : traj.jumps) {
            check_state(j.from, n_states, traj.subject_id);
            check_state(j.to, n_states, traj.subject_id);
            if (j.time < traj.censor_time) {
                int bt = grid.time.bin_of(j.time);
                int bu = grid.duration.bin_of(j.time - seg_start);
                if (bt >= 0 && bu >= 0)
                    ++table.occurrence[static_cast<std::size_t>(
                        (j.from * n_states + j.to) * m1 * m2 + bt * m2 + bu)];
            }
            seg_start = j.time;
        }
        for_each_segment(traj, [&](int state, double a, double b) {
            // Duration within the segment is u(s) = s - a, so the slab with
            // duration bin l covers s in [a + u_lo(l), a + u_hi(l)).
            std::size_t base = static_cast<std::size_t>(state) * m1 * m2;
            for (int l = 0; l < m2; ++l) {
                double s_lo = std::max(a + grid.duration.lo(l), a);
                double s_hi = std::min(a + grid.duration.hi(l), b);
                if (!(s_lo < s_hi)) {
                    if (a + grid.duration.lo(l) >= b) break;
                    continue;
                }
                // Intersect the slab with the time bins.
                double lo = std::max(s_lo, grid.time.t0);
                double hi = std::min(s_hi, grid.time.t_max);
                if (!(lo < hi)) continue;
                int k = std::max(0, grid.time.bin_of(lo));
                for (; k < m1 && grid.time.lo(k) < hi; ++k) {
                    double piece = std::min(hi, grid.time.hi(k)) - std::max(lo, grid.time.lo(k));
                    if (piece > 0.0)
                        expo.add(base + static_cast<std::size_t>(k * m2 + l), piece);
                }
            }
        });
    }
    table.exposure = std::move(expo.sum);
    return table;
}

OETable marginalize_duration(const OETable2D& table) {
    OETable out;
    out.grid = table.grid.time;
    out.n_states = table.n_states;
    out.n_subjects = table.n_subjects;
    const int m1 = table.grid.time.bins, m2 = table.grid.duration.bins;
    out.occurrence.assign(static_cast<std::size_t>(table.n_states) * table.n_states * m1, 0);
    out.exposure.assign(static_cast<std::size_t>(table.n_states) * m1, 0.0);
    for (int from = 0; from < table.n_states; ++from)
        for (int to = 0; to < table.n_states; ++to)
            for (int k = 0; k < m1; ++k) {
                std::int64_t sum = 0;
                for (int l = 0; l < m2; ++l) sum += table.occ(from, to, k, l);
                out.occurrence[static_cast<std::size_t>((from * table.n_states + to) * m1 + k)] =
                    sum;
            }
    for (int state = 0; state < table.n_states; ++state)
        for (int k = 0; k < m1; ++k) {
            double sum = 0.0;
            for (int l = 0; l < m2; ++l) sum += table.expo(state, k, l);
            out.exposure[static_cast<std::size_t>(state * m1 + k)] = sum;
        }
    return out;
}

SubjectWindowStats window_stats_1d(const Trajectory& traj, int from, int to, double t_lo,
                                   double t_hi) {
    SubjectWindowStats stats;
    for (const Jump& j : traj.jumps)
        if (j.from == from && j.to == to && j.time >= t_lo && j.time < t_hi &&
            j.time < traj.censor_time)
            ++stats.occ;
    for_each_segment(traj, [&](int state, double a, double b) {
        if (state != from) return;
        double piece = std::min(b, t_hi) - std::max(a, t_lo);
        if (piece > 0.0) stats.expo += piece;
    });
    return stats;
}

SubjectWindowStats window_stats_2d(const Trajectory& traj, int from, int to, double t_lo,
                                   double t_hi, double u_lo, double u_hi) {
    SubjectWindowStats stats;
    double seg_start = 0.0;
    for (const Jump& j : traj.jumps) {
        double u = j.time - seg_start;
        if (j.from == from && j.to == to && j.time >= t_lo && j.time < t_hi && u >= u_lo &&
            u < u_hi && j.time < traj.censor_time)
            ++stats.occ;
        seg_start = j.time;
    }
    for_each_segment(traj, [&](int state, double a, double b) {
        if (state != from) return;
        double lo = std::max({a, t_lo, a + u_lo});
        double hi = std::min({b, t_hi, a + u_hi});
        if (lo < hi) stats.expo += hi - lo;
    });
    return stats;
}

double occupation_probability(std::span<const Trajectory> cohort, int state, double t) {
    if (cohort.empty()) throw ValidationError("occupation probability of an empty cohort");
    if (state < 0) throw ValidationError("state not in the state space");
    std::int64_t hits = 0;
    for (const Trajectory& traj : cohort)
        if (t <= traj.censor_time && traj.state_at(t) == state) ++hits;
    return static_cast<double>(hits) / static_cast<double>(cohort.size());
}

double occupation_probability_duration(std::span<const Trajectory> cohort, int state, double t,
                                       double u) {
    if (cohort.empty()) throw ValidationError("occupation probability of an empty cohort");
    if (state < 0) throw ValidationError("state not in the state space");
    std::int64_t hits = 0;
    for (const Trajectory& traj : cohort)
        if (t <= traj.censor_time && traj.state_at(t) == state && traj.duration_at(t) <= u)
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(cohort.size());
}

}  // namespace msj
