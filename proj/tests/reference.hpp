#pragma once

// Naive reference aggregators: per (subject, bin) loops with direct interval
// clipping. Deliberately simple and independent of the production code path;
// the production aggregators are checked against these.

#include <algorithm>
#include <vector>

#include "aggregate.hpp"
#include "rng.hpp"

namespace msjtest {

inline msj::OETable reference_aggregate_1d(std::span<const msj::Trajectory> cohort,
                                           const msj::TimeGrid& grid, int n_states) {
    msj::OETable table;
    table.grid = grid;
    table.n_states = n_states;
    table.n_subjects = static_cast<std::int64_t>(cohort.size());
    table.occurrence.assign(static_cast<std::size_t>(n_states) * n_states * grid.bins, 0);
    table.exposure.assign(static_cast<std::size_t>(n_states) * grid.bins, 0.0);
    for (const auto& traj : cohort) {
        for (int m = 0; m < grid.bins; ++m) {
            for (const auto& j : traj.jumps)
                if (j.time < traj.censor_time && j.time >= grid.lo(m) && j.time < grid.hi(m))
                    ++table.occurrence[static_cast<std::size_t>(
                        (j.from * n_states + j.to) * grid.bins + m)];
            for (int state = 0; state < n_states; ++state) {
                double start = 0.0;
                int cur = traj.initial_state;
                double total = 0.0;
                auto clip = [&](double a, double b) {
                    double lo = std::max(a, grid.lo(m));
                    double hi = std::min(b, grid.hi(m));
                    return std::max(0.0, hi - lo);
                };
                for (const auto& j : traj.jumps) {
                    if (cur == state) total += clip(start, j.time);
                    start = j.time;
                    cur = j.to;
                }
                if (cur == state) total += clip(start, traj.censor_time);
                table.exposure[static_cast<std::size_t>(state * grid.bins + m)] += total;
            }
        }
    }
    return table;
}

inline msj::OETable2D reference_aggregate_2d(std::span<const msj::Trajectory> cohort,
                                             const msj::TimeDurationGrid& grid, int n_states) {
    msj::OETable2D table;
    table.grid = grid;
    table.n_states = n_states;
    table.n_subjects = static_cast<std::int64_t>(cohort.size());
    const int m1 = grid.time.bins, m2 = grid.duration.bins;
    table.occurrence.assign(static_cast<std::size_t>(n_states) * n_states * m1 * m2, 0);
    table.exposure.assign(static_cast<std::size_t>(n_states) * m1 * m2, 0.0);
    for (const auto& traj : cohort) {
        std::vector<std::pair<double, double>> segs;
        std::vector<int> seg_state;
        double seg_start = 0.0;
        int cur = traj.initial_state;
        for (const auto& j : traj.jumps) {
            segs.emplace_back(seg_start, j.time);
            seg_state.push_back(cur);
            seg_start = j.time;
            cur = j.to;
        }
        segs.emplace_back(seg_start, traj.censor_time);
        seg_state.push_back(cur);

        for (int k = 0; k < m1; ++k)
            for (int l = 0; l < m2; ++l) {
                seg_start = 0.0;
                for (const auto& j : traj.jumps) {
                    double u = j.time - seg_start;
                    if (j.time < traj.censor_time && j.time >= grid.time.lo(k) &&
                        j.time < grid.time.hi(k) && u >= grid.duration.lo(l) &&
                        u < grid.duration.hi(l))
                        ++table.occurrence[static_cast<std::size_t>(
                            (j.from * n_states + j.to) * m1 * m2 + k * m2 + l)];
                    seg_start = j.time;
                }
                for (std::size_t s = 0; s < segs.size(); ++s) {
                    auto [a, b] = segs[s];
                    if (!(a < b)) continue;
                    double lo = std::max({a, grid.time.lo(k), a + grid.duration.lo(l)});
                    double hi = std::min({b, grid.time.hi(k), a + grid.duration.hi(l)});
                    if (lo < hi)
                        table.exposure[static_cast<std::size_t>(seg_state[s] * m1 * m2 +
                                                                k * m2 + l)] += hi - lo;
                }
            }
    }
    return table;
}

inline std::vector<msj::Trajectory> random_cohort(int n, msj::RngStream& rng) {
    std::vector<msj::Trajectory> cohort;
    for (int i = 0; i < n; ++i) {
        msj::Trajectory t;
        t.subject_id = i;
        t.initial_state = static_cast<int>(rng.next_double() * 3);
        int jumps = static_cast<int>(rng.next_double() * 5);
        double time = 0.0;
        int state = t.initial_state;
        for (int j = 0; j < jumps; ++j) {
            time += rng.uniform(0.05, 12.0);
            if (time >= 38.0) break;
            int next = static_cast<int>(rng.next_double() * 3);
            if (next == state) next = (state + 1) % 3;
            t.jumps.push_back({time, state, next});
            state = next;
        }
        t.censor_time = rng.uniform(time + 0.01, 40.0);
        cohort.push_back(std::move(t));
    }
    return cohort;
}

}  // namespace msjtest
