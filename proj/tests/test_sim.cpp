#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <numeric>

#include "aggregate.hpp"
#include "simulate.hpp"
#include "support.hpp"

using namespace msj;

namespace {

// Test-only oracle: P(t) = exp(Q t) for a constant generator, by scaling and
// squaring of the truncated series. Independent of the simulator.
template <int N>
std::array<std::array<double, N>, N> matrix_exponential(std::array<std::array<double, N>, N> q,
                                                        double t) {
    using Mat = std::array<std::array<double, N>, N>;
    auto mul = [](const Mat& a, const Mat& b) {
        Mat c{};
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < N; ++k)
                for (int j = 0; j < N; ++j) c[i][j] += a[i][k] * b[k][j];
        return c;
    };
    int squarings = 0;
    double scale = t;
    while (std::abs(scale) > 0.5) {
        scale /= 2.0;
        ++squarings;
    }
    Mat result{};
    for (int i = 0; i < N; ++i) result[i][i] = 1.0;
    Mat term = result;
    for (int k = 1; k <= 18; ++k) {
        Mat qs{};
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) qs[i][j] = q[i][j] * scale / k;
        term = mul(term, qs);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) result[i][j] += term[i][j];
    }
    for (int s = 0; s < squarings; ++s) result = mul(result, result);
    return result;
}

IntensityModel constant_two_state(double rate) {
    IntensityModel model;
    model.states.labels = {"a", "b"};
    model.absorbing = {false, true};
    model.kind = ModelKind::Markov;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", rate);
    model.transitions.push_back({0, 1, IntensityExpr::parse(buf)});
    return model;
}

}  // namespace

TEST_CASE("starting in an absorbing state yields zero jumps") {
    auto model = msjtest::markov_study_model();
    PathSimulator sim(model, 40.0);
    RngStream stream(1, 0);
    auto traj = sim.simulate_path(2, stream);
    CHECK(traj.jumps.empty());
    CHECK(traj.censor_time == 40.0);
}

TEST_CASE("destination split out of state 1 is 0.9 to state 2") {
    auto model = msjtest::markov_study_model();
    PathSimulator sim(model, 200.0);
    int to2 = 0, first_jumps = 0;
    for (int i = 0; i < 10000; ++i) {
        RngStream stream(20240801u, static_cast<std::uint64_t>(i));
        auto traj = sim.simulate_path(0, stream);
        if (!traj.jumps.empty()) {
            ++first_jumps;
            if (traj.jumps.front().to == 1) ++to2;
        }
    }
    REQUIRE(first_jumps > 9000);  // horizon 200 leaves almost no one unjumped
    double frac = static_cast<double>(to2) / first_jumps;
    CHECK(std::abs(frac - 0.9) < 0.01);
}

TEST_CASE("constant-rate first jump time has the exponential mean") {
    auto model = constant_two_state(0.5);
    PathSimulator sim(model, 100.0);
    double sum = 0.0;
    int jumped = 0;
    for (int i = 0; i < 10000; ++i) {
        RngStream stream(7, static_cast<std::uint64_t>(i));
        auto traj = sim.simulate_path(0, stream);
        if (!traj.jumps.empty()) {
            sum += traj.jumps.front().time;
            ++jumped;
        }
    }
    // exp(0.5): mean 2, P(no jump by 100) ~ 2e-22
    CHECK(jumped == 10000);
    CHECK(std::abs(sum / jumped - 2.0) < 0.05);
}

TEST_CASE("censoring truncates jumps strictly after R") {
    Trajectory traj;
    traj.initial_state = 0;
    traj.jumps = {{3.0, 0, 1}, {12.0, 1, 2}};
    traj.censor_time = 40.0;

    RngStream stream(1, 0);
    auto censored = apply_censoring(traj, CensoringSpec::fixed(10.0), stream);
    REQUIRE(censored.jumps.size() == 1);
    CHECK(censored.jumps[0].time == 3.0);
    CHECK(censored.censor_time == 10.0);

    auto untouched = apply_censoring(traj, CensoringSpec::none(40.0), stream);
    CHECK(untouched.jumps.size() == 2);
    CHECK(untouched.censor_time == 40.0);
}

TEST_CASE("uniform censoring mean matches (lo+hi)/2") {
    auto spec = CensoringSpec::uniform(10.0, 40.0);
    RngStream stream(99, 0);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += draw_censor_time(spec, stream);
    CHECK(std::abs(sum / n - 25.0) < 0.1);
}

TEST_CASE("simulate_cohort rejects n = 0 and bad censoring bounds") {
    SimConfig config;
    config.model = msjtest::markov_study_model();
    config.initial_state = 0;
    config.n = 0;
    config.horizon = 40.0;
    config.censoring = CensoringSpec::uniform(10.0, 40.0);
    config.master_seed = 1;
    CHECK_THROWS_AS(simulate_cohort(config), ValidationError);

    config.n = 5;
    config.horizon = 20.0;  // below the censoring upper bound
    CHECK_THROWS_AS(simulate_cohort(config), ValidationError);

    CHECK_THROWS_AS(CensoringSpec::uniform(5.0, 5.0), ValidationError);
    CHECK_THROWS_AS(CensoringSpec::fixed(0.0), ValidationError);
}

TEST_CASE("cohorts are identical for any thread count") {
    auto model = msjtest::markov_study_model();
    PathSimulator sim(model, 40.0);
    auto spec = CensoringSpec::uniform(10.0, 40.0);
    auto serial = simulate_cohort(sim, 0, 2000, spec, 42, 1);
    auto parallel = simulate_cohort(sim, 0, 2000, spec, 42, 4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        REQUIRE(serial[i].jumps.size() == parallel[i].jumps.size());
        CHECK(serial[i].censor_time == parallel[i].censor_time);
        for (std::size_t j = 0; j < serial[i].jumps.size(); ++j) {
            CHECK(serial[i].jumps[j].time == parallel[i].jumps[j].time);
            CHECK(serial[i].jumps[j].from == parallel[i].jumps[j].from);
            CHECK(serial[i].jumps[j].to == parallel[i].jumps[j].to);
        }
    }
}

TEST_CASE("every emitted trajectory satisfies the type invariants") {
    auto model = msjtest::semimarkov_study_model();
    PathSimulator sim(model, 40.0);
    auto spec = CensoringSpec::uniform(10.0, 40.0);
    auto cohort = simulate_cohort(sim, 0, 5000, spec, 77, 0);
    for (const auto& traj : cohort) check_trajectory(traj, &model);
}

TEST_CASE("occupation probability matches the analytic survival integral") {
    auto model = msjtest::markov_study_model();
    PathSimulator sim(model, 40.0);
    auto spec = CensoringSpec::uniform(10.0, 40.0);
    auto cohort = simulate_cohort(sim, 0, 100000, spec, 20240801u, 0);

    double expected = msjtest::p1c_at_20();
    double se = std::sqrt(expected * (1.0 - expected) / 100000.0);
    double observed = occupation_probability(cohort, 0, 20.0);
    CHECK(std::abs(observed - expected) < 3.0 * se);
    CHECK(std::abs(observed - expected) < 0.003);
}

TEST_CASE("thinning acceptance ratio never exceeds one over a long soak") {
    SimStats stats;
    auto markov = msjtest::markov_study_model();
    auto semi = msjtest::semimarkov_study_model();
    PathSimulator sim_m(markov, 40.0);
    PathSimulator sim_s(semi, 40.0);
    for (int i = 0; i < 210000; ++i) {
        RngStream stream(555, static_cast<std::uint64_t>(i));
        sim_m.simulate_path(0, stream, &stats);
        sim_s.simulate_path(0, stream, &stats);
    }
    CHECK(stats.proposals >= 1000000);
    CHECK(stats.max_accept_ratio <= 1.0);
}

TEST_CASE("time-homogeneous empirical transition probabilities match exp(Qt)") {
    IntensityModel model;
    model.states.labels = {"1", "2", "3"};
    model.absorbing = {false, false, true};
    model.kind = ModelKind::Markov;
    model.transitions.push_back({0, 1, IntensityExpr::parse("0.3")});
    model.transitions.push_back({0, 2, IntensityExpr::parse("0.1")});
    model.transitions.push_back({1, 2, IntensityExpr::parse("0.25")});

    std::array<std::array<double, 3>, 3> q = {{{-0.4, 0.3, 0.1}, {0.0, -0.25, 0.25},
                                               {0.0, 0.0, 0.0}}};
    const double t = 2.0;
    auto p = matrix_exponential<3>(q, t);

    PathSimulator sim(model, 10.0);
    const int n = 100000;
    std::array<std::int64_t, 3> counts{};
    for (int i = 0; i < n; ++i) {
        RngStream stream(31415, static_cast<std::uint64_t>(i));
        auto traj = sim.simulate_path(0, stream);
        ++counts[static_cast<std::size_t>(traj.state_at(t))];
    }
    for (int j = 0; j < 3; ++j) {
        double expected = p[0][static_cast<std::size_t>(j)];
        double observed = static_cast<double>(counts[static_cast<std::size_t>(j)]) / n;
        double se = std::sqrt(expected * (1.0 - expected) / n);
        CHECK(std::abs(observed - expected) <= 3.0 * se);
    }
}

TEST_CASE("markov and semi-markov simulators coincide when u is unused") {
    auto model_m = msjtest::markov_study_model();
    auto model_s = model_m;
    model_s.kind = ModelKind::SemiMarkov;

    PathSimulator sim_m(model_m, 40.0);
    PathSimulator sim_s(model_s, 40.0);
    auto spec = CensoringSpec::uniform(10.0, 40.0);
    const int n = 100000;
    // Distinct seeds; otherwise the comparison is trivially zero.
    auto cohort_m = simulate_cohort(sim_m, 0, n, spec, 1001, 0);
    auto cohort_s = simulate_cohort(sim_s, 0, n, spec, 2002, 0);

    std::array<double, 11> dist_m{}, dist_s{};
    for (const auto& traj : cohort_m) dist_m[std::min<std::size_t>(traj.jumps.size(), 10)] += 1.0;
    for (const auto& traj : cohort_s) dist_s[std::min<std::size_t>(traj.jumps.size(), 10)] += 1.0;
    double tv = 0.0;
    for (int c = 0; c <= 10; ++c) tv += std::abs(dist_m[static_cast<std::size_t>(c)] -
                                                 dist_s[static_cast<std::size_t>(c)]) / n;
    CHECK(tv / 2.0 < 0.02);
}
