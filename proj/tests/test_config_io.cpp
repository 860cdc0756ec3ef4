#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "config.hpp"
#include "csv.hpp"
#include "events_io.hpp"
#include "runner.hpp"
#include "support.hpp"

using namespace msj;

namespace {

std::string study_config_text(const std::string& extra = "") {
    return
        "[model]\n"
        "states = 1, 2, 3\n"
        "absorbing = 3\n"
        "kind = markov\n"
        "[model.transitions]\n"
        "1 -> 2 = 0.09 + 0.0018*t + 0.045*sin(t/2)\n"
        "1 -> 3 = 0.01 + 0.0002*t + 0.005*sin(t/2)\n"
        "2 -> 3 = 0.06 + 0.002*t + 0.05*sin(t/2)\n"
        "[simulation]\n"
        "n = 100\n"
        "initial_state = 1\n"
        "horizon = 40\n"
        "censoring = uniform(10, 40)\n"
        "master_seed = 7\n" +
        extra;
}

}  // namespace

TEST_CASE("the shipped study config loads and validates") {
    auto cfg = AppConfig::load(std::string(TEST_SOURCE_DIR) + "/../configs/markov_sim.cfg");
    const auto& model = cfg.model();
    CHECK(model.states.size() == 3);
    CHECK(model.kind == ModelKind::Markov);
    CHECK(model.transitions.size() == 3);
    auto sim = cfg.simulation();
    CHECK(sim.n == 100000);
    CHECK(sim.censoring.law == CensoringSpec::Law::Uniform);
    CHECK(cfg.grid().bins == 40);
}

TEST_CASE("every shipped config parses") {
    for (const char* name :
         {"markov_sim.cfg", "semimarkov_sim.cfg", "paper_sweep.cfg", "clt.cfg",
          "independence.cfg", "independence_semimarkov.cfg", "lemma_markov.cfg",
          "lemma_semimarkov.cfg", "disability_synth.cfg", "disability_estimate.cfg",
          "disability_lasso.cfg", "disability_tree.cfg", "slice_surface.cfg"}) {
        CAPTURE(name);
        CHECK_NOTHROW(AppConfig::load(std::string(TEST_SOURCE_DIR) + "/../configs/" + name));
    }
}

TEST_CASE("missing master_seed is reported by name") {
    std::string text =
        "[model]\nstates = a, b\nkind = markov\n"
        "[model.transitions]\na -> b = 0.1\n"
        "[simulation]\nn = 10\ninitial_state = a\nhorizon = 5\ncensoring = none\n";
    try {
        AppConfig::from_text(text, "test.cfg");
        FAIL("expected an error");
    } catch (const ValidationError& err) {
        CHECK(std::string(err.what()).find("master_seed") != std::string::npos);
    }
}

TEST_CASE("markov models reject duration-dependent expressions") {
    std::string text =
        "[model]\nstates = a, b\nkind = markov\n"
        "[model.transitions]\na -> b = 0.1 + 0.01*u\n";
    CHECK_THROWS_AS(AppConfig::from_text(text, "test.cfg"), ValidationError);
}

TEST_CASE("unknown keys and sections are fatal and carry the line") {
    try {
        AppConfig::from_text("[simulation]\nn = 5\nbogus_key = 1\n", "test.cfg");
        FAIL("expected an error");
    } catch (const ValidationError& err) {
        std::string msg = err.what();
        CHECK(msg.find("bogus_key") != std::string::npos);
        CHECK(msg.find("test.cfg:3") != std::string::npos);
    }
    CHECK_THROWS_AS(AppConfig::from_text("[nosuch]\nx = 1\n", "test.cfg"), ValidationError);
    CHECK_THROWS_AS(AppConfig::from_text("[grid]\nbins = 2\nbins = 3\nt_max = 1\n", "test.cfg"),
                    ValidationError);
}

TEST_CASE("expression errors carry file and line") {
    std::string text =
        "[model]\nstates = a, b\nkind = markov\n"
        "[model.transitions]\na -> b = 0.1 +\n";
    try {
        AppConfig::from_text(text, "bad.cfg");
        FAIL("expected an error");
    } catch (const ValidationError& err) {
        std::string msg = err.what();
        CHECK(msg.find("bad.cfg:5") != std::string::npos);
        CHECK(msg.find("offset") != std::string::npos);
    }
}

TEST_CASE("censoring specs parse") {
    CHECK(parse_censoring("uniform(10, 40)", "x").law == CensoringSpec::Law::Uniform);
    CHECK(parse_censoring("fixed(12)", "x").lo == 12.0);
    CHECK(parse_censoring("none", "x").law == CensoringSpec::Law::None);
    CHECK_THROWS_AS(parse_censoring("gamma(1,2)", "x"), ValidationError);
    CHECK_THROWS_AS(parse_censoring("uniform(10)", "x"), ValidationError);
}

TEST_CASE("event csv round trip: export, ingest, re-export byte-identically") {
    auto cfg = AppConfig::from_text(study_config_text(), "test.cfg");
    auto cohort = simulate_cohort(cfg.simulation());
    const auto& states = cfg.model().states;

    std::string csv = events_csv(cohort, states);
    auto ingested = ingest_events_text(csv, "mem");
    REQUIRE(ingested.cohort.size() == cohort.size());
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        REQUIRE(ingested.cohort[i].jumps.size() == cohort[i].jumps.size());
        CHECK(std::abs(ingested.cohort[i].censor_time - cohort[i].censor_time) <= 5e-8);
        for (std::size_t j = 0; j < cohort[i].jumps.size(); ++j)
            CHECK(std::abs(ingested.cohort[i].jumps[j].time - cohort[i].jumps[j].time) <= 5e-8);
        check_trajectory(ingested.cohort[i]);
    }
    // Labels intern in first-appearance order here, matching the model.
    std::string csv2 = events_csv(ingested.cohort, ingested.states);
    CHECK(csv == csv2);
}

TEST_CASE("ingest rejects inconsistent files with id and line diagnostics") {
    const std::string header = "id,time,from,to\n";

    // chain break: second row leaves state b but the subject is in c
    try {
        ingest_events_text(header + "1,1.5,a,c\n1,2.5,b,a\n1,3,c,CENS\n", "mem");
        FAIL("expected an error");
    } catch (const ValidationError& err) {
        std::string msg = err.what();
        CHECK(msg.find("mem:3") != std::string::npos);
        CHECK(msg.find("subject 1") != std::string::npos);
    }

    // duplicate CENS
    CHECK_THROWS_AS(ingest_events_text(header + "1,1,a,CENS\n1,2,a,CENS\n", "mem"),
                    ValidationError);
    // unsorted ids
    CHECK_THROWS_AS(
        ingest_events_text(header + "2,1,a,CENS\n1,1,a,CENS\n", "mem"), ValidationError);
    // non-increasing times
    CHECK_THROWS_AS(
        ingest_events_text(header + "1,2,a,b\n1,2,b,a\n1,3,a,CENS\n", "mem"), ValidationError);
    // missing CENS
    CHECK_THROWS_AS(ingest_events_text(header + "1,2,a,b\n", "mem"), ValidationError);
    // negative time
    CHECK_THROWS_AS(ingest_events_text(header + "1,-2,a,CENS\n", "mem"), ValidationError);
    // reserved label
    CHECK_THROWS_AS(ingest_events_text(header + "1,1,CENS,a\n", "mem"), ValidationError);
    // bad header
    CHECK_THROWS_AS(ingest_events_text("id,time,to\n", "mem"), ValidationError);
}

TEST_CASE("numeric formatting is stable and locale-free") {
    CHECK(format_full(0.1) == "0.1");
    CHECK(format_full(0.12) == "0.12");
    CHECK(format_sig9(23.45678912345) == "23.4567891");
    CHECK(format_sig9(3.2) == "3.2");
    CHECK(parse_double("1.5e-3", "x") == 0.0015);
    CHECK_THROWS_AS(parse_double("1,5", "x"), ValidationError);
}

TEST_CASE("rate fit csv round trips through the reader") {
    OETable table;
    table.grid = {0.0, 6.0, 3};
    table.n_states = 2;
    table.occurrence = {0, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0};
    table.exposure = {4.0, 5.0, 0.0, 1.0, 1.0, 1.0};
    auto fit = oe_rates(table, {{0, 1}});

    StateSpace states;
    states.labels = {"a", "b"};
    std::string csv = rate_fit_csv(fit, states);
    std::string path = "/tmp/msjump_fit_roundtrip.csv";
    write_text_file(path, csv);

    StateSpace read_states;
    auto fit2 = read_rate_fit_csv(path, read_states);
    REQUIRE(fit2.rows.size() == 1);
    REQUIRE(fit2.grid.bins == 3);
    CHECK(fit2.grid.t_max == 6.0);
    for (int m = 0; m < 3; ++m) {
        const auto& a = fit.rows[0].cells[static_cast<std::size_t>(m)];
        const auto& b = fit2.rows[0].cells[static_cast<std::size_t>(m)];
        REQUIRE(a.defined == b.defined);
        if (a.defined) {
            CHECK(a.rate == b.rate);
            CHECK(a.variance == b.variance);
            CHECK(a.ci_lo == b.ci_lo);
            CHECK(a.ci_hi == b.ci_hi);
        }
    }
}

TEST_CASE("2d rate fit csv round trips and slices match") {
    OETable2D table;
    table.grid = {{0.0, 8.0, 4}, {0.0, 8.0, 4}};
    table.n_states = 2;
    table.occurrence.assign(2 * 2 * 16, 0);
    table.exposure.assign(2 * 16, 0.0);
    for (int k = 0; k < 4; ++k) {
        table.exposure[static_cast<std::size_t>(k * 4 + k)] = 10.0;
        table.occurrence[static_cast<std::size_t>(16 + k * 4 + k)] =
            static_cast<std::int64_t>(k + 1);
    }
    auto fit = oe_rates(table, {{0, 1}});
    StateSpace states;
    states.labels = {"x", "y"};
    std::string path = "/tmp/msjump_fit2d_roundtrip.csv";
    write_text_file(path, rate_fit_csv(fit, states));

    StateSpace read_states;
    auto fit2 = read_rate_fit_csv(path, read_states);
    REQUIRE(fit2.duration_grid.has_value());
    CHECK(fit2.grid.bins == 4);
    CHECK(fit2.duration_grid->bins == 4);
    auto s1 = diagonal_slice(fit, 0, 1, 0.0);
    auto s2 = diagonal_slice(fit2, 0, 1, 0.0);
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1[i].cell.rate == s2[i].cell.rate);
}

TEST_CASE("oe table csv carries the hand-computed example") {
    Trajectory traj;
    traj.initial_state = 0;
    traj.jumps = {{3.2, 0, 1}};
    traj.censor_time = 12.0;
    TimeGrid grid{0.0, 40.0, 4};
    auto table = aggregate_1d(std::span(&traj, 1), grid, 3);
    StateSpace states;
    states.labels = {"1", "2", "3"};
    std::string csv = oe_table_csv(table, states, {{0, 1}});
    CHECK(csv.find("transition,bin_index,t_lo,t_hi,occurrence,exposure\n") == 0);
    CHECK(csv.find("1->2,1,0,10,1,3.2\n") != std::string::npos);
    CHECK(csv.find("1->2,2,10,20,0,0\n") != std::string::npos);
}
