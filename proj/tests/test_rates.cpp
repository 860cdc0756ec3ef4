#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rates.hpp"

using namespace msj;

namespace {

OETable small_table() {
    OETable table;
    table.grid = {0.0, 6.0, 3};
    table.n_states = 2;
    table.n_subjects = 50;
    table.occurrence.assign(2 * 2 * 3, 0);
    table.exposure.assign(2 * 3, 0.0);
    auto occ = [&](int from, int to, int m) -> std::int64_t& {
        return table.occurrence[static_cast<std::size_t>((from * 2 + to) * 3 + m)];
    };
    auto expo = [&](int s, int m) -> double& {
        return table.exposure[static_cast<std::size_t>(s * 3 + m)];
    };
    occ(0, 1, 0) = 0;
    expo(0, 0) = 5.0;
    occ(0, 1, 1) = 12;
    expo(0, 1) = 100.0;
    // bin 2 has zero exposure
    return table;
}

}  // namespace

TEST_CASE("normal quantile matches reference values") {
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(normal_quantile(0.995) == doctest::Approx(2.575829303548901).epsilon(1e-12));
    CHECK(normal_quantile(0.001) == doctest::Approx(-3.090232306167814).epsilon(1e-10));
    for (double p : {0.01, 0.2, 0.63, 0.9, 0.9999})
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("oe rates: zero counts give a degenerate interval, empty bins undefined") {
    auto table = small_table();
    auto fit = oe_rates(table, {{0, 1}}, 0.95);
    REQUIRE(fit.rows.size() == 1);
    const auto& cells = fit.rows[0].cells;
    REQUIRE(cells.size() == 3);

    CHECK(cells[0].defined);
    CHECK(cells[0].rate == 0.0);
    CHECK(cells[0].ci_lo == 0.0);
    CHECK(cells[0].ci_hi == 0.0);

    CHECK(cells[1].defined);
    CHECK(cells[1].rate == doctest::Approx(0.12).epsilon(1e-15));
    CHECK(std::sqrt(cells[1].variance) == doctest::Approx(0.034641016).epsilon(1e-8));
    double z = normal_quantile(0.975);
    CHECK(cells[1].ci_lo == doctest::Approx(0.12 - z * std::sqrt(12.0) / 100.0).epsilon(1e-12));
    CHECK(cells[1].ci_hi == doctest::Approx(0.12 + z * std::sqrt(12.0) / 100.0).epsilon(1e-12));

    CHECK_FALSE(cells[2].defined);
}

TEST_CASE("wald intervals are floored at zero") {
    OETable table;
    table.grid = {0.0, 1.0, 1};
    table.n_states = 2;
    table.occurrence = {0, 1, 0, 0};  // one 0->1 event
    table.exposure = {100.0, 0.0};
    auto fit = oe_rates(table, {{0, 1}}, 0.99);
    CHECK(fit.rows[0].cells[0].ci_lo == 0.0);
    CHECK(fit.rows[0].cells[0].ci_hi > fit.rows[0].cells[0].rate);
}

TEST_CASE("log-scale intervals multiply instead of add") {
    auto table = small_table();
    auto fit = oe_rates(table, {{0, 1}}, 0.95, true);
    const auto& cell = fit.rows[0].cells[1];
    double z = normal_quantile(0.975);
    CHECK(cell.ci_lo == doctest::Approx(0.12 * std::exp(-z / std::sqrt(12.0))).epsilon(1e-12));
    CHECK(cell.ci_hi == doctest::Approx(0.12 * std::exp(z / std::sqrt(12.0))).epsilon(1e-12));
}

TEST_CASE("rates are scale equivariant in the exposure") {
    auto table = small_table();
    auto scaled = table;
    for (double& e : scaled.exposure) e *= 3.0;
    auto fit = oe_rates(table, {{0, 1}});
    auto fit_scaled = oe_rates(scaled, {{0, 1}});
    for (int m = 0; m < 3; ++m) {
        const auto& a = fit.rows[0].cells[static_cast<std::size_t>(m)];
        const auto& b = fit_scaled.rows[0].cells[static_cast<std::size_t>(m)];
        REQUIRE(a.defined == b.defined);
        if (a.defined) CHECK(b.rate == doctest::Approx(a.rate / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("theorem-scale variance is n*delta times the raw variance") {
    auto table = small_table();
    auto fit = oe_rates(table, {{0, 1}});
    // mu-hat = 0.12, E = 100, n = 500, delta = 2 -> p-hat = 0.1, variance 1.2
    double v = theorem_scale_variance(fit, 0, 1, 3.0, 500);
    CHECK(v == doctest::Approx(1.2).epsilon(1e-12));

    CHECK_THROWS_AS(theorem_scale_variance(fit, 0, 1, 5.5, 500), ValidationError);  // empty bin
    CHECK_THROWS_AS(theorem_scale_variance(fit, 0, 1, 99.0, 500), ValidationError);  // off grid
}

TEST_CASE("theorem-scale variance reduces to mu-hat at full occupancy") {
    OETable table;
    table.grid = {0.0, 2.0, 1};
    table.n_states = 2;
    table.n_subjects = 50;
    table.occurrence = {0, 30, 0, 0};
    table.exposure = {100.0, 0.0};  // E = n * delta: occupation probability one
    auto fit = oe_rates(table, {{0, 1}});
    double v = theorem_scale_variance(fit, 0, 1, 1.0, 50);
    CHECK(v == doctest::Approx(fit.rows[0].cells[0].rate).epsilon(1e-12));
}

TEST_CASE("diagonal slices skip inadmissible and undefined boxes") {
    OETable2D table;
    table.grid = {{0.0, 8.0, 4}, {0.0, 8.0, 4}};
    table.n_states = 2;
    table.occurrence.assign(2 * 2 * 16, 0);
    table.exposure.assign(2 * 16, 0.0);
    // state 0 exposure on the diagonal boxes only, constant rate 0.25
    for (int k = 0; k < 4; ++k) {
        table.exposure[static_cast<std::size_t>(0 * 16 + k * 4 + k)] = 16.0;
        table.occurrence[static_cast<std::size_t>((0 * 2 + 1) * 16 + k * 4 + k)] = 4;
    }
    auto fit = oe_rates(table, {{0, 1}});

    auto slice0 = diagonal_slice(fit, 0, 1, 0.0);
    REQUIRE(slice0.size() == 4);
    for (const auto& pt : slice0) CHECK(pt.cell.rate == doctest::Approx(0.25).epsilon(1e-12));

    auto slice_off = diagonal_slice(fit, 0, 1, 3.0);  // off-diagonal boxes are empty
    CHECK(slice_off.empty());

    auto slice_far = diagonal_slice(fit, 0, 1, 100.0);  // d beyond the grid
    CHECK(slice_far.empty());

    CHECK_THROWS_AS(diagonal_slice(fit, 0, 1, -1.0), ValidationError);
}
