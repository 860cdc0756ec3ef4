#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "expr.hpp"
#include "rng.hpp"

using namespace msj;

namespace {

// Random expression trees for round-trip and bound properties.
IntensityExpr random_expr(RngStream& rng, int depth) {
    auto pick = [&](int n) { return static_cast<int>(rng.next_double() * n); };
    std::string leaf;
    if (depth <= 0) {
        switch (pick(3)) {
            case 0: leaf = "t"; break;
            case 1: leaf = "u"; break;
            default: {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.6g", rng.uniform(0.0, 10.0));
                leaf = buf;
            }
        }
        return IntensityExpr::parse(leaf);
    }
    IntensityExpr a = random_expr(rng, depth - 1);
    IntensityExpr b = random_expr(rng, depth - 1);
    const char* ops[] = {"+", "-", "*", "/"};
    const char* fns[] = {"sin", "cos", "exp"};
    switch (pick(3)) {
        case 0:
            return IntensityExpr::parse("(" + a.str() + ") " + ops[pick(4)] + " (" + b.str() +
                                        ")");
        case 1:
            return IntensityExpr::parse(std::string(fns[pick(3)]) + "((" + a.str() + ")/8)");
        default:
            return IntensityExpr::parse("-(" + a.str() + ")");
    }
}

}  // namespace

TEST_CASE("parses the time-only intensity and flags no duration") {
    auto e = IntensityExpr::parse("0.09 + 0.0018*t + 0.045*sin(t/2)");
    CHECK_FALSE(e.uses_duration());
    CHECK_FALSE(e.has_division() == false);  // t/2 counts as a division node
    // mu12 at t = 20: 0.126 + 0.045 sin(10)
    double expected = 0.126 + 0.045 * std::sin(10.0);
    CHECK(e.eval(20.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(e.eval(20.0) == doctest::Approx(0.101519).epsilon(1e-4));
}

TEST_CASE("parses the logistic duration term and flags duration use") {
    auto e = IntensityExpr::parse("0.2/(1+exp(0.5*(u-4)))");
    CHECK(e.uses_duration());
    CHECK(e.eval(10.0, 4.0) == doctest::Approx(0.1).epsilon(1e-12));

    auto mu23 = IntensityExpr::parse("0.09 + 0.001*t*(1 + 0.1*u) + 0.2/(1 + exp(0.5*(u - 4)))");
    CHECK(mu23.eval(10.0, 4.0) == doctest::Approx(0.204).epsilon(1e-12));
}

TEST_CASE("syntax error reports the byte offset") {
    try {
        IntensityExpr::parse("0.1 +");
        FAIL("expected a parse error");
    } catch (const ParseError& err) {
        CHECK(err.offset() == 5);
    }
}

TEST_CASE("unknown identifiers are rejected") {
    CHECK_THROWS_AS(IntensityExpr::parse("0.1 + v"), ParseError);
    CHECK_THROWS_AS(IntensityExpr::parse("tan(t)"), ParseError);
    CHECK_THROWS_AS(IntensityExpr::parse("sin t"), ParseError);
}

TEST_CASE("constant expressions evaluate exactly") {
    auto e = IntensityExpr::parse("0.1");
    CHECK(e.eval(0.0) == 0.1);
    CHECK(e.eval(123.0) == 0.1);
    CHECK_FALSE(e.uses_duration());
}

TEST_CASE("duration is required iff the expression uses it") {
    auto e = IntensityExpr::parse("u + t");
    CHECK_THROWS_AS(e.eval(1.0), ValidationError);
    CHECK(e.eval(1.0, 2.0) == 3.0);
}

TEST_CASE("evaluation is pure") {
    auto e = IntensityExpr::parse("0.09 + 0.0018*t + 0.045*sin(t/2)");
    double a = e.eval(17.3);
    double b = e.eval(17.3);
    CHECK(a == b);  // bit identical
}

TEST_CASE("upper bound: constants and linear cases") {
    auto c = IntensityExpr::parse("0.1");
    CHECK(c.upper_bound(0.0, 5.0, 0.0, 0.0) == doctest::Approx(0.12).epsilon(1e-15));

    auto lin = IntensityExpr::parse("t");
    CHECK(lin.upper_bound(0.0, 2.0, 0.0, 0.0) == doctest::Approx(2.4).epsilon(1e-15));
}

TEST_CASE("upper bound dominates a dense scan of the total state-1 intensity") {
    auto lambda1 = IntensityExpr::parse("0.1 + 0.002*t + 0.05*sin(t/2)");
    double bound = lambda1.upper_bound(0.0, 40.0, 0.0, 0.0);

    // Independent oracle: 10^4-point scan for the true supremum.
    double sup = 0.0;
    for (int i = 0; i <= 10000; ++i) {
        double t = 40.0 * i / 10000.0;
        sup = std::max(sup, lambda1.eval(t));
    }
    CHECK(bound >= sup);
    CHECK(bound <= 1.2 * (0.1 + 0.08 + 0.05));
}

TEST_CASE("upper bound dominates the expression at random points") {
    RngStream rng(777, 0);
    auto mu23 = IntensityExpr::parse("0.09 + 0.001*t*(1 + 0.1*u) + 0.2/(1 + exp(0.5*(u - 4)))");
    double bound = mu23.upper_bound(3.0, 11.0, 1.0, 6.0);
    for (int i = 0; i < 1000; ++i) {
        double t = rng.uniform(3.0, 11.0);
        double u = rng.uniform(1.0, 6.0);
        REQUIRE(bound >= mu23.eval(t, u));
    }

    RngStream rng2(778, 0);
    for (int rep = 0; rep < 30; ++rep) {
        auto e = random_expr(rng2, 3);
        double v0 = e.uses_duration() ? e.eval(0.7, 0.3) : e.eval(0.7);
        if (!std::isfinite(v0)) continue;  // division may blow up; skip those draws
        double b;
        try {
            b = e.upper_bound(0.1, 2.0, 0.05, 1.5);
        } catch (const ValidationError&) {
            continue;
        }
        for (int i = 0; i < 200; ++i) {
            double t = rng2.uniform(0.1, 2.0);
            double u = rng2.uniform(0.05, 1.5);
            double v = e.uses_duration() ? e.eval(t, u) : e.eval(t);
            if (std::isfinite(v) && v > 0) CHECK(b >= v / 1.19);
        }
    }
}

TEST_CASE("upper bound rejects non-finite scans") {
    auto e = IntensityExpr::parse("1/(t - 1)");
    CHECK_THROWS_AS(e.upper_bound(0.0, 2.0, 0.0, 0.0), ValidationError);
}

TEST_CASE("canonical print round-trips the shipped intensities") {
    const char* sources[] = {
        "0.09 + 0.0018*t + 0.045*sin(t/2)",
        "0.2/(1+exp(0.5*(u-4)))",
        "0.09 + 0.001*t*(1 + 0.1*u) + 0.2/(1 + exp(0.5*(u - 4)))",
        "-(t + 1)*(u - 2)",
        "t - (u - 1) - 2",
        "t/(u*2)/3",
        "1 - -t",
    };
    for (const char* src : sources) {
        auto e = IntensityExpr::parse(src);
        auto reparsed = IntensityExpr::parse(e.str());
        CHECK(e == reparsed);
        CHECK(e.str() == reparsed.str());
    }
}

TEST_CASE("canonical print round-trips random expression trees") {
    RngStream rng(31337, 0);
    for (int rep = 0; rep < 300; ++rep) {
        auto e = random_expr(rng, 4);
        auto reparsed = IntensityExpr::parse(e.str());
        REQUIRE(e == reparsed);
        REQUIRE(e.str() == reparsed.str());
    }
}

TEST_CASE("sum builder behaves like parsing the textual sum") {
    auto a = IntensityExpr::parse("0.1 + t");
    auto b = IntensityExpr::parse("0.2*u");
    auto s = IntensityExpr::sum(a, b);
    CHECK(s.uses_duration());
    CHECK(s.eval(2.0, 3.0) == doctest::Approx(2.1 + 0.6).epsilon(1e-15));
    auto parsed = IntensityExpr::parse("0.1 + t + 0.2*u");
    CHECK(s == parsed);
}
