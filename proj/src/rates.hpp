#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aggregate.hpp"

namespace msj {

// Phi^{-1}(p) (Acklam's rational approximation plus one Halley step) and Phi.
double normal_quantile(double p);
double normal_cdf(double x);

struct RateCell {
    bool defined = false;
    double rate = 0.0;
    double variance = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

enum class FitMethod { OE, Lasso, Tree };

const char* method_name(FitMethod m);

// Piecewise-constant intensity estimate on a grid; one row per transition.
// For 2D fits cells are laid out m1 * duration_bins + m2.
struct RateFit {
    TimeGrid grid;
    std::optional<TimeGrid> duration_grid;
    FitMethod method = FitMethod::OE;
    double level = 0.95;
    bool heuristic_bands = false;  // lasso/tree bands are not theory-backed

    struct Row {
        int from = 0;
        int to = 0;
        std::vector<RateCell> cells;
    };
    std::vector<Row> rows;

    const Row* find_row(int from, int to) const;
};

// rate = O/E and variance = O/E^2 where E > 0 (undefined otherwise), with a
// Wald interval rate +- z * sqrt(O)/E floored at 0. log_scale_ci switches to
// rate * exp(-+ z/sqrt(O)) intervals.
RateFit oe_rates(const OETable& table, const std::vector<std::pair<int, int>>& transitions,
                 double level = 0.95, bool log_scale_ci = false);
RateFit oe_rates(const OETable2D& table, const std::vector<std::pair<int, int>>& transitions,
                 double level = 0.95, bool log_scale_ci = false);

// Variance of the sqrt(n Delta)-normalized error at the bin containing t:
// plug-in mu-hat / p-hat with p-hat = E/(n Delta), which equals
// n * Delta * (O/E^2). Throws when t is outside the grid or the bin is empty.
double theorem_scale_variance(const RateFit& fit, int from, int to, double t, std::int64_t n);

struct SlicePoint {
    double t;
    RateCell cell;
};

// Section of a 2D step surface along the line u = t - d, evaluated at time
// bin midpoints; points outside the admissible region, outside the duration
// grid, or in undefined boxes are skipped.
std::vector<SlicePoint> diagonal_slice(const RateFit& fit, int from, int to, double d);

}  // namespace msj
