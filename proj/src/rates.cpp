#include "rates.hpp"

#include <cmath>

namespace msj {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal quantile needs p in (0,1)");

    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};

    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // One Halley refinement against the exact CDF.
    double e = normal_cdf(x) - p;
    double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

const char* method_name(FitMethod m) {
    switch (m) {
        case FitMethod::OE: return "oe";
        case FitMethod::Lasso: return "lasso";
        case FitMethod::Tree: return "tree";
    }
    return "?";
}

const RateFit::Row* RateFit::find_row(int from, int to) const {
    for (const Row& r : rows)
        if (r.from == from && r.to == to) return &r;
    return nullptr;
}

namespace {

RateCell make_cell(std::int64_t occ, double expo, double z, bool log_scale) {
    RateCell cell;
    if (!(expo > 0.0)) return cell;
    cell.defined = true;
    cell.rate = static_cast<double>(occ) / expo;
    cell.variance = static_cast<double>(occ) / (expo * expo);
    if (log_scale && occ > 0) {
        double half = z / std::sqrt(static_cast<double>(occ));
        cell.ci_lo = cell.rate * std::exp(-half);
        cell.ci_hi = cell.rate * std::exp(half);
    } else {
        double half = z * std::sqrt(static_cast<double>(occ)) / expo;
        cell.ci_lo = std::max(0.0, cell.rate - half);
        cell.ci_hi = cell.rate + half;
    }
    return cell;
}

double z_for_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must be in (0,1)");
    return normal_quantile(0.5 + level / 2.0);
}

}  // namespace

RateFit oe_rates(const OETable& table, const std::vector<std::pair<int, int>>& transitions,
                 double level, bool log_scale_ci) {
    double z = z_for_level(level);
    RateFit fit;
    fit.grid = table.grid;
    fit.method = FitMethod::OE;
    fit.level = level;
    for (auto [from, to] : transitions) {
        RateFit::Row row{from, to, {}};
        row.cells.reserve(static_cast<std::size_t>(table.grid.bins));
        for (int m = 0; m < table.grid.bins; ++m)
            row.cells.push_back(make_cell(table.occ(from, to, m), table.expo(from, m), z,
                                          log_scale_ci));
        fit.rows.push_back(std::move(row));
    }
    return fit;
}

RateFit oe_rates(const OETable2D& table, const std::vector<std::pair<int, int>>& transitions,
                 double level, bool log_scale_ci) {
    double z = z_for_level(level);
    RateFit fit;
    fit.grid = table.grid.time;
    fit.duration_grid = table.grid.duration;
    fit.method = FitMethod::OE;
    fit.level = level;
    for (auto [from, to] : transitions) {
        RateFit::Row row{from, to, {}};
        row.cells.reserve(static_cast<std::size_t>(table.boxes()));
        for (int m1 = 0; m1 < table.grid.time.bins; ++m1)
            for (int m2 = 0; m2 < table.grid.duration.bins; ++m2)
                row.cells.push_back(make_cell(table.occ(from, to, m1, m2),
                                              table.expo(from, m1, m2), z, log_scale_ci));
        fit.rows.push_back(std::move(row));
    }
    return fit;
}

double theorem_scale_variance(const RateFit& fit, int from, int to, double t, std::int64_t n) {
    if (fit.duration_grid) throw ValidationError("theorem-scale variance is 1D only");
    int m = fit.grid.bin_of(t);
    if (m < 0) throw ValidationError("time t is outside the grid");
    const RateFit::Row* row = fit.find_row(from, to);
    if (!row) throw ValidationError("transition not present in the fit");
    const RateCell& cell = row->cells[static_cast<std::size_t>(m)];
    if (!cell.defined) throw ValidationError("empty bin: no exposure at t");
    return static_cast<double>(n) * fit.grid.delta() * cell.variance;
}

std::vector<SlicePoint> diagonal_slice(const RateFit& fit, int from, int to, double d) {
    if (!fit.duration_grid) throw ValidationError("diagonal slice needs a 2D fit");
    if (d < 0.0) throw ValidationError("slice offset d must be >= 0");
    const RateFit::Row* row = fit.find_row(from, to);
    if (!row) throw ValidationError("transition not present in the fit");

    std::vector<SlicePoint> out;
    const TimeGrid& tg = fit.grid;
    const TimeGrid& ug = *fit.duration_grid;
    for (int m1 = 0; m1 < tg.bins; ++m1) {
        double t_mid = tg.mid(m1);
        double u = t_mid - d;
        if (u < 0.0) continue;  // outside the admissible region
        int m2 = ug.bin_of(u);
        if (m2 < 0) continue;
        const RateCell& cell = row->cells[static_cast<std::size_t>(m1 * ug.bins + m2)];
        if (!cell.defined) continue;
        out.push_back({t_mid, cell});
    }
    return out;
}

}  // namespace msj
