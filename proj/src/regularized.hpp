#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rates.hpp"

namespace msj {

// Exact proximal operator of lam * TV: minimizes
//   0.5 * sum (x_i - y_i)^2 + lam * sum |x_{i+1} - x_i|
// by Condat's direct O(n) algorithm.
void tv1d_prox(std::span<const double> y, std::span<double> x, double lam);

// Max per-coordinate subgradient residual of grad(f) + lam * d(TV) at x for a
// chain objective with smooth part gradient `grad`. Zero iff x is optimal.
double fused_chain_certificate(std::span<const double> grad, std::span<const double> x,
                               double lam);

struct FusedLassoOptions {
    double tol = 1e-10;            // relative objective decrease
    double certificate_tol = 1e-6;  // per-coordinate subgradient residual
    int max_iter = 100000;
};

// Penalized Poisson log-rate fit on a fixed grid. Bins with E = 0 are
// excluded from the objective; the fusion chain bridges across them, linking
// nearest included neighbours. At lambda = 0 bins with O = 0 are clamped at
// log(1e-12).
struct FusedLassoFit {
    double lambda = 0.0;
    std::vector<double> alpha;    // per bin; NaN on excluded bins
    std::vector<char> included;   // E > 0
    double objective_value = 0.0;
    int iterations = 0;
    bool converged = false;
    double certificate = 0.0;
    int df = 0;  // distinct alpha levels among included bins

    static constexpr double kRateFloor = 1e-12;
};

FusedLassoFit fused_lasso_fit(std::span<const std::int64_t> occ, std::span<const double> expo,
                              double lambda, const FusedLassoOptions& opts = {},
                              const FusedLassoFit* warm = nullptr);

// Warm-started sweep in decreasing-lambda order; results are returned in the
// order of the (sorted) input list.
std::vector<FusedLassoFit> lasso_path(std::span<const std::int64_t> occ,
                                      std::span<const double> expo,
                                      std::vector<double> lambdas,
                                      const FusedLassoOptions& opts = {});

// Heuristic bands: variance exp(alpha)/E per bin.
std::vector<RateCell> lasso_cells(const FusedLassoFit& fit, std::span<const double> expo,
                                  double level);

struct PoissonTreeParams {
    int max_depth = 0;
    double min_exposure = 0.0;
    double min_deviance_gain = 0.0;
};

// Greedy recursive partition of the bin-index range by Poisson deviance
// reduction; leaves carry pooled occurrence/exposure rates.
struct PoissonTree {
    struct Node {
        int lo = 0, hi = 0;  // bin range [lo, hi)
        std::int64_t occ = 0;
        double expo = 0.0;
        double rate = 0.0;      // occ/expo, 0 when expo == 0
        double deviance = 0.0;  // pooled segment deviance
        int split = -1;         // boundary: left [lo, split), right [split, hi)
        double gain = 0.0;
        int left = -1, right = -1;
        int depth = 0;
    };

    std::vector<Node> nodes;  // nodes[0] is the root
    PoissonTreeParams params;

    int leaf_index_of_bin(int bin) const;
    std::vector<int> leaves() const;
};

// Pooled deviance 2 * sum [O log(O/(E r)) - (O - E r)], r = sum O / sum E,
// with the 0 log 0 = 0 convention.
double poisson_segment_deviance(std::span<const std::int64_t> occ, std::span<const double> expo,
                                int lo, int hi);

PoissonTree tree_fit(std::span<const std::int64_t> occ, std::span<const double> expo,
                     const PoissonTreeParams& params);

// Step-function value at time t (rate of the leaf containing t's bin).
double tree_predict(const PoissonTree& tree, const TimeGrid& grid, double t);

// Per-bin cells from pooled leaf statistics (variance O_leaf/E_leaf^2).
std::vector<RateCell> tree_cells(const PoissonTree& tree, double level);

}  // namespace msj
