#include "regularized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msj {

void tv1d_prox(std::span<const double> y, std::span<double> x, double lam) {
    const int n = static_cast<int>(y.size());
    if (n == 0) return;
    if (lam <= 0.0 || n == 1) {
        std::copy(y.begin(), y.end(), x.begin());
        return;
    }

    // Condat (2013), "A direct algorithm for 1-D total variation denoising".
    int k = 0, k0 = 0, kplus = 0, kminus = 0;
    double umin = lam, umax = -lam;
    double vmin = y[0] - lam, vmax = y[0] + lam;
    const double twolam = 2.0 * lam;

    for (;;) {
        while (k == n - 1) {
            if (umin < 0.0) {
                do x[static_cast<std::size_t>(k0++)] = vmin;
                while (k0 <= kminus);
                k = kminus = k0;
                vmin = y[static_cast<std::size_t>(k)];
                umin = lam;
                umax = vmin + umin - vmax;
            } else if (umax > 0.0) {
                do x[static_cast<std::size_t>(k0++)] = vmax;
                while (k0 <= kplus);
                k = kplus = k0;
                vmax = y[static_cast<std::size_t>(k)];
                umax = -lam;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1);
                do x[static_cast<std::size_t>(k0++)] = vmin;
                while (k0 <= k);
                return;
            }
        }
        if ((umin += y[static_cast<std::size_t>(k + 1)] - vmin) < -lam) {
            do x[static_cast<std::size_t>(k0++)] = vmin;
            while (k0 <= kminus);
            k = kplus = kminus = k0;
            vmin = y[static_cast<std::size_t>(k)];
            vmax = vmin + twolam;
            umin = lam;
            umax = -lam;
        } else if ((umax += y[static_cast<std::size_t>(k + 1)] - vmax) > lam) {
            do x[static_cast<std::size_t>(k0++)] = vmax;
            while (k0 <= kplus);
            k = kplus = kminus = k0;
            vmax = y[static_cast<std::size_t>(k)];
            vmin = vmax - twolam;
            umin = lam;
            umax = -lam;
        } else {
            ++k;
            if (umin >= lam) {
                kminus = k;
                vmin += (umin - lam) / (kminus - k0 + 1);
                umin = lam;
            }
            if (umax <= -lam) {
                kplus = k;
                vmax += (umax + lam) / (kplus - k0 + 1);
                umax = -lam;
            }
        }
    }
}

double fused_chain_certificate(std::span<const double> grad, std::span<const double> x,
                               double lam) {
    const std::size_t n = x.size();
    if (n == 0) return 0.0;
    if (lam <= 0.0) {
        double worst = 0.0;
        for (double g : grad) worst = std::max(worst, std::abs(g));
        return worst;
    }

    // Stationarity: grad_i + lam * (sigma_i - sigma_{i+1}) = 0 with sigma_i
    // the subgradient on the edge into i (sgn on jumps, free in [-1,1] on
    // ties, 0 outside the chain). The sigmas are forced by telescoping; the
    // residual is whatever clipping to the feasible set leaves behind.
    double worst = 0.0;
    double sigma = 0.0;  // edge into coordinate i
    for (std::size_t i = 0; i < n; ++i) {
        double ideal = sigma + grad[i] / lam;  // wanted sigma_{i+1}
        double next;
        if (i + 1 < n) {
            double tie_tol = 1e-8 * (1.0 + std::abs(x[i]) + std::abs(x[i + 1]));
            double diff = x[i + 1] - x[i];
            if (diff > tie_tol)
                next = 1.0;
            else if (diff < -tie_tol)
                next = -1.0;
            else
                next = std::clamp(ideal, -1.0, 1.0);
        } else {
            next = 0.0;  // virtual right boundary
        }
        worst = std::max(worst, lam * std::abs(ideal - next));
        sigma = next;
    }
    return worst;
}

namespace {

struct CompactProblem {
    std::vector<double> occ;   // as doubles, included bins only
    std::vector<double> expo;
    std::vector<std::size_t> full_index;

    std::size_t size() const { return occ.size(); }

    double smooth_value(std::span<const double> a) const {
        double f = 0.0;
        for (std::size_t k = 0; k < size(); ++k) f += expo[k] * std::exp(a[k]) - occ[k] * a[k];
        return f;
    }

    void gradient(std::span<const double> a, std::span<double> g) const {
        for (std::size_t k = 0; k < size(); ++k) g[k] = expo[k] * std::exp(a[k]) - occ[k];
    }

    static double tv(std::span<const double> a) {
        double s = 0.0;
        for (std::size_t k = 1; k < a.size(); ++k) s += std::abs(a[k] - a[k - 1]);
        return s;
    }

    double objective(std::span<const double> a, double lam) const {
        return smooth_value(a) + lam * tv(a);
    }
};

int count_levels(std::span<const double> a) {
    if (a.empty()) return 0;
    int levels = 1;
    for (std::size_t k = 1; k < a.size(); ++k)
        if (std::abs(a[k] - a[k - 1]) > 1e-8 * (1.0 + std::abs(a[k]) + std::abs(a[k - 1])))
            ++levels;
    return levels;
}

// Solves the problem restricted to the fused-block structure of a: per block
// E_B e^beta = O_B - lam * (sigma_in - sigma_out) in closed form. Returns
// false when the structure is inconsistent (nonpositive right-hand side or
// flipped block ordering).
bool block_polish(const CompactProblem& p, double lam, std::vector<double>& a) {
    const std::size_t n = p.size();
    std::vector<std::size_t> starts;
    starts.push_back(0);
    for (std::size_t k = 1; k < n; ++k)
        if (std::abs(a[k] - a[k - 1]) > 1e-9 * (1.0 + std::abs(a[k]) + std::abs(a[k - 1])))
            starts.push_back(k);
    std::size_t blocks = starts.size();

    std::vector<double> beta(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        std::size_t lo = starts[b];
        std::size_t hi = b + 1 < blocks ? starts[b + 1] : n;
        double occ = 0.0, expo = 0.0;
        for (std::size_t k = lo; k < hi; ++k) {
            occ += p.occ[k];
            expo += p.expo[k];
        }
        double sigma_in = b == 0 ? 0.0 : (a[lo] > a[lo - 1] ? 1.0 : -1.0);
        double sigma_out = b + 1 == blocks ? 0.0 : (a[hi] > a[hi - 1] ? 1.0 : -1.0);
        double rhs = occ - lam * (sigma_in - sigma_out);
        if (!(rhs > 0.0) || !(expo > 0.0)) return false;
        beta[b] = std::log(rhs / expo);
    }
    // The closed form is only stationary if the assumed jump signs survive.
    for (std::size_t b = 1; b < blocks; ++b) {
        bool was_up = a[starts[b]] > a[starts[b] - 1];
        if (was_up != (beta[b] > beta[b - 1])) return false;
    }
    for (std::size_t b = 0; b < blocks; ++b) {
        std::size_t lo = starts[b];
        std::size_t hi = b + 1 < blocks ? starts[b + 1] : n;
        for (std::size_t k = lo; k < hi; ++k) a[k] = beta[b];
    }
    return true;
}

FusedLassoFit solve_compact(const CompactProblem& p, double lambda,
                            const FusedLassoOptions& opts, std::vector<double> alpha0) {
    const std::size_t n = p.size();
    FusedLassoFit out;
    out.lambda = lambda;

    std::vector<double> a = std::move(alpha0);
    std::vector<double> grad(n), trial(n), shifted(n);

    if (lambda == 0.0) {
        for (std::size_t k = 0; k < n; ++k)
            a[k] = p.occ[k] > 0.0 ? std::log(p.occ[k] / p.expo[k])
                                  : std::log(FusedLassoFit::kRateFloor);
        p.gradient(a, grad);
        out.alpha = a;
        out.objective_value = p.objective(a, 0.0);
        out.converged = true;
        // The clamp leaves a residual of E * 1e-12 on empty bins; that is the
        // documented floor, not a convergence failure.
        out.certificate = fused_chain_certificate(grad, a, 0.0);
        return out;
    }

    double fa = p.smooth_value(a);
    double objective = fa + lambda * CompactProblem::tv(a);
    p.gradient(a, grad);
    double curvature = 1e-8;
    for (std::size_t k = 0; k < n; ++k) curvature = std::max(curvature, p.expo[k] * std::exp(a[k]));
    double step = 1.0 / curvature;

    int iter = 0;
    bool small_decrease = false;
    double certificate = fused_chain_certificate(grad, a, lambda);

    while (iter < opts.max_iter) {
        if (small_decrease && certificate <= opts.certificate_tol) break;
        ++iter;

        // Proximal gradient step with backtracking line search.
        double accepted_f = 0.0;
        for (int half = 0; half < 200; ++half) {
            for (std::size_t k = 0; k < n; ++k) shifted[k] = a[k] - step * grad[k];
            tv1d_prox(shifted, trial, step * lambda);
            double ft = p.smooth_value(trial);
            double q = fa;
            double dist2 = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                double d = trial[k] - a[k];
                q += grad[k] * d;
                dist2 += d * d;
            }
            q += dist2 / (2.0 * step);
            if (std::isfinite(ft) && ft <= q + 1e-12 * (1.0 + std::abs(fa))) {
                accepted_f = ft;
                break;
            }
            step *= 0.5;
            if (half == 199) accepted_f = ft;
        }
        a.swap(trial);
        fa = accepted_f;
        double new_objective = fa + lambda * CompactProblem::tv(a);
        small_decrease = (objective - new_objective) <= opts.tol * std::max(1.0, std::abs(objective));
        objective = new_objective;
        p.gradient(a, grad);
        certificate = fused_chain_certificate(grad, a, lambda);
        step *= 1.2;  // cautious growth; backtracking undoes overshoots

        // The prox loop crawls near the optimum; the fused-block structure is
        // usually already correct there and admits a closed-form finish.
        if (certificate > opts.certificate_tol && (iter % 10 == 0 || small_decrease)) {
            std::vector<double> polished = a;
            if (block_polish(p, lambda, polished)) {
                double fp = p.smooth_value(polished);
                double op = fp + lambda * CompactProblem::tv(polished);
                if (op <= objective + 1e-12 * (1.0 + std::abs(objective))) {
                    double cert_p;
                    {
                        std::vector<double> gp(n);
                        p.gradient(polished, gp);
                        cert_p = fused_chain_certificate(gp, polished, lambda);
                    }
                    if (cert_p < certificate) {
                        a = std::move(polished);
                        fa = fp;
                        small_decrease = (objective - op) <=
                                         opts.tol * std::max(1.0, std::abs(objective));
                        objective = op;
                        p.gradient(a, grad);
                        certificate = cert_p;
                    }
                }
            }
        }
    }

    out.alpha = a;
    out.objective_value = objective;
    out.iterations = iter;
    out.certificate = certificate;
    out.converged = certificate <= opts.certificate_tol && iter < opts.max_iter;
    return out;
}

}  // namespace

FusedLassoFit fused_lasso_fit(std::span<const std::int64_t> occ, std::span<const double> expo,
                              double lambda, const FusedLassoOptions& opts,
                              const FusedLassoFit* warm) {
    if (occ.size() != expo.size()) throw ValidationError("occurrence/exposure length mismatch");
    if (lambda < 0.0) throw ValidationError("lambda must be >= 0");

    CompactProblem p;
    bool any_active = false;
    for (std::size_t m = 0; m < occ.size(); ++m) {
        if (!(expo[m] > 0.0)) continue;
        if (occ[m] < 0) throw ValidationError("negative occurrence count");
        p.occ.push_back(static_cast<double>(occ[m]));
        p.expo.push_back(expo[m]);
        p.full_index.push_back(m);
        if (occ[m] > 0) any_active = true;
    }
    for (std::size_t m = 0; m < occ.size(); ++m)
        if (occ[m] > 0 && !(expo[m] > 0.0))
            throw ValidationError("bin with occurrences but zero exposure");
    if (p.size() == 0 || !any_active)
        throw ValidationError("fused lasso needs at least one bin with exposure and events");

    std::vector<double> alpha0(p.size());
    if (warm && warm->alpha.size() == occ.size()) {
        for (std::size_t k = 0; k < p.size(); ++k) alpha0[k] = warm->alpha[p.full_index[k]];
    } else {
        double total_occ = 0.0, total_expo = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            total_occ += p.occ[k];
            total_expo += p.expo[k];
        }
        std::fill(alpha0.begin(), alpha0.end(), std::log(total_occ / total_expo));
    }

    FusedLassoFit compact = solve_compact(p, lambda, opts, std::move(alpha0));

    FusedLassoFit out;
    out.lambda = lambda;
    out.alpha.assign(occ.size(), std::numeric_limits<double>::quiet_NaN());
    out.included.assign(occ.size(), 0);
    for (std::size_t k = 0; k < p.size(); ++k) {
        out.alpha[p.full_index[k]] = compact.alpha[k];
        out.included[p.full_index[k]] = 1;
    }
    out.objective_value = compact.objective_value;
    out.iterations = compact.iterations;
    out.converged = compact.converged;
    out.certificate = compact.certificate;
    out.df = count_levels(compact.alpha);
    return out;
}

std::vector<FusedLassoFit> lasso_path(std::span<const std::int64_t> occ,
                                      std::span<const double> expo, std::vector<double> lambdas,
                                      const FusedLassoOptions& opts) {
    std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
    std::vector<FusedLassoFit> path;
    path.reserve(lambdas.size());
    const FusedLassoFit* warm = nullptr;
    for (double lam : lambdas) {
        path.push_back(fused_lasso_fit(occ, expo, lam, opts, warm));
        warm = &path.back();
    }
    return path;
}

std::vector<RateCell> lasso_cells(const FusedLassoFit& fit, std::span<const double> expo,
                                  double level) {
    double z = normal_quantile(0.5 + level / 2.0);
    std::vector<RateCell> cells(fit.alpha.size());
    for (std::size_t m = 0; m < fit.alpha.size(); ++m) {
        if (!fit.included[m]) continue;
        RateCell& c = cells[m];
        c.defined = true;
        c.rate = std::exp(fit.alpha[m]);
        c.variance = c.rate / expo[m];
        double half = z * std::sqrt(c.variance);
        c.ci_lo = std::max(0.0, c.rate - half);
        c.ci_hi = c.rate + half;
    }
    return cells;
}

double poisson_segment_deviance(std::span<const std::int64_t> occ, std::span<const double> expo,
                                int lo, int hi) {
    double so = 0.0, se = 0.0;
    for (int m = lo; m < hi; ++m) {
        so += static_cast<double>(occ[static_cast<std::size_t>(m)]);
        se += expo[static_cast<std::size_t>(m)];
    }
    if (!(so > 0.0) || !(se > 0.0)) return 0.0;
    double r = so / se;
    double d = 0.0;
    for (int m = lo; m < hi; ++m) {
        double o = static_cast<double>(occ[static_cast<std::size_t>(m)]);
        double e = expo[static_cast<std::size_t>(m)];
        if (o > 0.0) d += o * std::log(o / (e * r)) - (o - e * r);
        else d += e * r;
    }
    return 2.0 * d;
}

int PoissonTree::leaf_index_of_bin(int bin) const {
    int idx = 0;
    for (;;) {
        const Node& node = nodes[static_cast<std::size_t>(idx)];
        if (node.left < 0) return idx;
        idx = bin < node.split ? node.left : node.right;
    }
}

std::vector<int> PoissonTree::leaves() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].left < 0) out.push_back(static_cast<int>(i));
    return out;
}

PoissonTree tree_fit(std::span<const std::int64_t> occ, std::span<const double> expo,
                     const PoissonTreeParams& params) {
    if (occ.size() != expo.size()) throw ValidationError("occurrence/exposure length mismatch");
    if (params.max_depth < 0) throw ValidationError("max_depth must be >= 0");
    if (!(params.min_exposure >= 0.0)) throw ValidationError("min_exposure must be >= 0");
    if (!(params.min_deviance_gain >= 0.0))
        throw ValidationError("min_deviance_gain must be >= 0");
    const int m_total = static_cast<int>(occ.size());
    double total_expo = 0.0;
    for (double e : expo) total_expo += e;
    for (std::size_t m = 0; m < occ.size(); ++m)
        if (occ[m] > 0 && !(expo[m] > 0.0))
            throw ValidationError("bin with occurrences but zero exposure");
    if (!(total_expo > 0.0)) throw ValidationError("tree fit needs positive total exposure");

    PoissonTree tree;
    tree.params = params;

    auto make_node = [&](int lo, int hi, int depth) {
        PoissonTree::Node node;
        node.lo = lo;
        node.hi = hi;
        node.depth = depth;
        for (int m = lo; m < hi; ++m) {
            node.occ += occ[static_cast<std::size_t>(m)];
            node.expo += expo[static_cast<std::size_t>(m)];
        }
        node.rate = node.expo > 0.0 ? static_cast<double>(node.occ) / node.expo : 0.0;
        node.deviance = poisson_segment_deviance(occ, expo, lo, hi);
        tree.nodes.push_back(node);
        return static_cast<int>(tree.nodes.size()) - 1;
    };

    // Explicit stack to keep node indices stable while growing the vector.
    std::vector<int> pending;
    pending.push_back(make_node(0, m_total, 0));
    while (!pending.empty()) {
        int idx = pending.back();
        pending.pop_back();
        PoissonTree::Node node = tree.nodes[static_cast<std::size_t>(idx)];
        if (node.depth >= params.max_depth || node.hi - node.lo < 2) continue;

        int best_split = -1;
        double best_gain = 0.0;
        for (int s = node.lo + 1; s < node.hi; ++s) {
            double expo_left = 0.0, expo_right = 0.0;
            for (int m = node.lo; m < s; ++m) expo_left += expo[static_cast<std::size_t>(m)];
            expo_right = node.expo - expo_left;
            if (expo_left < params.min_exposure || expo_right < params.min_exposure) continue;
            double gain = node.deviance - poisson_segment_deviance(occ, expo, node.lo, s) -
                          poisson_segment_deviance(occ, expo, s, node.hi);
            if (gain > best_gain) {  // ties keep the smallest boundary
                best_gain = gain;
                best_split = s;
            }
        }
        if (best_split < 0 || best_gain < params.min_deviance_gain || !(best_gain > 0.0))
            continue;

        int left = make_node(node.lo, best_split, node.depth + 1);
        int right = make_node(best_split, node.hi, node.depth + 1);
        PoissonTree::Node& stored = tree.nodes[static_cast<std::size_t>(idx)];
        stored.split = best_split;
        stored.gain = best_gain;
        stored.left = left;
        stored.right = right;
        pending.push_back(right);
        pending.push_back(left);
    }
    return tree;
}

double tree_predict(const PoissonTree& tree, const TimeGrid& grid, double t) {
    int bin = grid.bin_of(t);
    if (bin < 0) throw ValidationError("time t is outside the grid");
    return tree.nodes[static_cast<std::size_t>(tree.leaf_index_of_bin(bin))].rate;
}

std::vector<RateCell> tree_cells(const PoissonTree& tree, double level) {
    double z = normal_quantile(0.5 + level / 2.0);
    const PoissonTree::Node& root = tree.nodes[0];
    std::vector<RateCell> cells(static_cast<std::size_t>(root.hi - root.lo));
    for (int bin = root.lo; bin < root.hi; ++bin) {
        const PoissonTree::Node& leaf =
            tree.nodes[static_cast<std::size_t>(tree.leaf_index_of_bin(bin))];
        RateCell& c = cells[static_cast<std::size_t>(bin - root.lo)];
        if (!(leaf.expo > 0.0)) continue;
        c.defined = true;
        c.rate = leaf.rate;
        c.variance = static_cast<double>(leaf.occ) / (leaf.expo * leaf.expo);
        double half = z * std::sqrt(static_cast<double>(leaf.occ)) / leaf.expo;
        c.ci_lo = std::max(0.0, c.rate - half);
        c.ci_hi = c.rate + half;
    }
    return cells;
}

}  // namespace msj
