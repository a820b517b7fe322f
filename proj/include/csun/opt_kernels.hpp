#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "csun/types.hpp"

namespace csun {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Multiplier bundle shared by the pricing / dual solvers. The subchannel
// solver uses lambda (interference rows), mu (energy rows), gamma (per-slot
// power rows) and zeta (assignment rows); the max-min path uses nu/xi/theta
// for the same three row families plus psi for the per-user rate rows and the
// slack tau. delta1..3 are the diminishing step scales.
struct DualState {
    std::vector<std::vector<double>> lambda;  // [n][i]
    std::vector<double> mu;                   // [k]
    std::vector<std::vector<double>> gamma;   // [n][k]
    std::vector<std::vector<double>> zeta;    // [n][g]
    std::vector<double> nu;                   // interference rows, flattened
    std::vector<double> xi;                   // energy rows
    std::vector<double> theta;                // power rows
    std::vector<double> psi;                  // per-user rate rows
    double tau = 0.0;
    double delta1 = 0.0, delta2 = 0.0, delta3 = 0.0;

    bool nonnegative() const {
        auto ok = [](const std::vector<double>& v) {
            return std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; });
        };
        for (const auto& v : lambda)
            if (!ok(v)) return false;
        for (const auto& v : gamma)
            if (!ok(v)) return false;
        for (const auto& v : zeta)
            if (!ok(v)) return false;
        return ok(mu) && ok(nu) && ok(xi) && ok(theta) && ok(psi);
    }
};

// ---------------------------------------------------------------------------
// dense LP, two-phase simplex with Bland's rule
// ---------------------------------------------------------------------------

enum class LpStatus { optimal, infeasible, unbounded };

struct LinearProgram {
    std::vector<double> objective;          // maximize c^T x
    std::vector<std::vector<double>> rows;  // A x <= rhs
    std::vector<double> rhs;
    std::vector<double> lower;  // finite lower bounds
    std::vector<double> upper;  // may be +inf
};

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;
    double objective = 0.0;
};

namespace detail {

// revised simplex over the original column data. The basis inverse is rebuilt
// from scratch every iteration; the time-allocation LPs sit at heavily
// degenerate vertices and a classic tableau accumulates enough roundoff over
// the long degenerate pivot cascades to walk the basis infeasible.
class SimplexTableau {
public:
    // columns: n structural, then one slack per row, then artificials
    SimplexTableau(const std::vector<std::vector<double>>& rows, const std::vector<double>& rhs,
                   int n)
        : n_(n), m_(static_cast<int>(rows.size())) {
        int nart = 0;
        for (int i = 0; i < m_; ++i)
            if (rhs[i] < 0.0) ++nart;
        first_artificial_ = n_ + m_;
        ncols_ = n_ + m_ + nart;
        cols_ = Eigen::MatrixXd::Zero(m_, ncols_);
        b_ = Eigen::VectorXd::Zero(m_);
        basis_.assign(m_, -1);
        int art = first_artificial_;
        for (int i = 0; i < m_; ++i) {
            const double sgn = rhs[i] < 0.0 ? -1.0 : 1.0;
            for (int j = 0; j < n_; ++j) cols_(i, j) = sgn * rows[i][j];
            cols_(i, n_ + i) = sgn;
            b_(i) = sgn * rhs[i];
            if (rhs[i] < 0.0) {
                cols_(i, art) = 1.0;
                basis_[i] = art++;
            } else {
                basis_[i] = n_ + i;
            }
        }
        xb_ = b_;
    }

    // minimize cost over current basis; returns false on unbounded
    bool run(const std::vector<double>& cost, bool forbid_artificials) {
        double cmax = 1.0;
        for (double c : cost) cmax = std::max(cmax, std::abs(c));
        const double dtol = 1e-10 * cmax;
        std::vector<char> in_basis(ncols_, 0);
        for (int iter = 0; iter < 50000; ++iter) {
            const Eigen::MatrixXd binv = basis_inverse();
            xb_ = binv * b_;
            Eigen::VectorXd cb(m_);
            for (int i = 0; i < m_; ++i) cb(i) = cost_of(cost, basis_[i]);
            const Eigen::VectorXd y = binv.transpose() * cb;
            std::fill(in_basis.begin(), in_basis.end(), 0);
            for (int i = 0; i < m_; ++i) in_basis[basis_[i]] = 1;
            int enter = -1;
            for (int j = 0; j < ncols_; ++j) {
                if (forbid_artificials && j >= first_artificial_) break;
                if (in_basis[j]) continue;
                if (cost_of(cost, j) - y.dot(cols_.col(j)) < -dtol) {
                    enter = j;
                    break;  // Bland: lowest eligible index
                }
            }
            if (enter < 0) return true;
            const Eigen::VectorXd w = binv * cols_.col(enter);
            // fresh solves keep basic values exact to one factorization, so
            // anything below zero is single-solve roundoff
            double best = kInf;
            for (int i = 0; i < m_; ++i)
                if (w(i) > 1e-9) best = std::min(best, std::max(xb_(i), 0.0) / w(i));
            if (best == kInf) return false;
            // among near-tied rows prefer the largest pivot so the next basis
            // stays well conditioned; fall back to Bland's leaving rule if the
            // magnitude preference ever stalls in a degenerate cycle
            const double tie = 1e-9 * (1.0 + best);
            const bool bland = iter >= 5000;
            int leave = -1;
            for (int i = 0; i < m_; ++i) {
                if (w(i) <= 1e-9 || std::max(xb_(i), 0.0) / w(i) > best + tie) continue;
                if (leave < 0 || (bland ? basis_[i] < basis_[leave] : w(i) > w(leave))) leave = i;
            }
            basis_[leave] = enter;
        }
        throw NumericalError("solve_lp: simplex iteration cap hit", 0.0);
    }

    double objective_value(const std::vector<double>& cost) const {
        double v = 0.0;
        for (int i = 0; i < m_; ++i) v += cost_of(cost, basis_[i]) * xb_(i);
        return v;
    }

    // swap zero-valued artificials out of the basis where possible
    void purge_artificials() {
        for (int i = 0; i < m_; ++i) {
            if (basis_[i] < first_artificial_) continue;
            const Eigen::MatrixXd binv = basis_inverse();
            std::vector<char> in_basis(ncols_, 0);
            for (int r = 0; r < m_; ++r) in_basis[basis_[r]] = 1;
            for (int j = 0; j < first_artificial_; ++j) {
                if (in_basis[j]) continue;
                if (std::abs(binv.row(i).dot(cols_.col(j))) > 1e-9) {
                    basis_[i] = j;
                    break;
                }
            }
            // no replacement: redundant row, harmless to leave (its rhs is ~0)
        }
        xb_ = basis_inverse() * b_;
    }

    std::vector<double> extract(int n) const {
        std::vector<double> x(n, 0.0);
        for (int i = 0; i < m_; ++i)
            if (basis_[i] < n) x[basis_[i]] = xb_(i);
        return x;
    }

private:
    static double cost_of(const std::vector<double>& cost, int j) {
        return j < static_cast<int>(cost.size()) ? cost[j] : 0.0;
    }

    Eigen::MatrixXd basis_inverse() const {
        Eigen::MatrixXd B(m_, m_);
        for (int i = 0; i < m_; ++i) B.col(i) = cols_.col(basis_[i]);
        return B.partialPivLu().inverse();
    }

    int n_, m_, ncols_ = 0, first_artificial_ = 0;
    Eigen::MatrixXd cols_;
    Eigen::VectorXd b_;
    Eigen::VectorXd xb_;
    std::vector<int> basis_;
};

}  // namespace detail

inline LpSolution solve_lp(const LinearProgram& lp) {
    const int n = static_cast<int>(lp.objective.size());
    const int m = static_cast<int>(lp.rows.size());
    if (static_cast<int>(lp.rhs.size()) != m || static_cast<int>(lp.lower.size()) != n ||
        static_cast<int>(lp.upper.size()) != n)
        throw std::invalid_argument("solve_lp: dimension mismatch");
    for (const auto& r : lp.rows)
        if (static_cast<int>(r.size()) != n) throw std::invalid_argument("solve_lp: row width");
    for (int j = 0; j < n; ++j) {
        if (!std::isfinite(lp.lower[j]) || lp.upper[j] < lp.lower[j])
            throw std::invalid_argument("solve_lp: bad bounds");
    }

    // shift x = lower + x', add rows for finite upper bounds
    std::vector<std::vector<double>> rows = lp.rows;
    std::vector<double> rhs = lp.rhs;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) rhs[i] -= lp.rows[i][j] * lp.lower[j];
    for (int j = 0; j < n; ++j) {
        if (!std::isfinite(lp.upper[j])) continue;
        std::vector<double> row(n, 0.0);
        row[j] = 1.0;
        rows.push_back(std::move(row));
        rhs.push_back(lp.upper[j] - lp.lower[j]);
    }
    // row scaling keeps the fixed tolerances meaningful
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double mx = std::abs(rhs[i]);
        for (double v : rows[i]) mx = std::max(mx, std::abs(v));
        if (mx > 0.0)
            for (std::size_t j = 0; j < rows[i].size(); ++j) rows[i][j] /= mx;
        if (mx > 0.0) rhs[i] /= mx;
    }

    detail::SimplexTableau tab(rows, rhs, n);
    const int total_rows = static_cast<int>(rows.size());

    {
        // artificial columns follow the slacks; cost 1 each, never re-enter
        std::vector<double> cost(n + total_rows, 0.0);
        bool has_artificials = false;
        for (int i = 0; i < total_rows; ++i)
            if (rhs[i] < 0.0) {
                cost.push_back(1.0);
                has_artificials = true;
            }
        if (has_artificials) {
            if (!tab.run(cost, true))
                throw NumericalError("solve_lp: phase 1 reported unbounded", 0.0);
            if (tab.objective_value(cost) > 1e-8) return {LpStatus::infeasible, {}, 0.0};
            tab.purge_artificials();
        }
    }

    std::vector<double> cost(n + total_rows, 0.0);
    for (int j = 0; j < n; ++j) cost[j] = -lp.objective[j];  // maximize -> minimize
    if (!tab.run(cost, true)) return {LpStatus::unbounded, {}, 0.0};

    LpSolution sol;
    sol.status = LpStatus::optimal;
    sol.x = tab.extract(n);
    for (int j = 0; j < n; ++j) {
        sol.x[j] = std::max(sol.x[j], 0.0) + lp.lower[j];
        if (std::isfinite(lp.upper[j])) sol.x[j] = std::min(sol.x[j], lp.upper[j]);
    }
    sol.objective = 0.0;
    for (int j = 0; j < n; ++j) sol.objective += lp.objective[j] * sol.x[j];
    for (int i = 0; i < m; ++i) {
        double usage = 0.0, scale = std::abs(lp.rhs[i]);
        for (int j = 0; j < n; ++j) {
            usage += lp.rows[i][j] * sol.x[j];
            scale = std::max(scale, std::abs(lp.rows[i][j]));
        }
        if (usage - lp.rhs[i] > 1e-7 * std::max(1.0, scale))
            throw NumericalError("solve_lp: basis failed feasibility verification",
                                 usage - lp.rhs[i]);
    }
    return sol;
}

// ---------------------------------------------------------------------------
// shared pieces for the concave kernels
// ---------------------------------------------------------------------------

namespace detail {

// safeguarded secant root search for a monotone non-increasing f on [lo, hi],
// solving f(x) = target with f(lo) >= target >= f(hi)
template <class F>
double solve_decreasing(F&& f, double target, double lo, double hi, double flo, double fhi,
                        int max_iters = 48, double xtol = 1e-13) {
    for (int it = 0; it < max_iters; ++it) {
        if (hi - lo <= xtol * std::max(1.0, std::abs(hi))) break;
        double x;
        const double denom = flo - fhi;
        if (denom > 0.0) {
            x = lo + (flo - target) / denom * (hi - lo);
            const double pad = 0.05 * (hi - lo);
            x = std::clamp(x, lo + pad, hi - pad);
        } else {
            x = 0.5 * (lo + hi);
        }
        const double fx = f(x);
        if (fx >= target) {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
    }
    return 0.5 * (lo + hi);
}

inline double waterfill(double weight, double gain, double price, double cap) {
    if (weight <= 0.0 || cap <= 0.0) return 0.0;
    if (price <= 0.0) return cap;
    const double ln2 = 0.6931471805599453;
    const double p = weight / (ln2 * price) - 1.0 / gain;
    return std::clamp(p, 0.0, cap);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// separable concave maximization: max sum_j weight_j log2(1 + gain_j p_j)
// subject to non-negative linear rows, p >= 0
// ---------------------------------------------------------------------------

struct SeparableConcaveProgram {
    std::vector<double> weight;             // alpha_j >= 0 (x*T in the power subproblem)
    std::vector<double> gain;               // beta_j > 0   (M l^2 / (w sigma^2))
    std::vector<std::vector<double>> rows;  // coefficients >= 0
    std::vector<double> rhs;                // > 0 (or +inf for a vacuous row)
};

struct ConcaveOpts {
    double tol = 1e-10;  // normalized feasibility + complementary-slackness target
    int max_cycles = 2000;
    std::vector<double> warm_multipliers;  // per original row, optional
};

struct SeparableSolution {
    std::vector<double> p;
    double objective = 0.0;
    std::vector<double> multipliers;  // per original row
    int cycles = 0;
    double kkt_residual = 0.0;
};

namespace detail {

struct RowSupport {
    std::vector<int> var;
    std::vector<double> coeff;  // normalized by rhs
};

}  // namespace detail

// Dual decomposition: rows are normalized by their limits, each multiplier is
// updated by an exact coordinate search (the dual is convex and the row usage
// is monotone in its own multiplier), variables follow by water-filling.
inline SeparableSolution maximize_separable_concave(const SeparableConcaveProgram& prog,
                                                    const ConcaveOpts& opts = {}) {
    const int nv = static_cast<int>(prog.weight.size());
    const int nr = static_cast<int>(prog.rows.size());
    if (static_cast<int>(prog.gain.size()) != nv || static_cast<int>(prog.rhs.size()) != nr)
        throw std::invalid_argument("maximize_separable_concave: size mismatch");
    for (int j = 0; j < nv; ++j) {
        if (prog.weight[j] < 0.0 || !(prog.gain[j] > 0.0))
            throw std::invalid_argument("maximize_separable_concave: need weight >= 0, gain > 0");
    }

    std::vector<detail::RowSupport> sup(nr);
    std::vector<double> cap(nv, kInf);
    for (int i = 0; i < nr; ++i) {
        if (static_cast<int>(prog.rows[i].size()) != nv)
            throw std::invalid_argument("maximize_separable_concave: row width");
        if (!(prog.rhs[i] > 0.0)) throw std::invalid_argument("maximize_separable_concave: rhs");
        if (!std::isfinite(prog.rhs[i])) continue;  // vacuous row
        for (int j = 0; j < nv; ++j) {
            const double a = prog.rows[i][j];
            if (a < 0.0) throw std::invalid_argument("maximize_separable_concave: negative coeff");
            if (a == 0.0) continue;
            const double an = a / prog.rhs[i];
            sup[i].var.push_back(j);
            sup[i].coeff.push_back(an);
            cap[j] = std::min(cap[j], 1.0 / an);
        }
    }
    for (int j = 0; j < nv; ++j)
        if (prog.weight[j] > 0.0 && !std::isfinite(cap[j]))
            throw std::invalid_argument(
                "maximize_separable_concave: unbounded variable (no covering row)");

    std::vector<double> mult(nr, 0.0);
    if (!opts.warm_multipliers.empty()) {
        if (static_cast<int>(opts.warm_multipliers.size()) != nr)
            throw std::invalid_argument("maximize_separable_concave: warm multiplier size");
        for (int i = 0; i < nr; ++i)
            mult[i] = std::isfinite(prog.rhs[i])
                          ? std::max(0.0, opts.warm_multipliers[i]) * prog.rhs[i]
                          : 0.0;
    } else {
        for (int i = 0; i < nr; ++i) mult[i] = sup[i].var.empty() ? 0.0 : 1.0;
    }

    std::vector<double> price(nv, 0.0);
    for (int i = 0; i < nr; ++i)
        for (std::size_t t = 0; t < sup[i].var.size(); ++t)
            price[sup[i].var[t]] += mult[i] * sup[i].coeff[t];

    std::vector<double> base(nv, 0.0);
    auto row_usage = [&](int i, double m) {
        double usage = 0.0;
        for (std::size_t t = 0; t < sup[i].var.size(); ++t) {
            const int j = sup[i].var[t];
            const double a = sup[i].coeff[t];
            usage += a * detail::waterfill(prog.weight[j], prog.gain[j], base[j] + m * a, cap[j]);
        }
        return usage;
    };

    int cycle = 0;
    double kkt = kInf;
    for (; cycle < opts.max_cycles && kkt > opts.tol; ++cycle) {
        for (int i = 0; i < nr; ++i) {
            if (sup[i].var.empty()) continue;
            for (std::size_t t = 0; t < sup[i].var.size(); ++t)
                base[sup[i].var[t]] = price[sup[i].var[t]] - mult[i] * sup[i].coeff[t];
            double next;
            const double u0 = row_usage(i, 0.0);
            if (u0 <= 1.0) {
                next = 0.0;
            } else {
                double hi = std::max(1.0, 2.0 * mult[i]), uhi = row_usage(i, hi);
                int grow = 0;
                while (uhi > 1.0 && ++grow < 200) {
                    hi *= 4.0;
                    uhi = row_usage(i, hi);
                }
                next = detail::solve_decreasing([&](double m) { return row_usage(i, m); }, 1.0,
                                                0.0, hi, u0, uhi);
            }
            const double delta = next - mult[i];
            if (delta != 0.0) {
                mult[i] = next;
                for (std::size_t t = 0; t < sup[i].var.size(); ++t)
                    price[sup[i].var[t]] =
                        std::max(0.0, price[sup[i].var[t]] + delta * sup[i].coeff[t]);
            }
        }
        // KKT: normalized feasibility and complementary slackness
        kkt = 0.0;
        for (int i = 0; i < nr; ++i) {
            if (sup[i].var.empty()) continue;
            for (std::size_t t = 0; t < sup[i].var.size(); ++t)
                base[sup[i].var[t]] = price[sup[i].var[t]] - mult[i] * sup[i].coeff[t];
            const double u = row_usage(i, mult[i]);
            kkt = std::max(kkt, u - 1.0);
            kkt = std::max(kkt, mult[i] * std::abs(u - 1.0) / (1.0 + mult[i]));
        }
    }

    SeparableSolution sol;
    sol.cycles = cycle;
    sol.kkt_residual = kkt;
    sol.p.resize(nv);
    for (int j = 0; j < nv; ++j)
        sol.p[j] = detail::waterfill(prog.weight[j], prog.gain[j], price[j], cap[j]);

    // exact feasibility polish: uniform scale-down by the worst row overshoot
    double worst = 1.0;
    for (int i = 0; i < nr; ++i) {
        double u = 0.0;
        for (std::size_t t = 0; t < sup[i].var.size(); ++t)
            u += sup[i].coeff[t] * sol.p[sup[i].var[t]];
        worst = std::max(worst, u);
    }
    if (worst > 1.0)
        for (double& pj : sol.p) pj /= worst * (1.0 + 1e-12);

    for (int j = 0; j < nv; ++j)
        sol.objective += prog.weight[j] * std::log2(1.0 + prog.gain[j] * sol.p[j]);
    sol.multipliers.resize(nr);
    for (int i = 0; i < nr; ++i)
        sol.multipliers[i] = std::isfinite(prog.rhs[i]) ? mult[i] / prog.rhs[i] : 0.0;
    return sol;
}

// ---------------------------------------------------------------------------
// max-min concave: maximize tau = min_r [ sum_{j: owner=r} weight_j log2(1 +
// gain_j p_j) + constant_r ] under shared non-negative linear rows
// ---------------------------------------------------------------------------

struct MinrowProgram {
    std::vector<double> weight;
    std::vector<double> gain;
    std::vector<int> owner;  // min-row per variable
    int num_minrows = 0;
    std::vector<double> minrow_constant;    // >= 0
    std::vector<std::vector<double>> rows;  // shared constraints
    std::vector<double> rhs;
};

struct MinrowOpts {
    double tau_tol = 3e-5;    // relative bisection width target
    int max_cycles = 40;      // dual cycles per feasibility probe
    double tau_floor = -kInf; // known-feasible value, tightens the bisection
    std::vector<double> tau_hints;  // probed first, in order, when inside the bracket
    std::vector<double> warm_multipliers;
};

struct MinrowSolution {
    std::vector<double> p;
    double tau = 0.0;
    std::vector<double> multipliers;  // shared rows, original scale
    std::vector<double> row_weights;  // epigraph weights, sum 1
    int probes = 0;
};

namespace detail {

struct MinrowWork {
    const MinrowProgram* prog = nullptr;
    int nv = 0, nr = 0, R = 0;
    std::vector<RowSupport> sup;          // normalized shared rows
    std::vector<double> cap;              // per-variable box from the rows
    std::vector<std::vector<int>> uvars;  // vars per min-row
    std::vector<std::vector<int>> urows;  // affected min-rows per shared row
    std::vector<double> mult, price, base, p, eta;

    double inner_value(int r, double eta_r, const std::vector<double>& pr) const {
        double v = prog->minrow_constant[r];
        (void)eta_r;
        for (int j : uvars[r]) v += prog->weight[j] * std::log2(1.0 + prog->gain[j] * pr[j]);
        return v;
    }

    // best response of min-row r to the given prices with value capped at tau;
    // fills p for r's vars, returns the resulting row value
    double solve_user(int r, double tau, const std::vector<double>& prices,
                      std::vector<double>& out_p, double& out_eta) const {
        double value = prog->minrow_constant[r];
        bool any = false;
        for (int j : uvars[r]) {
            double pj;
            if (prog->weight[j] <= 0.0) {
                pj = 0.0;
            } else if (prices[j] <= 0.0) {
                pj = cap[j];  // free variable, ramped below if the cap overshoots
            } else {
                pj = waterfill(prog->weight[j], prog->gain[j], prices[j], cap[j]);
            }
            out_p[j] = pj;
            value += prog->weight[j] * std::log2(1.0 + prog->gain[j] * pj);
            any = any || prog->weight[j] > 0.0;
        }
        if (!any || value <= tau) {
            out_eta = 1.0;
            return value;
        }
        if (prog->minrow_constant[r] >= tau) {
            for (int j : uvars[r]) out_p[j] = 0.0;
            out_eta = 0.0;
            return prog->minrow_constant[r];
        }
        // scale the water-fill weight until the row value meets tau exactly
        auto p_at = [&](int j, double eta) {
            if (prog->weight[j] <= 0.0) return 0.0;
            if (prices[j] <= 0.0) return eta * cap[j];
            return waterfill(eta * prog->weight[j], prog->gain[j], prices[j], cap[j]);
        };
        auto value_at = [&](double eta) {
            double v = prog->minrow_constant[r];
            for (int j : uvars[r])
                v += prog->weight[j] * std::log2(1.0 + prog->gain[j] * p_at(j, eta));
            return -v;  // negated so the helper sees a decreasing function
        };
        const double eta = solve_decreasing(value_at, -tau, 0.0, 1.0, -prog->minrow_constant[r],
                                            -value, 40);
        double v = prog->minrow_constant[r];
        for (int j : uvars[r]) {
            out_p[j] = p_at(j, eta);
            v += prog->weight[j] * std::log2(1.0 + prog->gain[j] * out_p[j]);
        }
        out_eta = eta;
        return v;
    }
};

}  // namespace detail

// Bisection on tau; each probe solves the capped program
//   max sum_r min(value_r(p), tau)  s.t. shared rows
// by dual coordinate descent (same scheme as the separable kernel, with the
// per-min-row cap handled inside the best response).
inline MinrowSolution maximize_minrow_concave(const MinrowProgram& prog,
                                              const MinrowOpts& opts = {}) {
    const int nv = static_cast<int>(prog.weight.size());
    const int nr = static_cast<int>(prog.rows.size());
    const int R = prog.num_minrows;
    if (R <= 0) throw std::invalid_argument("maximize_minrow_concave: need at least one min-row");
    if (static_cast<int>(prog.gain.size()) != nv || static_cast<int>(prog.owner.size()) != nv ||
        static_cast<int>(prog.minrow_constant.size()) != R ||
        static_cast<int>(prog.rhs.size()) != nr)
        throw std::invalid_argument("maximize_minrow_concave: size mismatch");

    detail::MinrowWork w;
    w.prog = &prog;
    w.nv = nv;
    w.nr = nr;
    w.R = R;
    w.sup.resize(nr);
    w.cap.assign(nv, kInf);
    w.uvars.resize(R);
    for (int j = 0; j < nv; ++j) {
        if (prog.owner[j] < 0 || prog.owner[j] >= R)
            throw std::invalid_argument("maximize_minrow_concave: owner out of range");
        if (prog.weight[j] < 0.0 || !(prog.gain[j] > 0.0))
            throw std::invalid_argument("maximize_minrow_concave: need weight >= 0, gain > 0");
        w.uvars[prog.owner[j]].push_back(j);
    }
    for (int i = 0; i < nr; ++i) {
        if (static_cast<int>(prog.rows[i].size()) != nv)
            throw std::invalid_argument("maximize_minrow_concave: row width");
        if (!(prog.rhs[i] > 0.0)) throw std::invalid_argument("maximize_minrow_concave: rhs");
        if (!std::isfinite(prog.rhs[i])) continue;
        for (int j = 0; j < nv; ++j) {
            const double a = prog.rows[i][j];
            if (a < 0.0) throw std::invalid_argument("maximize_minrow_concave: negative coeff");
            if (a == 0.0) continue;
            w.sup[i].var.push_back(j);
            w.sup[i].coeff.push_back(a / prog.rhs[i]);
            w.cap[j] = std::min(w.cap[j], prog.rhs[i] / a);
        }
    }
    for (int j = 0; j < nv; ++j)
        if (prog.weight[j] > 0.0 && !std::isfinite(w.cap[j]))
            throw std::invalid_argument(
                "maximize_minrow_concave: unbounded variable (no covering row)");
    w.urows.resize(nr);
    for (int i = 0; i < nr; ++i) {
        std::vector<char> seen(R, 0);
        for (int j : w.sup[i].var)
            if (!seen[prog.owner[j]]) {
                seen[prog.owner[j]] = 1;
                w.urows[i].push_back(prog.owner[j]);
            }
    }

    // tau upper bound: each min-row alone with the full budgets
    double tau_ub = kInf;
    for (int r = 0; r < R; ++r) {
        if (w.uvars[r].empty()) {
            tau_ub = std::min(tau_ub, prog.minrow_constant[r]);
            continue;
        }
        SeparableConcaveProgram solo;
        for (int j : w.uvars[r]) {
            solo.weight.push_back(prog.weight[j]);
            solo.gain.push_back(prog.gain[j]);
        }
        solo.rows.resize(nr);
        solo.rhs = prog.rhs;
        for (int i = 0; i < nr; ++i) {
            solo.rows[i].resize(w.uvars[r].size());
            for (std::size_t t = 0; t < w.uvars[r].size(); ++t)
                solo.rows[i][t] = prog.rows[i][w.uvars[r][t]];
        }
        ConcaveOpts so;
        so.tol = 1e-9;
        const auto s = maximize_separable_concave(solo, so);
        tau_ub = std::min(tau_ub, s.objective + prog.minrow_constant[r]);
    }
    double tau_lo = kInf;
    for (int r = 0; r < R; ++r) tau_lo = std::min(tau_lo, prog.minrow_constant[r]);

    w.mult.assign(nr, 0.0);
    if (!opts.warm_multipliers.empty() &&
        static_cast<int>(opts.warm_multipliers.size()) == nr) {
        for (int i = 0; i < nr; ++i)
            w.mult[i] = std::isfinite(prog.rhs[i])
                            ? std::max(0.0, opts.warm_multipliers[i]) * prog.rhs[i]
                            : 0.0;
    } else {
        for (int i = 0; i < nr; ++i) w.mult[i] = w.sup[i].var.empty() ? 0.0 : 1.0;
    }
    w.price.assign(nv, 0.0);
    for (int i = 0; i < nr; ++i)
        for (std::size_t t = 0; t < w.sup[i].var.size(); ++t)
            w.price[w.sup[i].var[t]] += w.mult[i] * w.sup[i].coeff[t];
    w.p.assign(nv, 0.0);
    w.eta.assign(R, 1.0);

    std::vector<double> scratch_p(nv, 0.0), scratch_price(nv, 0.0);

    auto row_usage = [&](int i, double m, double tau) {
        std::copy(w.price.begin(), w.price.end(), scratch_price.begin());
        for (std::size_t t = 0; t < w.sup[i].var.size(); ++t) {
            const int j = w.sup[i].var[t];
            scratch_price[j] =
                std::max(0.0, w.price[j] + (m - w.mult[i]) * w.sup[i].coeff[t]);
        }
        double usage = 0.0;
        for (int r : w.urows[i]) {
            double eta;
            w.solve_user(r, tau, scratch_price, scratch_p, eta);
        }
        for (std::size_t t = 0; t < w.sup[i].var.size(); ++t) {
            const int j = w.sup[i].var[t];
            if (prog.weight[j] > 0.0) usage += w.sup[i].coeff[t] * scratch_p[j];
        }
        return usage;
    };

    std::vector<double> best_p, best_eta, best_mult;
    double best_tau = -kInf;

    auto materialize = [&](double tau) {
        double mn = kInf;
        for (int r = 0; r < R; ++r) {
            const double v = w.solve_user(r, tau, w.price, w.p, w.eta[r]);
            mn = std::min(mn, v);
        }
        return mn;
    };

    // feasible min value reachable from w.p via uniform scale-down
    auto polished_min = [&]() {
        double worst = 1.0;
        for (int i = 0; i < nr; ++i) {
            double u = 0.0;
            for (std::size_t t = 0; t < w.sup[i].var.size(); ++t)
                u += w.sup[i].coeff[t] * w.p[w.sup[i].var[t]];
            worst = std::max(worst, u);
        }
        const double s = worst > 1.0 ? 1.0 / (worst * (1.0 + 1e-12)) : 1.0;
        double mn = kInf;
        for (int r = 0; r < R; ++r) {
            double v = prog.minrow_constant[r];
            for (int j : w.uvars[r])
                v += prog.weight[j] * std::log2(1.0 + prog.gain[j] * s * w.p[j]);
            mn = std::min(mn, v);
        }
        return mn;
    };

    auto rows_feasible = [&]() {
        for (int i = 0; i < nr; ++i) {
            double u = 0.0;
            for (std::size_t t = 0; t < w.sup[i].var.size(); ++t)
                u += w.sup[i].coeff[t] * w.p[w.sup[i].var[t]];
            if (u > 1.0 + 1e-9) return false;
        }
        return true;
    };

    auto probe = [&](double tau) {
        double mn = materialize(tau);
        if (mn >= tau * (1.0 - 1e-9) - 1e-15 && rows_feasible()) return mn;
        double best_mn = mn;
        int stall = 0;
        for (int cycle = 0; cycle < opts.max_cycles; ++cycle) {
            double move = 0.0;
            for (int i = 0; i < nr; ++i) {
                if (w.sup[i].var.empty()) continue;
                // usage at the current materialized point decides whether the
                // row needs a coordinate step at all
                double ucur = 0.0;
                for (std::size_t t = 0; t < w.sup[i].var.size(); ++t)
                    ucur += w.sup[i].coeff[t] * w.p[w.sup[i].var[t]];
                if (w.mult[i] == 0.0 && ucur <= 1.0 + 1e-12) continue;
                if (w.mult[i] > 0.0 && std::abs(ucur - 1.0) <= 1e-10) continue;
                const double u0 = w.mult[i] == 0.0 ? ucur : row_usage(i, 0.0, tau);
                double next;
                if (u0 <= 1.0) {
                    next = 0.0;
                } else {
                    double hi = std::max(1.0, 2.0 * w.mult[i]);
                    double uhi = row_usage(i, hi, tau);
                    int grow = 0;
                    while (uhi > 1.0 && ++grow < 200) {
                        hi *= 4.0;
                        uhi = row_usage(i, hi, tau);
                    }
                    next = detail::solve_decreasing(
                        [&](double m) { return row_usage(i, m, tau); }, 1.0, 0.0, hi, u0, uhi, 40);
                }
                const double delta = next - w.mult[i];
                if (delta != 0.0) {
                    move = std::max(move, std::abs(delta) / (1.0 + next));
                    w.mult[i] = next;
                    for (std::size_t t = 0; t < w.sup[i].var.size(); ++t)
                        w.price[w.sup[i].var[t]] = std::max(
                            0.0, w.price[w.sup[i].var[t]] + delta * w.sup[i].coeff[t]);
                    // keep the skip test above honest for the rows that follow
                    for (int r : w.urows[i]) w.solve_user(r, tau, w.price, w.p, w.eta[r]);
                }
            }
            mn = materialize(tau);
            if (mn >= tau * (1.0 - 1e-9) - 1e-15 && rows_feasible()) return mn;
            if (move < 1e-11) break;
            if (mn <= best_mn + 1e-8 * (1.0 + std::abs(mn))) {
                if (++stall >= 3) break;
            } else {
                stall = 0;
            }
            best_mn = std::max(best_mn, mn);
        }
        return rows_feasible() ? mn : std::min(mn, polished_min());
    };

    MinrowSolution sol;
    if (tau_ub <= tau_lo) {
        // some min-row cannot improve on its constant; p = 0 is optimal
        best_tau = tau_lo;
        best_p.assign(nv, 0.0);
        best_eta.assign(R, 0.0);
        best_mult = w.mult;
        sol.probes = 0;
    } else {
        // p = 0 achieves tau_lo
        best_tau = tau_lo;
        best_p.assign(nv, 0.0);
        best_eta.assign(R, 0.0);
        best_mult = w.mult;
        const bool have_floor = std::isfinite(opts.tau_floor) && opts.tau_floor > tau_lo;
        double lo = have_floor ? std::min(opts.tau_floor, tau_ub) : tau_lo;
        double hi = tau_ub;
        int probes = 0;
        auto attempt = [&](double tau) {
            ++probes;
            const double got = probe(tau);
            const bool feasible = got >= tau * (1.0 - 1e-9) - 1e-15;
            // even a failed probe yields a feasible point after scale-down
            const double reach = feasible ? got : polished_min();
            if (reach > best_tau) {
                best_tau = reach;
                best_p = w.p;
                best_eta = w.eta;
                best_mult = w.mult;
            }
            if (feasible) {
                lo = tau;
            } else {
                hi = std::min(hi, tau);
                lo = std::max(lo, std::min(reach, hi));
            }
            return feasible;
        };
        // inclusive upper end first: disjoint-resource instances hit tau_ub exactly
        if (!have_floor) attempt(tau_ub);
        for (double h : opts.tau_hints)
            if (std::isfinite(h) && h > lo && h < hi) attempt(h);
        while (hi - lo > opts.tau_tol * std::max(1.0, std::abs(hi)) && probes < 64)
            attempt(0.5 * (lo + hi));
        if (probes == 0) attempt(0.5 * (lo + hi));  // collapsed bracket still needs a point
        sol.probes = probes;
    }

    sol.p = std::move(best_p);
    // exact feasibility polish on the shared rows
    double worstu = 1.0;
    for (int i = 0; i < nr; ++i) {
        double u = 0.0;
        for (std::size_t t = 0; t < w.sup[i].var.size(); ++t)
            u += w.sup[i].coeff[t] * sol.p[w.sup[i].var[t]];
        worstu = std::max(worstu, u);
    }
    if (worstu > 1.0)
        for (double& pj : sol.p) pj /= worstu * (1.0 + 1e-12);

    sol.tau = kInf;
    for (int r = 0; r < R; ++r) {
        double v = prog.minrow_constant[r];
        for (int j : w.uvars[r]) v += prog.weight[j] * std::log2(1.0 + prog.gain[j] * sol.p[j]);
        sol.tau = std::min(sol.tau, v);
    }

    double eta_sum = 0.0;
    for (int r = 0; r < R; ++r) eta_sum += best_eta.empty() ? 0.0 : best_eta[r];
    sol.row_weights.assign(R, 1.0 / R);
    if (eta_sum > 0.0)
        for (int r = 0; r < R; ++r) sol.row_weights[r] = best_eta[r] / eta_sum;
    sol.multipliers.assign(nr, 0.0);
    const double scale = eta_sum > 0.0 ? eta_sum : 1.0;
    for (int i = 0; i < nr; ++i)
        sol.multipliers[i] =
            std::isfinite(prog.rhs[i]) ? best_mult[i] / prog.rhs[i] / scale : 0.0;
    return sol;
}

}  // namespace csun
