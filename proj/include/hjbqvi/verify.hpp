#pragma once

//
// Executable lemma suite: structural properties of the intervention
// operator, value bounds, obstacle consistency, discrete comparison, and the
// strict-supersolution residual of the discounted equation. Residuals are
// evaluated with the same discrete stencils the solver uses, so the
// continuous inequalities transfer up to a discretization tolerance.
//
// All checks are deterministic and side-effect free. Inequalities that hold
// with equality in exact arithmetic are allowed a roundoff slack of 1e-12;
// that slack covers floating-point reassociation only, never scheme error.
//

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "hjbqvi/intervention.hpp"
#include "hjbqvi/solver.hpp"

namespace hjbqvi {

constexpr double kRoundoffSlack = 1e-12;

// Constants of the strict-supersolution construction: for a supersolution w
// of the discounted equation, w_lambda = (1-lambda) w + lambda c_rho is a
// supersolution with residual at least lambda xi.
struct DiscountedConstants {
    double rho = 0;
    double c_rho = 0; // max{ (||f_rho|| + 1)/rho, ||g_rho|| + 1 }
    double xi = 0;    // min{1, K0}

    static DiscountedConstants from(const ProblemSpec& spec, double rho) {
        if (rho <= 0)
            throw std::invalid_argument("DiscountedConstants: discount rho must be > 0");
        const double scale = std::exp(rho * spec.T());
        const double f_rho = scale * spec.f_sup();
        const double g_rho = scale * spec.g_sup();
        DiscountedConstants c;
        c.rho = rho;
        c.c_rho = std::max((f_rho + 1) / rho, g_rho + 1);
        c.xi = std::min(1.0, spec.cost_floor);
        return c;
    }
};

struct PropertyViolation {
    std::string property;
    std::size_t node = 0;
    double margin = 0; // negative = amount by which the inequality failed
    std::string detail;
};

struct InterventionPropertyReport {
    std::vector<PropertyViolation> violations;
    double worst_margin = 0;
    std::size_t nodes_checked = 0;
    bool pass() const { return violations.empty(); }
};

// Monotonicity, convexity and shift covariance of M on a pair of fields.
// The monotone check orders the inputs nodewise first, so arbitrary (e.g.
// random) pairs exercise it.
inline InterventionPropertyReport intervention_properties(
    const ProblemSpec& spec, const ValueField& u, const ValueField& w, double t,
    const ImpulseGrid& zg, const std::vector<double>& lambdas = {0, 0.25, 0.5, 0.75, 1},
    const std::vector<double>& kappas = {-1, 0, 2}) {
    if (!(u.grid() == w.grid()))
        throw std::invalid_argument("intervention_properties: fields on different grids");
    InterventionPropertyReport rep;
    const std::size_t n = u.size();
    auto note = [&](const std::string& prop, std::size_t i, double margin, std::string detail) {
        if (margin < -kRoundoffSlack) {
            rep.violations.push_back({prop, i, margin, std::move(detail)});
        }
        rep.worst_margin = std::min(rep.worst_margin, margin);
    };

    // (i) monotone on the ordered envelope of the pair
    ValueField lo_f(u.grid_ptr()), hi_f(u.grid_ptr());
    for (std::size_t i = 0; i < n; ++i) {
        lo_f[i] = std::min(u[i], w[i]);
        hi_f[i] = std::max(u[i], w[i]);
    }
    const ValueField Mlo = apply_intervention(spec, lo_f, t, zg).Mu;
    const ValueField Mhi = apply_intervention(spec, hi_f, t, zg).Mu;
    for (std::size_t i = 0; i < n; ++i) note("monotone", i, Mhi[i] - Mlo[i], "M min <= M max");

    // (ii) convex in the field argument
    const ValueField Mu = apply_intervention(spec, u, t, zg).Mu;
    const ValueField Mw = apply_intervention(spec, w, t, zg).Mu;
    for (double lam : lambdas) {
        ValueField mix(u.grid_ptr());
        for (std::size_t i = 0; i < n; ++i) mix[i] = lam * u[i] + (1 - lam) * w[i];
        const ValueField Mmix = apply_intervention(spec, mix, t, zg).Mu;
        for (std::size_t i = 0; i < n; ++i) {
            std::ostringstream os;
            os << "lambda=" << lam;
            note("convex", i, lam * Mu[i] + (1 - lam) * Mw[i] - Mmix[i], os.str());
        }
    }

    // (iii) shift covariance M(u + kappa) = Mu + kappa
    for (double kap : kappas) {
        ValueField sh(u.grid_ptr());
        for (std::size_t i = 0; i < n; ++i) sh[i] = u[i] + kap;
        const ValueField Msh = apply_intervention(spec, sh, t, zg).Mu;
        for (std::size_t i = 0; i < n; ++i) {
            const double diff = Msh[i] - (Mu[i] + kap);
            std::ostringstream os;
            os << "kappa=" << kap;
            note("shift", i, -std::abs(diff), os.str());
        }
    }
    rep.nodes_checked = n;
    return rep;
}

// ---------------------------------------------------------------------------
// Discrete residual of the discounted equation
// ---------------------------------------------------------------------------

namespace detail {

// min over branches of the discrete F_rho at interior node i of layer k,
// evaluated on the space-time field w (same stencils as the solver, with the
// per-node worst-case control).
inline double discrete_residual_at(const ProblemSpec& spec, const Grid& g,
                                   const std::vector<ValueField>& w, const ValueField& Mw_k,
                                   int k, std::size_t i, double rho,
                                   const std::vector<Pt>& bs) {
    const double t = g.time(k);
    const double dt = g.dt(k);
    const double gain_scale = rho == 0 ? 1.0 : std::exp(rho * t);
    int ix, iy;
    is_boundary_node(g, i, ix, iy);
    const Pt x = g.node(i);
    double inf_b = kInf;
    for (const Pt& b : bs) {
        const double val = (w[static_cast<std::size_t>(k) + 1][i] - w[static_cast<std::size_t>(k)][i]) / dt +
                           apply_generator(spec, g, w[static_cast<std::size_t>(k)], i, ix, iy, b) -
                           rho * w[static_cast<std::size_t>(k)][i] + gain_scale * spec.f(t, x, b);
        inf_b = std::min(inf_b, val);
    }
    const double pde_branch = -inf_b;
    const double obstacle_branch = w[static_cast<std::size_t>(k)][i] - Mw_k[i];
    return std::min(pde_branch, obstacle_branch);
}

} // namespace detail

struct ResidualReport {
    double min_residual = kInf;
    int worst_layer = -1;
    std::size_t worst_node = 0;
    double threshold = 0; // lambda * xi
    bool pass(double tol) const { return min_residual >= threshold - tol; }
};

// Forms w_lambda = (1-lambda) u + lambda c_rho from a Solution solved with
// discount rho on the transformed data and evaluates the discrete F_rho
// residual: PDE branch with per-node worst-case control at interior nodes,
// obstacle branch everywhere, terminal branch at t = T.
inline ResidualReport strict_supersolution_residual(const ProblemSpec& spec, const Solution& sol,
                                                    double lambda,
                                                    const DiscountedConstants& consts) {
    if (sol.scheme.rho != consts.rho)
        throw std::invalid_argument(
            "strict_supersolution_residual: solution was not solved with the matching rho");
    if (!sol.impulses)
        throw std::invalid_argument("strict_supersolution_residual: solution lacks impulse grid");
    if (lambda < 0 || lambda > 1)
        throw std::invalid_argument("strict_supersolution_residual: lambda must be in [0,1]");
    const Grid& g = *sol.grid;
    const double rho = consts.rho;
    const int nt = g.time_steps();
    const auto bs = spec.control_points();

    std::vector<ValueField> w;
    w.reserve(sol.layers.size());
    for (const ValueField& u : sol.layers) {
        ValueField wl(sol.grid);
        for (std::size_t i = 0; i < u.size(); ++i)
            wl[i] = (1 - lambda) * u[i] + lambda * consts.c_rho;
        w.push_back(std::move(wl));
    }

    ResidualReport rep;
    rep.threshold = lambda * consts.xi;
    for (int k = 0; k < nt; ++k) {
        const ValueField Mw_k =
            apply_intervention(spec, w[static_cast<std::size_t>(k)], g.time(k), *sol.impulses,
                               rho).Mu;
        for (std::size_t i = 0; i < g.size(); ++i) {
            int ix, iy;
            if (detail::is_boundary_node(g, i, ix, iy)) continue;
            const double r = detail::discrete_residual_at(spec, g, w, Mw_k, k, i, rho, bs);
            if (r < rep.min_residual) {
                rep.min_residual = r;
                rep.worst_layer = k;
                rep.worst_node = i;
            }
        }
    }
    // terminal branch
    {
        const double T = spec.T();
        const double gscale = std::exp(rho * T);
        const ValueField& wT = w[static_cast<std::size_t>(nt)];
        const ValueField MwT = apply_intervention(spec, wT, T, *sol.impulses, rho).Mu;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double r =
                std::min(wT[i] - gscale * spec.g(g.node(i)), wT[i] - MwT[i]);
            if (r < rep.min_residual) {
                rep.min_residual = r;
                rep.worst_layer = nt;
                rep.worst_node = i;
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Bound and obstacle consistency (undiscounted)
// ---------------------------------------------------------------------------

struct BoundObstacleReport {
    double sup_norm = 0;
    double bound = 0; // T ||f|| + ||g||
    double obstacle_worst = 0; // min over layers/nodes of u - Mu
    int worst_layer = -1;
    std::size_t worst_node = 0;
    bool bound_pass = false, obstacle_pass = false;
    bool pass() const { return bound_pass && obstacle_pass; }
};

inline BoundObstacleReport bound_and_obstacle_check(const ProblemSpec& spec, const Solution& sol,
                                                    double tol) {
    if (sol.scheme.rho != 0)
        throw std::invalid_argument("bound_and_obstacle_check: requires a rho = 0 solution");
    if (!sol.impulses)
        throw std::invalid_argument("bound_and_obstacle_check: solution lacks impulse grid");
    BoundObstacleReport rep;
    rep.bound = global_bound(spec);
    rep.obstacle_worst = kInf;
    const Grid& g = *sol.grid;
    for (int k = 0; k <= g.time_steps(); ++k) {
        const ValueField& u = sol.layer(k);
        rep.sup_norm = std::max(rep.sup_norm, u.sup_norm());
        const ValueField Mu = apply_intervention(spec, u, g.time(k), *sol.impulses).Mu;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double m = u[i] - Mu[i];
            if (m < rep.obstacle_worst) {
                rep.obstacle_worst = m;
                rep.worst_layer = k;
                rep.worst_node = i;
            }
        }
    }
    rep.bound_pass = rep.sup_norm <= rep.bound + tol;
    rep.obstacle_pass = rep.obstacle_worst >= -tol;
    return rep;
}

// ---------------------------------------------------------------------------
// Discrete comparison: ordered terminal data give ordered solutions
// ---------------------------------------------------------------------------

struct ComparisonReport {
    std::size_t violating_nodes = 0;
    double worst_violation = 0; // most positive u1 - u2; <= 0 means ordered
    double max_gap = 0;         // max of u2 - u1, for the contraction check
    int worst_layer = -1;
    std::size_t worst_node = 0;
    bool pass() const { return violating_nodes == 0; }
};

// Solves the problem twice with terminal data g1 <= g2 (same f, K, Gamma)
// and checks u1 <= u2 nodewise at every layer. The scheme is monotone, so no
// tolerance is applied.
inline ComparisonReport discrete_comparison(const ProblemSpec& spec, GridPtr grid,
                                            const ImpulseGrid& zg, const Scheme& scheme,
                                            const TerminalGain& g1, const TerminalGain& g2) {
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const Pt x = grid->node(i);
        if (g1.eval(x, spec.dim) > g2.eval(x, spec.dim) + kRoundoffSlack)
            throw std::invalid_argument("discrete_comparison: terminal data not ordered");
    }
    ProblemSpec s1 = spec, s2 = spec;
    s1.terminal = g1;
    s2.terminal = g2;
    const Solution u1 = solve(s1, grid, zg, scheme);
    const Solution u2 = solve(s2, grid, zg, scheme);
    ComparisonReport rep;
    for (int k = 0; k <= grid->time_steps(); ++k) {
        for (std::size_t i = 0; i < grid->size(); ++i) {
            const double d = u1.layer(k)[i] - u2.layer(k)[i];
            rep.max_gap = std::max(rep.max_gap, -d);
            if (d > 0) {
                ++rep.violating_nodes;
                if (d > rep.worst_violation) {
                    rep.worst_violation = d;
                    rep.worst_layer = k;
                    rep.worst_node = i;
                }
            }
        }
    }
    return rep;
}

} // namespace hjbqvi
