#pragma once

//
// Backward-in-time solver for the HJBI quasi-variational inequality
//
//   min{ -inf_b [ (d_t + L^b - rho) u + f_rho^b ],  u - M_rho u } = 0
//   min{ u - g_rho, u - M_rho u } = 0   at t = T
//
// on a truncated box, with a positive-coefficient (monotone) finite
// difference discretization: upwind first differences for the drift,
// central second differences for the diffusion. The diffusion control is
// resolved by policy iteration over the sampled control set; the nonlocal
// obstacle by a fixed-point iteration u <- max(u_pde, M u) within each time
// step, which realizes the supremum over the number of impulses.
//
// rho = 0 recovers the undiscounted equation. rho > 0 solves the discounted
// form on the transformed data (e^{rho t} f, e^{rho T} g, e^{rho t} K).
//

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hjbqvi/grid.hpp"
#include "hjbqvi/intervention.hpp"
#include "hjbqvi/parallel.hpp"
#include "hjbqvi/problem.hpp"

namespace hjbqvi {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Scheme {
    enum class Stepping { Implicit, Explicit };
    Stepping stepping = Stepping::Implicit;
    double policy_tol = 1e-9;   // policy-iteration stopping tolerance
    int obstacle_cap = 60;      // max obstacle fixed-point iterations per step
    double rho = 0.0;           // discount; 0 reproduces the undiscounted QVI
    int max_policy_rounds = 100;
    int workers = 1;
};

// Value layers plus the extracted policies: per-node argmin control index and
// the act/hold flag with its argmax impulse.
struct Solution {
    GridPtr grid;
    Scheme scheme;
    std::optional<ImpulseGrid> impulses;       // candidate set the solve used
    std::vector<ValueField> layers;            // k = 0..N_t
    std::vector<std::vector<int>> control_idx; // argmin b per node per layer
    std::vector<std::vector<unsigned char>> act;
    std::vector<std::vector<Pt>> zstar;
    double cfl_limit = kInf;    // positive-coefficient bound on dt (explicit)
    int max_policy_rounds_used = 0;
    int max_obstacle_iters_used = 0;

    const ValueField& layer(int k) const { return layers.at(static_cast<std::size_t>(k)); }
};

namespace detail {

struct AxisCoeff {
    double lower = 0, upper = 0; // positive stencil weights toward i-e_a, i+e_a
};

inline AxisCoeff stencil_coeff(const ProblemSpec& spec, const Pt& x, const Pt& b, int axis,
                               double h) {
    const double s = spec.sigma(x, b, axis);
    const double diff = s * s / (2 * h * h);
    const double m = spec.mu(x, b, axis);
    AxisCoeff c;
    c.lower = diff + (m < 0 ? -m / h : 0.0);
    c.upper = diff + (m > 0 ? m / h : 0.0);
    return c;
}

inline bool is_boundary_node(const Grid& g, std::size_t i, int& ix, int& iy) {
    const int n = g.nodes_per_axis();
    if (g.dim() == 1) {
        ix = static_cast<int>(i);
        iy = 0;
        return ix == 0 || ix == n - 1;
    }
    ix = static_cast<int>(i % n);
    iy = static_cast<int>(i / n);
    return ix == 0 || ix == n - 1 || iy == 0 || iy == n - 1;
}

// Interior node the boundary node copies under value extrapolation.
inline std::size_t copy_source(const Grid& g, int ix, int iy) {
    const int n = g.nodes_per_axis();
    int jx = ix, jy = iy;
    if (jx == 0) jx = 1;
    if (jx == n - 1) jx = n - 2;
    if (g.dim() == 2) {
        if (jy == 0) jy = 1;
        if (jy == n - 1) jy = n - 2;
    }
    return g.index(jx, jy);
}

// Discrete generator applied to a layer at an interior node for control b:
// sum_a [ lo_a (w_{i-e_a} - w_i) + up_a (w_{i+e_a} - w_i) ], computed in
// difference form so constants are annihilated exactly in floating point.
// Under reflected drift a missing neighbor folds onto the opposite one.
inline double apply_generator(const ProblemSpec& spec, const Grid& g, const ValueField& w,
                              std::size_t i, int ix, int iy, const Pt& b) {
    const int n = g.nodes_per_axis();
    const Pt x = g.node(i);
    double acc = 0;
    for (int axis = 0; axis < g.dim(); ++axis) {
        const AxisCoeff c = stencil_coeff(spec, x, b, axis, g.spacing(axis));
        const int id = axis == 0 ? ix : iy;
        std::size_t im, ip;
        if (axis == 0) {
            im = g.index(id == 0 ? 1 : ix - 1, iy);
            ip = g.index(id == n - 1 ? n - 2 : ix + 1, iy);
        } else {
            im = g.index(ix, id == 0 ? 1 : iy - 1);
            ip = g.index(ix, id == n - 1 ? n - 2 : iy + 1);
        }
        acc += c.lower * (w[im] - w[i]) + c.upper * (w[ip] - w[i]);
    }
    return acc;
}

// argmin over the control sample of the controlled part of the Hamiltonian,
// evaluated on the layer w. Strict comparison in enumeration order gives the
// smallest-index tie-break.
inline int argmin_control(const ProblemSpec& spec, const Grid& g, const ValueField& w,
                          std::size_t i, int ix, int iy, const std::vector<Pt>& bs, double t,
                          double gain_scale) {
    const Pt x = g.node(i);
    int best = 0;
    double bestval = kInf;
    for (std::size_t jb = 0; jb < bs.size(); ++jb) {
        const double q =
            apply_generator(spec, g, w, i, ix, iy, bs[jb]) + gain_scale * spec.f(t, x, bs[jb]);
        if (q < bestval) {
            bestval = q;
            best = static_cast<int>(jb);
        }
    }
    return best;
}

// Positive-coefficient (CFL) bound for the explicit scheme: the largest dt
// keeping the center weight of the explicit update nonnegative.
inline double cfl_limit(const ProblemSpec& spec, const Grid& g, const std::vector<Pt>& bs,
                        double rho) {
    double worst = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        int ix, iy;
        if (is_boundary_node(g, i, ix, iy)) continue;
        const Pt x = g.node(i);
        for (const Pt& b : bs) {
            double s = rho;
            for (int axis = 0; axis < g.dim(); ++axis) {
                const AxisCoeff c = stencil_coeff(spec, x, b, axis, g.spacing(axis));
                s += c.lower + c.upper;
            }
            worst = std::max(worst, s);
        }
    }
    return worst > 0 ? 1.0 / worst : kInf;
}

} // namespace detail

// Terminal layer u(T,.) = lim of u0 = g, u^{m+1} = max(g, M u^m). When
// g >= Mg pointwise this returns g exactly after one iteration.
inline ValueField terminal_condition(const ProblemSpec& spec, GridPtr grid, const ImpulseGrid& zg,
                                     const Scheme& scheme) {
    const double T = spec.T();
    const double gscale = scheme.rho == 0 ? 1.0 : std::exp(scheme.rho * T);
    ValueField u(grid);
    for (std::size_t i = 0; i < grid->size(); ++i) u[i] = gscale * spec.g(grid->node(i));
    const ValueField g0 = u;
    for (int m = 0; m < scheme.obstacle_cap; ++m) {
        const InterventionResult R =
            apply_intervention(spec, u, T, zg, scheme.rho, scheme.workers);
        double change = 0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double un = std::max(g0[i], R.Mu[i]);
            change = std::max(change, std::abs(un - u[i]));
            u[i] = un;
        }
        if (change <= 1e-12) return u;
    }
    // not converged: report the residual
    const InterventionResult R = apply_intervention(spec, u, T, zg, scheme.rho, scheme.workers);
    double res = 0;
    for (std::size_t i = 0; i < u.size(); ++i)
        res = std::max(res, std::max(g0[i], R.Mu[i]) - u[i]);
    throw SolverError("terminal_condition: obstacle iteration did not converge; residual " +
                      std::to_string(res));
}

struct StepResult {
    ValueField u;
    std::vector<int> control_idx;
    std::vector<unsigned char> act;
    std::vector<Pt> zstar;
    int policy_rounds = 0;
    int obstacle_iters = 0;
    StepResult(GridPtr g)
        : u(g), control_idx(g->size(), 0), act(g->size(), 0), zstar(g->size(), Pt{0, 0}) {}
};

// One backward step t_{k+1} -> t_k: policy-iterated PDE step, then the
// obstacle fixed point u <- max(u_pde, M u) with the PDE value frozen.
inline StepResult step_backward(const ProblemSpec& spec, GridPtr grid, const ImpulseGrid& zg,
                                const Scheme& scheme, const ValueField& u_next, int k) {
    const Grid& g = *grid;
    if (!u_next.finite()) throw SolverError("step_backward: non-finite input layer");
    if (k < 0 || k >= g.time_steps()) throw SolverError("step_backward: bad time index");
    const double t = g.time(k);
    const double dt = g.dt(k);
    const double gain_scale = scheme.rho == 0 ? 1.0 : std::exp(scheme.rho * t);
    const auto bs = spec.control_points();
    const std::size_t n = g.size();
    const bool reflected = g.boundary() == BoundaryPolicy::ReflectedDrift;

    StepResult out(grid);
    ValueField u_pde(grid);

    if (scheme.stepping == Scheme::Stepping::Explicit) {
        const double lim = detail::cfl_limit(spec, g, bs, scheme.rho);
        if (dt > lim * (1 + 1e-12))
            throw SolverError("step_backward: explicit step violates the positive-coefficient "
                              "condition (dt = " +
                              std::to_string(dt) + ", limit = " + std::to_string(lim) + ")");
        parallel_for(n, scheme.workers, [&](std::size_t i) {
            int ix, iy;
            const bool bdry = detail::is_boundary_node(g, i, ix, iy);
            if (bdry && !reflected) return; // filled from the interior below
            const Pt x = g.node(i);
            double best = kInf;
            int bestb = 0;
            for (std::size_t jb = 0; jb < bs.size(); ++jb) {
                const double q = detail::apply_generator(spec, g, u_next, i, ix, iy, bs[jb]) +
                                 gain_scale * spec.f(t, x, bs[jb]);
                if (q < best) {
                    best = q;
                    bestb = static_cast<int>(jb);
                }
            }
            u_pde[i] = u_next[i] + dt * (best - scheme.rho * u_next[i]);
            out.control_idx[i] = bestb;
        });
        if (!reflected) {
            for (std::size_t i = 0; i < n; ++i) {
                int ix, iy;
                if (detail::is_boundary_node(g, i, ix, iy)) {
                    const std::size_t src = detail::copy_source(g, ix, iy);
                    u_pde[i] = u_pde[src];
                    out.control_idx[i] = out.control_idx[src];
                }
            }
        }
        out.policy_rounds = 1;
    } else {
        // Howard iteration: freeze the argmin control field, solve the linear
        // implicit system, re-optimize, repeat.
        std::vector<int> bidx(n, 0);
        parallel_for(n, scheme.workers, [&](std::size_t i) {
            int ix, iy;
            if (!detail::is_boundary_node(g, i, ix, iy) || reflected)
                bidx[i] = detail::argmin_control(spec, g, u_next, i, ix, iy, bs, t, gain_scale);
        });

        ValueField u_cur = u_next;
        bool converged = false;
        using Trip = Eigen::Triplet<double>;
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
        for (int round = 1; round <= scheme.max_policy_rounds; ++round) {
            out.policy_rounds = round;
            std::vector<Trip> trips;
            trips.reserve(n * (1 + 2 * g.dim()));
            for (std::size_t i = 0; i < n; ++i) {
                int ix, iy;
                const bool bdry = detail::is_boundary_node(g, i, ix, iy);
                if (bdry && !reflected) {
                    trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
                    trips.emplace_back(static_cast<int>(i),
                                       static_cast<int>(detail::copy_source(g, ix, iy)), -1.0);
                    rhs[static_cast<Eigen::Index>(i)] = 0.0;
                    continue;
                }
                const Pt x = g.node(i);
                const Pt& b = bs[static_cast<std::size_t>(bidx[i])];
                const int nax = g.nodes_per_axis();
                double diag = 1.0 / dt + scheme.rho;
                for (int axis = 0; axis < g.dim(); ++axis) {
                    const detail::AxisCoeff c =
                        detail::stencil_coeff(spec, x, b, axis, g.spacing(axis));
                    diag += c.lower + c.upper;
                    const int id = axis == 0 ? ix : iy;
                    std::size_t im, ip;
                    if (axis == 0) {
                        im = g.index(id == 0 ? 1 : ix - 1, iy);
                        ip = g.index(id == nax - 1 ? nax - 2 : ix + 1, iy);
                    } else {
                        im = g.index(ix, id == 0 ? 1 : iy - 1);
                        ip = g.index(ix, id == nax - 1 ? nax - 2 : iy + 1);
                    }
                    if (im == ip) { // folded twice onto the same node
                        trips.emplace_back(static_cast<int>(i), static_cast<int>(im),
                                           -(c.lower + c.upper));
                    } else {
                        trips.emplace_back(static_cast<int>(i), static_cast<int>(im), -c.lower);
                        trips.emplace_back(static_cast<int>(i), static_cast<int>(ip), -c.upper);
                    }
                }
                trips.emplace_back(static_cast<int>(i), static_cast<int>(i), diag);
                rhs[static_cast<Eigen::Index>(i)] =
                    u_next[i] / dt + gain_scale * spec.f(t, x, b);
            }
            Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(n),
                                          static_cast<Eigen::Index>(n));
            A.setFromTriplets(trips.begin(), trips.end());
            Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
            lu.compute(A);
            if (lu.info() != Eigen::Success)
                throw SolverError("step_backward: implicit linear solve failed");
            const Eigen::VectorXd sol = lu.solve(rhs);
            if (lu.info() != Eigen::Success)
                throw SolverError("step_backward: implicit linear solve failed");

            double change = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double v = sol[static_cast<Eigen::Index>(i)];
                change = std::max(change, std::abs(v - u_cur[i]));
                u_cur[i] = v;
            }
            std::vector<int> bnew(n, 0);
            parallel_for(n, scheme.workers, [&](std::size_t i) {
                int ix, iy;
                if (!detail::is_boundary_node(g, i, ix, iy) || reflected)
                    bnew[i] = detail::argmin_control(spec, g, u_cur, i, ix, iy, bs, t, gain_scale);
            });
            const bool same_policy = bnew == bidx;
            bidx = std::move(bnew);
            if (same_policy || change <= scheme.policy_tol) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw SolverError("step_backward: policy iteration did not converge in " +
                              std::to_string(scheme.max_policy_rounds) + " rounds");
        u_pde = u_cur;
        out.control_idx = bidx;
        if (!reflected) {
            for (std::size_t i = 0; i < n; ++i) {
                int ix, iy;
                if (detail::is_boundary_node(g, i, ix, iy))
                    out.control_idx[i] =
                        out.control_idx[detail::copy_source(g, ix, iy)];
            }
        }
    }

    // Obstacle fixed point, PDE value frozen: realizes sup over the number of
    // impulses spent at this time. Terminates quickly because each impulse
    // costs at least K0.
    out.u = u_pde;
    out.obstacle_iters = 0;
    for (int m = 0; m < scheme.obstacle_cap; ++m) {
        const InterventionResult R =
            apply_intervention(spec, out.u, t, zg, scheme.rho, scheme.workers);
        double change = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double un = std::max(u_pde[i], R.Mu[i]);
            change = std::max(change, std::abs(un - out.u[i]));
            out.u[i] = un;
        }
        out.obstacle_iters = m + 1;
        if (change <= 1e-12) break;
    }
    const InterventionResult Rf =
        apply_intervention(spec, out.u, t, zg, scheme.rho, scheme.workers);
    for (std::size_t i = 0; i < n; ++i) {
        out.act[i] = out.u[i] <= Rf.Mu[i] + scheme.policy_tol ? 1 : 0;
        out.zstar[i] = Rf.zstar[i];
    }
    return out;
}

inline Solution solve(const ProblemSpec& spec, GridPtr grid, const ImpulseGrid& zg,
                      const Scheme& scheme) {
    const int nt = grid->time_steps();
    Solution sol;
    sol.grid = grid;
    sol.scheme = scheme;
    sol.impulses = zg;
    sol.layers.assign(static_cast<std::size_t>(nt) + 1, ValueField(grid));
    sol.control_idx.assign(static_cast<std::size_t>(nt) + 1,
                           std::vector<int>(grid->size(), 0));
    sol.act.assign(static_cast<std::size_t>(nt) + 1,
                   std::vector<unsigned char>(grid->size(), 0));
    sol.zstar.assign(static_cast<std::size_t>(nt) + 1, std::vector<Pt>(grid->size(), Pt{0, 0}));

    if (scheme.stepping == Scheme::Stepping::Explicit)
        sol.cfl_limit = detail::cfl_limit(spec, *grid, spec.control_points(), scheme.rho);

    sol.layers[static_cast<std::size_t>(nt)] = terminal_condition(spec, grid, zg, scheme);
    {
        const InterventionResult R = apply_intervention(
            spec, sol.layers[static_cast<std::size_t>(nt)], spec.T(), zg, scheme.rho,
            scheme.workers);
        for (std::size_t i = 0; i < grid->size(); ++i) {
            sol.act[static_cast<std::size_t>(nt)][i] =
                sol.layers[static_cast<std::size_t>(nt)][i] <= R.Mu[i] + scheme.policy_tol ? 1 : 0;
            sol.zstar[static_cast<std::size_t>(nt)][i] = R.zstar[i];
        }
    }

    for (int k = nt - 1; k >= 0; --k) {
        StepResult st =
            step_backward(spec, grid, zg, scheme, sol.layers[static_cast<std::size_t>(k) + 1], k);
        sol.layers[static_cast<std::size_t>(k)] = std::move(st.u);
        sol.control_idx[static_cast<std::size_t>(k)] = std::move(st.control_idx);
        sol.act[static_cast<std::size_t>(k)] = std::move(st.act);
        sol.zstar[static_cast<std::size_t>(k)] = std::move(st.zstar);
        sol.max_policy_rounds_used = std::max(sol.max_policy_rounds_used, st.policy_rounds);
        sol.max_obstacle_iters_used = std::max(sol.max_obstacle_iters_used, st.obstacle_iters);
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Self-convergence study over nested factor-2 refinements
// ---------------------------------------------------------------------------

struct RefinementLevel {
    GridPtr grid;
    int impulse_points = 0;
};

struct ConvergenceRow {
    double h = 0, dt = 0, z_step = 0;
    double diff_to_next = 0; // sup |u_l - u_{l+1}| on common nodes; 0 for last
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    std::vector<double> orders; // log2(diff_l / diff_{l+1})
};

inline ConvergenceTable convergence_study(const ProblemSpec& spec, const Scheme& scheme,
                                          const std::vector<RefinementLevel>& levels) {
    if (levels.size() < 3)
        throw std::invalid_argument("convergence_study: need at least 3 refinement levels");
    for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
        const Grid &a = *levels[l].grid, &b = *levels[l + 1].grid;
        const bool nested = b.nodes_per_axis() == 2 * a.nodes_per_axis() - 1 &&
                            b.time_steps() == 2 * a.time_steps() && a.lo() == b.lo() &&
                            a.hi() == b.hi() && a.dim() == b.dim() &&
                            a.horizon() == b.horizon() && a.boundary() == b.boundary() &&
                            levels[l + 1].impulse_points == 2 * levels[l].impulse_points - 1;
        if (!nested)
            throw std::invalid_argument("convergence_study: levels are not nested factor-2 "
                                        "refinements");
    }

    const double radius = truncation_radius(spec);
    std::vector<Solution> sols;
    sols.reserve(levels.size());
    for (const auto& lev : levels) {
        ImpulseGrid zg(spec, radius, lev.impulse_points);
        sols.push_back(solve(spec, lev.grid, zg, scheme));
    }

    ConvergenceTable table;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        ConvergenceRow row;
        const Grid& g = *levels[l].grid;
        row.h = g.spacing(0);
        row.dt = g.dt(0);
        row.z_step = 2 * radius / (levels[l].impulse_points - 1);
        if (l + 1 < levels.size()) {
            const Grid& gf = *levels[l + 1].grid;
            double diff = 0;
            for (int k = 0; k <= g.time_steps(); ++k) {
                const ValueField& uc = sols[l].layer(k);
                const ValueField& uf = sols[l + 1].layer(2 * k);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    int ix, iy;
                    detail::is_boundary_node(g, i, ix, iy);
                    const std::size_t j = gf.index(2 * ix, 2 * iy);
                    diff = std::max(diff, std::abs(uc[i] - uf[j]));
                }
            }
            row.diff_to_next = diff;
        }
        table.rows.push_back(row);
    }
    for (std::size_t l = 0; l + 2 < levels.size(); ++l)
        table.orders.push_back(std::log2(table.rows[l].diff_to_next /
                                         table.rows[l + 1].diff_to_next));
    return table;
}

// A natural scale for discretization tolerances: h + dt + impulse lattice
// step. Nodewise assertions use C times this with C calibrated on TP1.
inline double discretization_scale(const Grid& g, const ImpulseGrid& zg) {
    double h = 0;
    for (int a = 0; a < g.dim(); ++a) h = std::max(h, g.spacing(a));
    return h + g.dt(0) + zg.step();
}

} // namespace hjbqvi
