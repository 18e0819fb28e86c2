#pragma once

//
// Discrete intervention operator: Mu(t,x) = max over the impulse lattice of
// u(x + Gamma(t,z)) + K(t,z). This is the nonlocal obstacle of the QVI; the
// lattice realizes the compact truncation cl B(0;r) of the impulse set.
//

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hjbqvi/grid.hpp"
#include "hjbqvi/parallel.hpp"
#include "hjbqvi/problem.hpp"
#include "hjbqvi/types.hpp"

namespace hjbqvi {

// Finite impulse candidate set: a uniform lattice over Z intersected with the
// truncation ball, pre-sorted by (|z|, lexicographic) so that a strict-max
// scan yields the canonical tie-break for free.
class ImpulseGrid {
public:
    // radius: truncation_radius(spec) or a user override not exceeding it.
    // points_per_axis: lattice resolution over [-radius, radius].
    ImpulseGrid(const ProblemSpec& spec, double radius, int points_per_axis) {
        if (points_per_axis < 1) throw std::invalid_argument("ImpulseGrid: need >= 1 point");
        if (radius < 0) throw std::invalid_argument("ImpulseGrid: negative radius");
        dim_ = spec.dim;
        radius_ = radius;
        step_ = points_per_axis > 1 ? 2 * radius / (points_per_axis - 1) : 0.0;
        auto axis_val = [&](int i) {
            return points_per_axis == 1 ? 0.0 : -radius + step_ * i;
        };
        auto in_z = [&](const Pt& z) {
            if (!spec.impulse_set) return true;
            for (int a = 0; a < dim_; ++a)
                if (z[a] < spec.impulse_set->lo[a] || z[a] > spec.impulse_set->hi[a]) return false;
            return true;
        };
        if (dim_ == 1) {
            for (int i = 0; i < points_per_axis; ++i) {
                const Pt z = pt(axis_val(i));
                if (in_z(z)) points_.push_back(z);
            }
        } else {
            for (int j = 0; j < points_per_axis; ++j)
                for (int i = 0; i < points_per_axis; ++i) {
                    const Pt z = pt(axis_val(i), axis_val(j));
                    if (norm(z, 2) <= radius + 1e-12 && in_z(z)) points_.push_back(z);
                }
        }
        if (points_.empty())
            throw std::invalid_argument("ImpulseGrid: empty candidate set (Z does not meet the "
                                        "truncation ball)");
        std::sort(points_.begin(), points_.end(),
                  [&](const Pt& a, const Pt& b) { return impulse_less(a, b, dim_); });
    }

    // Candidates in scan order (smallest |z| first, then lexicographic).
    const std::vector<Pt>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    double radius() const { return radius_; }
    double step() const { return step_; }
    int dim() const { return dim_; }

private:
    std::vector<Pt> points_;
    double radius_ = 0, step_ = 0;
    int dim_ = 1;
};

struct InterventionResult {
    ValueField Mu;             // intervened field
    std::vector<Pt> zstar;     // argmax impulse per node
    ValueField gain;           // Mu - u, the achieved gain of one impulse
    InterventionResult(GridPtr g) : Mu(g), zstar(g->size(), Pt{0, 0}), gain(g) {}
};

namespace detail {

// Scan in the pre-sorted candidate order with a strict comparison; the first
// maximizer encountered is the canonical (smallest |z|, lexicographic) one.
inline void best_impulse_at(const ProblemSpec& spec, const ValueField& u, double t, const Pt& x,
                            const ImpulseGrid& zg, double rho, double& best, Pt& zbest) {
    const double scale = rho == 0 ? 1.0 : std::exp(rho * t);
    best = -kInf;
    zbest = Pt{0, 0};
    for (const Pt& z : zg.points()) {
        const Pt y = add(x, spec.impulse_shift(t, z));
        const double val = u.interp(y) + scale * spec.K(t, z);
        if (val > best) {
            best = val;
            zbest = z;
        }
    }
}

} // namespace detail

// Applies M to a whole layer. rho > 0 evaluates the discounted operator
// M_rho, whose cost is e^{rho t} K. Pure function; per-node scans are
// independent, so any worker count gives bitwise identical output.
inline InterventionResult apply_intervention(const ProblemSpec& spec, const ValueField& u,
                                             double t, const ImpulseGrid& zg, double rho = 0.0,
                                             int workers = 1) {
    if (zg.size() == 0) throw std::invalid_argument("apply_intervention: empty impulse grid");
    if (!u.finite()) throw std::invalid_argument("apply_intervention: non-finite value field");
    InterventionResult res(u.grid_ptr());
    const Grid& g = u.grid();
    parallel_for(g.size(), workers, [&](std::size_t i) {
        const Pt x = g.node(i);
        double best;
        Pt zb;
        detail::best_impulse_at(spec, u, t, x, zg, rho, best, zb);
        res.Mu[i] = best;
        res.zstar[i] = zb;
        res.gain[i] = best - u[i];
    });
    return res;
}

// Single-point version: optimal impulse and its gain at x.
struct BestImpulse {
    Pt z{0, 0};
    double gain = 0; // Mu(t,x) - u(t,x)
    double value = 0; // Mu(t,x)
};

inline BestImpulse best_impulse(const ProblemSpec& spec, const ValueField& u, double t,
                                const Pt& x, const ImpulseGrid& zg, double rho = 0.0) {
    if (zg.size() == 0) throw std::invalid_argument("best_impulse: empty impulse grid");
    if (!u.grid().inside(x)) throw std::invalid_argument("best_impulse: point outside grid box");
    if (!u.finite()) throw std::invalid_argument("best_impulse: non-finite value field");
    BestImpulse out;
    double best;
    Pt zb;
    detail::best_impulse_at(spec, u, t, x, zg, rho, best, zb);
    out.z = zb;
    out.value = best;
    out.gain = best - u.interp(x);
    return out;
}

} // namespace hjbqvi
