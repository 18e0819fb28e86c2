#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "hjbqvi/rational.hpp"
#include "hjbqvi/types.hpp"

namespace hjbqvi {

enum class BoundaryPolicy { ValueExtrapolation, ReflectedDrift };

// Truncated space-time lattice. Time nodes t_k = k T / N_t are exact
// rationals; space is a uniform box lattice with the same node count per
// axis. Immutable after construction.
class Grid {
public:
    Grid(Pt lo, Pt hi, int nodes_per_axis, int time_steps, Rational horizon, int dim,
         BoundaryPolicy boundary = BoundaryPolicy::ValueExtrapolation)
        : lo_(lo), hi_(hi), nx_(nodes_per_axis), nt_(time_steps), horizon_(horizon), dim_(dim),
          boundary_(boundary) {
        if (dim_ != 1 && dim_ != 2) throw std::invalid_argument("Grid: dim must be 1 or 2");
        if (nx_ < 3) throw std::invalid_argument("Grid: need at least 3 nodes per axis");
        if (nt_ < 1) throw std::invalid_argument("Grid: need at least 1 time step");
        for (int a = 0; a < dim_; ++a)
            if (!(hi_[a] > lo_[a])) throw std::invalid_argument("Grid: empty box");
        if (!(horizon_ > Rational(0, 1))) throw std::invalid_argument("Grid: horizon must be > 0");
    }

    int dim() const { return dim_; }
    int nodes_per_axis() const { return nx_; }
    int time_steps() const { return nt_; }
    std::size_t size() const {
        return dim_ == 1 ? static_cast<std::size_t>(nx_)
                         : static_cast<std::size_t>(nx_) * static_cast<std::size_t>(nx_);
    }
    const Pt& lo() const { return lo_; }
    const Pt& hi() const { return hi_; }
    BoundaryPolicy boundary() const { return boundary_; }
    Rational horizon() const { return horizon_; }

    double spacing(int axis) const { return (hi_[axis] - lo_[axis]) / (nx_ - 1); }

    Rational time_node(int k) const { return horizon_ * Rational(k, nt_); }
    double time(int k) const { return time_node(k).value(); }
    double dt(int k) const { return time(k + 1) - time(k); }

    // node index <-> coordinates (row-major, axis 0 fastest)
    Pt node(std::size_t i) const {
        if (dim_ == 1) return pt(lo_[0] + spacing(0) * static_cast<double>(i));
        const std::size_t ix = i % nx_, iy = i / nx_;
        return pt(lo_[0] + spacing(0) * static_cast<double>(ix),
                  lo_[1] + spacing(1) * static_cast<double>(iy));
    }
    std::size_t index(int ix, int iy = 0) const {
        return static_cast<std::size_t>(iy) * nx_ + static_cast<std::size_t>(ix);
    }

    bool inside(const Pt& x) const {
        for (int a = 0; a < dim_; ++a)
            if (x[a] < lo_[a] || x[a] > hi_[a]) return false;
        return true;
    }

    // Nearest node to x (for feedback-policy lookups). Out-of-box points clamp.
    std::size_t nearest(const Pt& x) const {
        int id[2] = {0, 0};
        for (int a = 0; a < dim_; ++a) {
            const double s = (x[a] - lo_[a]) / spacing(a);
            int i = static_cast<int>(std::lround(s));
            if (i < 0) i = 0;
            if (i > nx_ - 1) i = nx_ - 1;
            id[a] = i;
        }
        return index(id[0], id[1]);
    }

    // Maps a query point into the box per the boundary policy: clamp under
    // value extrapolation, fold under reflected drift.
    Pt map_into_box(const Pt& x) const {
        Pt y = x;
        for (int a = 0; a < dim_; ++a) {
            if (boundary_ == BoundaryPolicy::ValueExtrapolation) {
                if (y[a] < lo_[a]) y[a] = lo_[a];
                if (y[a] > hi_[a]) y[a] = hi_[a];
            } else {
                const double L = hi_[a] - lo_[a];
                double s = std::fmod(y[a] - lo_[a], 2 * L);
                if (s < 0) s += 2 * L;
                y[a] = lo_[a] + (s <= L ? s : 2 * L - s);
            }
        }
        return y;
    }

    bool operator==(const Grid& o) const {
        return dim_ == o.dim_ && nx_ == o.nx_ && nt_ == o.nt_ && lo_ == o.lo_ && hi_ == o.hi_ &&
               horizon_ == o.horizon_ && boundary_ == o.boundary_;
    }

private:
    Pt lo_, hi_;
    int nx_, nt_;
    Rational horizon_;
    int dim_;
    BoundaryPolicy boundary_;
};

using GridPtr = std::shared_ptr<const Grid>;

// One time-layer of values over the spatial nodes, with multilinear
// interpolation. Out-of-box queries are resolved by the grid's boundary
// policy.
class ValueField {
public:
    explicit ValueField(GridPtr grid, double fill = 0.0)
        : grid_(std::move(grid)), v_(grid_->size(), fill) {}
    ValueField(GridPtr grid, std::vector<double> values)
        : grid_(std::move(grid)), v_(std::move(values)) {
        if (v_.size() != grid_->size()) throw std::invalid_argument("ValueField: size mismatch");
    }

    const Grid& grid() const { return *grid_; }
    GridPtr grid_ptr() const { return grid_; }
    std::size_t size() const { return v_.size(); }
    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }
    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

    bool finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double max() const {
        double m = v_[0];
        for (double x : v_) m = std::max(m, x);
        return m;
    }
    double min() const {
        double m = v_[0];
        for (double x : v_) m = std::min(m, x);
        return m;
    }
    double sup_norm() const { return std::max(std::abs(max()), std::abs(min())); }

    double interp(const Pt& q) const {
        const Grid& g = *grid_;
        const Pt x = g.map_into_box(q);
        const int n = g.nodes_per_axis();
        int i0[2] = {0, 0};
        double w[2] = {0, 0};
        for (int a = 0; a < g.dim(); ++a) {
            const double s = (x[a] - g.lo()[a]) / g.spacing(a);
            int i = static_cast<int>(std::floor(s));
            if (i < 0) i = 0;
            if (i > n - 2) i = n - 2;
            i0[a] = i;
            double t = s - i;
            if (t < 0) t = 0;
            if (t > 1) t = 1;
            w[a] = t;
        }
        if (g.dim() == 1) {
            return (1 - w[0]) * v_[i0[0]] + w[0] * v_[i0[0] + 1];
        }
        const double v00 = v_[g.index(i0[0], i0[1])];
        const double v10 = v_[g.index(i0[0] + 1, i0[1])];
        const double v01 = v_[g.index(i0[0], i0[1] + 1)];
        const double v11 = v_[g.index(i0[0] + 1, i0[1] + 1)];
        const double a0 = (1 - w[0]) * v00 + w[0] * v10;
        const double a1 = (1 - w[0]) * v01 + w[0] * v11;
        return (1 - w[1]) * a0 + w[1] * a1;
    }

private:
    GridPtr grid_;
    std::vector<double> v_;
};

} // namespace hjbqvi
