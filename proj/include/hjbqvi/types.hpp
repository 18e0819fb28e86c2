#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace hjbqvi {

// Point in state / control / impulse space. Only the first `dim` entries of
// a Pt are meaningful; the rest stay zero. dim is at most 2 throughout.
using Pt = std::array<double, 2>;

inline Pt pt(double x) { return Pt{x, 0.0}; }
inline Pt pt(double x, double y) { return Pt{x, y}; }

inline Pt add(const Pt& a, const Pt& b) { return Pt{a[0] + b[0], a[1] + b[1]}; }
inline Pt sub(const Pt& a, const Pt& b) { return Pt{a[0] - b[0], a[1] - b[1]}; }

inline double norm(const Pt& a, int dim) {
    return dim == 1 ? std::abs(a[0]) : std::hypot(a[0], a[1]);
}

inline double dist(const Pt& a, const Pt& b, int dim) {
    return norm(sub(a, b), dim);
}

// Ordering used for deterministic tie-breaking: smaller norm first, then
// lexicographic.
inline bool impulse_less(const Pt& a, const Pt& b, int dim) {
    const double na = norm(a, dim), nb = norm(b, dim);
    if (na != nb) return na < nb;
    if (a[0] != b[0]) return a[0] < b[0];
    return a[1] < b[1];
}

} // namespace hjbqvi
