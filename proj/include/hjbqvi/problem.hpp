#pragma once

//
// Game instances: coefficient catalog, standing-assumption validation, and
// the a-priori constants used by the solver, simulator and lemma checks.
//
// Coefficients come from a closed catalog of parametric families so that
// sup norms and Lipschitz constants are available analytically and problem
// files round-trip through configs. A Custom family exists as an internal
// extension point for tests; it is not serializable.
//

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hjbqvi/rational.hpp"
#include "hjbqvi/types.hpp"

namespace hjbqvi {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ProblemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Coefficient families
// ---------------------------------------------------------------------------

// Drift mu(x,b) = A x + c + D b. Lipschitz in x with constant |A|_F.
struct Drift {
    std::array<std::array<double, 2>, 2> A{{{0, 0}, {0, 0}}};
    Pt c{0, 0};
    std::array<std::array<double, 2>, 2> D{{{0, 0}, {0, 0}}}; // d x dB

    double eval(const Pt& x, const Pt& b, int axis, int dim, int dim_b) const {
        double v = c[axis];
        for (int j = 0; j < dim; ++j) v += A[axis][j] * x[j];
        for (int j = 0; j < dim_b; ++j) v += D[axis][j] * b[j];
        return v;
    }

    double lipschitz(int dim) const {
        double s = 0;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) s += A[i][j] * A[i][j];
        return std::sqrt(s);
    }
};

// Diffusion, diagonal: sigma(x,b) has per-axis scales. Constant per axis, or
// (dim 1 only) affine in x.
struct Diffusion {
    enum class Family { Constant, Affine };
    Family family = Family::Constant;
    Pt s{0.5, 0.5};  // Constant: per-axis scale
    double s0 = 0.5; // Affine (dim 1): s0 + s1 * x
    double s1 = 0;

    double eval(const Pt& x, const Pt& /*b*/, int axis) const {
        if (family == Family::Constant) return s[axis];
        return s0 + s1 * x[0];
    }

    double lipschitz() const { return family == Family::Constant ? 0.0 : std::abs(s1); }
};

// Scalar gain families shared by f and g.
//   constant:  offset
//   cosine:    amplitude * cos(<wave,x> + phase) + offset
//   gaussian:  amplitude * exp(-|x-center|^2 / (2 width^2)) + offset
//   affine:    <slope,x> + offset            (unbounded; fails validation)
//   custom:    test-only callable with caller-declared constants
enum class GainFamily { Constant, Cosine, Gaussian, Affine, Custom };

namespace detail {

inline double gain_eval(GainFamily family, double amplitude, double offset, const Pt& wave,
                        double phase, const Pt& center, double width, const Pt& slope,
                        const Pt& x, int dim) {
    switch (family) {
        case GainFamily::Constant: return offset;
        case GainFamily::Cosine: {
            double arg = phase;
            for (int i = 0; i < dim; ++i) arg += wave[i] * x[i];
            return amplitude * std::cos(arg) + offset;
        }
        case GainFamily::Gaussian: {
            const double r = dist(x, center, dim);
            return amplitude * std::exp(-r * r / (2 * width * width)) + offset;
        }
        case GainFamily::Affine: {
            double v = offset;
            for (int i = 0; i < dim; ++i) v += slope[i] * x[i];
            return v;
        }
        case GainFamily::Custom: break;
    }
    throw ProblemError("gain_eval: custom family has no closed form");
}

inline double gain_sup(GainFamily family, double amplitude, double offset, const Pt& slope,
                       int dim) {
    switch (family) {
        case GainFamily::Constant: return std::abs(offset);
        case GainFamily::Cosine: return std::abs(amplitude) + std::abs(offset);
        case GainFamily::Gaussian: return std::abs(amplitude) + std::abs(offset);
        case GainFamily::Affine: {
            double s = 0;
            for (int i = 0; i < dim; ++i) s += std::abs(slope[i]);
            return s > 0 ? kInf : std::abs(offset);
        }
        case GainFamily::Custom: break;
    }
    return kInf;
}

inline double gain_lipschitz(GainFamily family, double amplitude, const Pt& wave, double width,
                             const Pt& slope, int dim) {
    switch (family) {
        case GainFamily::Constant: return 0;
        case GainFamily::Cosine: return std::abs(amplitude) * norm(wave, dim);
        case GainFamily::Gaussian:
            // max |grad| = a / (width * sqrt(e)), attained at |x-center| = width
            return std::abs(amplitude) / (width * std::sqrt(std::exp(1.0)));
        case GainFamily::Affine: return norm(slope, dim);
        case GainFamily::Custom: break;
    }
    return kInf;
}

} // namespace detail

// Running gain f(t,x,b). Catalog families depend on x only.
struct RunningGain {
    GainFamily family = GainFamily::Constant;
    double amplitude = 0, offset = 0, phase = 0, width = 1;
    Pt wave{0, 0}, center{0, 0}, slope{0, 0};

    std::function<double(double, const Pt&, const Pt&)> custom; // tests only
    double custom_sup = kInf, custom_lipschitz = kInf;

    double eval(double t, const Pt& x, const Pt& b, int dim) const {
        if (family == GainFamily::Custom) return custom(t, x, b);
        return detail::gain_eval(family, amplitude, offset, wave, phase, center, width, slope, x,
                                 dim);
    }
    double sup(int dim) const {
        if (family == GainFamily::Custom) return custom_sup;
        return detail::gain_sup(family, amplitude, offset, slope, dim);
    }
    double lipschitz(int dim) const {
        if (family == GainFamily::Custom) return custom_lipschitz;
        return detail::gain_lipschitz(family, amplitude, wave, width, slope, dim);
    }
};

// Terminal gain g(x).
struct TerminalGain {
    GainFamily family = GainFamily::Constant;
    double amplitude = 0, offset = 0, phase = 0, width = 1;
    Pt wave{0, 0}, center{0, 0}, slope{0, 0};

    std::function<double(const Pt&)> custom; // tests only
    double custom_sup = kInf, custom_lipschitz = kInf;

    double eval(const Pt& x, int dim) const {
        if (family == GainFamily::Custom) return custom(x);
        return detail::gain_eval(family, amplitude, offset, wave, phase, center, width, slope, x,
                                 dim);
    }
    double sup(int dim) const {
        if (family == GainFamily::Custom) return custom_sup;
        return detail::gain_sup(family, amplitude, offset, slope, dim);
    }
    double lipschitz(int dim) const {
        if (family == GainFamily::Custom) return custom_lipschitz;
        return detail::gain_lipschitz(family, amplitude, wave, width, slope, dim);
    }
};

// Impulse cost K(t,z), always negative.
//   power:    -k0 - k1 |z|^p
//   constant: value (used by tests that must fail validation)
struct ImpulseCost {
    enum class Family { Power, Constant };
    Family family = Family::Power;
    double k0 = 0.1, k1 = 0.05, p = 1.0;
    double value = -1.0;

    double eval(double /*t*/, const Pt& z, int dim) const {
        if (family == Family::Constant) return value;
        return -k0 - k1 * std::pow(norm(z, dim), p);
    }

    // Lipschitz in z on {|z| <= r} (power family, p >= 1).
    double lipschitz_on(double r) const {
        if (family == Family::Constant) return 0;
        if (p < 1.0) return kInf; // gradient blows up at z = 0
        return k1 * p * std::pow(r, p - 1.0);
    }
};

// Compact control set B given as a finite sample grid (row-major product of
// per-axis uniform lattices; axis 0 fastest). "Smallest index" tie-breaking
// refers to this enumeration order.
struct ControlSampleGrid {
    Pt lo{-1, -1}, hi{1, 1};
    std::array<int, 2> count{21, 1};

    std::vector<Pt> points(int dim_b) const {
        std::vector<Pt> out;
        const int n0 = count[0], n1 = dim_b > 1 ? count[1] : 1;
        if (n0 < 1 || n1 < 1) throw ProblemError("control grid: counts must be >= 1");
        out.reserve(static_cast<std::size_t>(n0) * n1);
        for (int j = 0; j < n1; ++j)
            for (int i = 0; i < n0; ++i) {
                Pt b{0, 0};
                b[0] = n0 == 1 ? lo[0] : lo[0] + (hi[0] - lo[0]) * i / (n0 - 1);
                if (dim_b > 1) b[1] = n1 == 1 ? lo[1] : lo[1] + (hi[1] - lo[1]) * j / (n1 - 1);
                out.push_back(b);
            }
        return out;
    }
};

struct Box {
    Pt lo{0, 0}, hi{0, 0};
};

// ---------------------------------------------------------------------------
// ProblemSpec
// ---------------------------------------------------------------------------

struct ProblemSpec {
    std::string name = "custom";
    int dim = 1;   // d, 1 or 2
    int dim_b = 1; // dB
    Rational horizon{1, 1};
    Drift drift;
    Diffusion diffusion;
    RunningGain running;
    TerminalGain terminal;
    ImpulseCost cost;
    ControlSampleGrid controls;
    std::optional<Box> impulse_set; // Z; nullopt means all of R^d
    double cost_floor = 0.1;        // K0 of Assumption 2(iii)

    double T() const { return horizon.value(); }

    double mu(const Pt& x, const Pt& b, int axis) const {
        return drift.eval(x, b, axis, dim, dim_b);
    }
    double sigma(const Pt& x, const Pt& b, int axis) const { return diffusion.eval(x, b, axis); }
    double f(double t, const Pt& x, const Pt& b) const { return running.eval(t, x, b, dim); }
    double g(const Pt& x) const { return terminal.eval(x, dim); }
    // Impulse displacement Gamma(t,z) = z (shift family).
    Pt impulse_shift(double /*t*/, const Pt& z) const { return z; }
    double K(double t, const Pt& z) const { return cost.eval(t, z, dim); }

    std::vector<Pt> control_points() const { return controls.points(dim_b); }

    double f_sup() const { return running.sup(dim); }
    double g_sup() const { return terminal.sup(dim); }
};

// ---------------------------------------------------------------------------
// A-priori constants
// ---------------------------------------------------------------------------

// c = T ||f|| + ||g||; every value estimate and solver layer must stay in
// [-c, c] (at zero discount).
inline double global_bound(const ProblemSpec& spec) {
    const double c = spec.T() * spec.f_sup() + spec.g_sup();
    if (!std::isfinite(c)) throw ProblemError("global_bound: f or g has non-finite sup norm");
    return c;
}

// Smallest r such that K(t,z) <= -2c whenever |z| > r. Impulse searches never
// look outside the closed ball of this radius.
inline double truncation_radius(const ProblemSpec& spec) {
    if (spec.cost.family != ImpulseCost::Family::Power || spec.cost.k1 <= 0)
        throw ProblemError(
            "truncation_radius: cost does not grow (k1 = 0); Assumption 2(iii) "
            "growth condition violated");
    const double c = global_bound(spec);
    const double need = 2 * c - spec.cost.k0; // k0 + k1 r^p >= 2c
    if (need <= 0) return 0.0;
    return std::pow(need / spec.cost.k1, 1.0 / spec.cost.p);
}

// sup |K| over [0,T] x {|z| <= r}; the K1 of the gain bound |J| <= c + q K1.
inline double cost_sup_on_ball(const ProblemSpec& spec, double r) {
    if (spec.cost.family == ImpulseCost::Family::Constant) return std::abs(spec.cost.value);
    return spec.cost.k0 + spec.cost.k1 * std::pow(r, spec.cost.p);
}

// ---------------------------------------------------------------------------
// Validation of the standing assumptions
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string check;
    bool pass = true;
    double measured = 0;     // measured constant (sup norm, quotient, ...)
    double allowed = 0;      // catalog bound it is compared against
    std::string witness;     // sample point for a failed check
    std::size_t samples = 0;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    std::uint64_t seed = 0;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    const CheckResult* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.check == name) return &c;
        return nullptr;
    }
};

namespace detail {

inline std::string pt_str(const Pt& x, int dim) {
    std::ostringstream os;
    os << "(" << x[0];
    if (dim > 1) os << ", " << x[1];
    os << ")";
    return os.str();
}

// Sample points: a fixed odd lattice on [-8,8]^d (contains 0 and the box
// corners, so even extrema of symmetric coefficients are measured exactly)
// plus seeded uniform draws.
inline std::vector<Pt> sample_states(int dim, std::size_t n_random, std::mt19937_64& gen) {
    std::vector<Pt> out;
    const double L = 8.0;
    const int nl = 17;
    if (dim == 1) {
        for (int i = 0; i < nl; ++i) out.push_back(pt(-L + 2 * L * i / (nl - 1)));
    } else {
        for (int i = 0; i < nl; ++i)
            for (int j = 0; j < nl; ++j)
                out.push_back(pt(-L + 2 * L * i / (nl - 1), -L + 2 * L * j / (nl - 1)));
    }
    std::uniform_real_distribution<double> u(-L, L);
    for (std::size_t k = 0; k < n_random; ++k) {
        Pt x{0, 0};
        for (int a = 0; a < dim; ++a) x[a] = u(gen);
        out.push_back(x);
    }
    return out;
}

} // namespace detail

// Samples every sample-checkable bullet of the standing assumptions.
// Analytic violations (non-finite sup norms) reject the instance outright;
// sampled violations are reported with a witnessing point. Deterministic
// given the seed.
inline ValidationReport validate_problem(const ProblemSpec& spec, std::size_t samples,
                                         std::uint64_t seed = 0x5eed) {
    if (samples < 100) throw std::invalid_argument("validate_problem: samples must be >= 100");
    if (spec.dim != 1 && spec.dim != 2) throw ProblemError("validate_problem: dim must be 1 or 2");
    if (!std::isfinite(spec.f_sup()))
        throw ProblemError("validate_problem: running gain family reports non-finite sup norm; "
                           "instance rejected (bounded-gain assumption)");
    if (!std::isfinite(spec.g_sup()))
        throw ProblemError("validate_problem: terminal gain family reports non-finite sup norm; "
                           "instance rejected (bounded-gain assumption)");
    if (spec.cost_floor <= 0) throw ProblemError("validate_problem: cost floor K0 must be > 0");

    ValidationReport report;
    report.seed = seed;
    std::mt19937_64 gen(seed);
    const auto xs = detail::sample_states(spec.dim, samples, gen);
    const auto bs = spec.control_points();
    const double T = spec.T();
    std::uniform_real_distribution<double> ut(0.0, T);
    const double rel = 1 + 1e-9;

    // B compact and nonempty (structural).
    {
        CheckResult c{"control_set_compact_nonempty"};
        c.samples = bs.size();
        c.pass = !bs.empty();
        for (const auto& b : bs)
            if (!std::isfinite(b[0]) || !std::isfinite(b[1])) c.pass = false;
        report.checks.push_back(c);
    }

    // mu, sigma Lipschitz in x, uniformly over sampled b.
    {
        CheckResult cm{"drift_lipschitz"}, cs{"diffusion_lipschitz"};
        cm.allowed = spec.drift.lipschitz(spec.dim) * rel + 1e-12;
        cs.allowed = spec.diffusion.lipschitz() * rel + 1e-12;
        for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
            const Pt &x = xs[i], &y = xs[i + 1];
            const double dxy = dist(x, y, spec.dim);
            if (dxy < 1e-12) continue;
            for (std::size_t jb = 0; jb < bs.size(); jb += std::max<std::size_t>(1, bs.size() / 4)) {
                const Pt& b = bs[jb];
                double dm = 0, ds = 0;
                for (int a = 0; a < spec.dim; ++a) {
                    dm += std::pow(spec.mu(x, b, a) - spec.mu(y, b, a), 2);
                    ds += std::pow(spec.sigma(x, b, a) - spec.sigma(y, b, a), 2);
                }
                const double qm = std::sqrt(dm) / dxy, qs = std::sqrt(ds) / dxy;
                if (qm > cm.measured) cm.measured = qm;
                if (qs > cs.measured) cs.measured = qs;
                if (qm > cm.allowed && cm.pass) {
                    cm.pass = false;
                    cm.witness = detail::pt_str(x, spec.dim) + " vs " + detail::pt_str(y, spec.dim);
                }
                if (qs > cs.allowed && cs.pass) {
                    cs.pass = false;
                    cs.witness = detail::pt_str(x, spec.dim) + " vs " + detail::pt_str(y, spec.dim);
                }
            }
            cm.samples++;
            cs.samples++;
        }
        report.checks.push_back(cm);
        report.checks.push_back(cs);
    }

    // f, g bounded: measured sup stays within the catalog constant.
    {
        CheckResult cf{"running_gain_bounded"}, cg{"terminal_gain_bounded"};
        cf.allowed = spec.f_sup() * rel + 1e-12;
        cg.allowed = spec.g_sup() * rel + 1e-12;
        for (const auto& x : xs) {
            const double t = ut(gen);
            const Pt& b = bs[gen() % bs.size()];
            const double av = std::abs(spec.f(t, x, b));
            const double ag = std::abs(spec.g(x));
            if (av > cf.measured) cf.measured = av;
            if (ag > cg.measured) cg.measured = ag;
            if (av > cf.allowed && cf.pass) { cf.pass = false; cf.witness = detail::pt_str(x, spec.dim); }
            if (ag > cg.allowed && cg.pass) { cg.pass = false; cg.witness = detail::pt_str(x, spec.dim); }
            cf.samples++;
            cg.samples++;
        }
        report.checks.push_back(cf);
        report.checks.push_back(cg);
    }

    // f, g Lipschitz in x.
    {
        CheckResult cf{"running_gain_lipschitz"}, cg{"terminal_gain_lipschitz"};
        cf.allowed = spec.running.lipschitz(spec.dim) * rel + 1e-12;
        cg.allowed = spec.terminal.lipschitz(spec.dim) * rel + 1e-12;
        for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
            const Pt &x = xs[i], &y = xs[i + 1];
            const double dxy = dist(x, y, spec.dim);
            if (dxy < 1e-12) continue;
            const double t = ut(gen);
            const Pt& b = bs[gen() % bs.size()];
            const double qf = std::abs(spec.f(t, x, b) - spec.f(t, y, b)) / dxy;
            const double qg = std::abs(spec.g(x) - spec.g(y)) / dxy;
            if (qf > cf.measured) cf.measured = qf;
            if (qg > cg.measured) cg.measured = qg;
            if (qf > cf.allowed && cf.pass) { cf.pass = false; cf.witness = detail::pt_str(x, spec.dim); }
            if (qg > cg.allowed && cg.pass) { cg.pass = false; cg.witness = detail::pt_str(x, spec.dim); }
            cf.samples++;
            cg.samples++;
        }
        report.checks.push_back(cf);
        report.checks.push_back(cg);
    }

    // Impulse-space samples: uniform in a working ball plus directions used
    // by the growth probe.
    const double zr = 10.0;
    std::uniform_real_distribution<double> uz(-zr, zr);
    std::vector<Pt> zs;
    for (std::size_t k = 0; k < samples; ++k) {
        Pt z{0, 0};
        for (int a = 0; a < spec.dim; ++a) z[a] = uz(gen);
        zs.push_back(z);
    }
    zs.push_back(pt(0.0));

    // K <= -K0 everywhere sampled.
    {
        CheckResult c{"cost_below_negative_floor"};
        c.allowed = -spec.cost_floor;
        c.measured = -kInf;
        for (const auto& z : zs) {
            const double t = ut(gen);
            const double k = spec.K(t, z);
            if (k > c.measured) c.measured = k;
            if (k > -spec.cost_floor + 1e-12 && c.pass) {
                c.pass = false;
                std::ostringstream os;
                os << "t=" << t << " z=" << detail::pt_str(z, spec.dim);
                c.witness = os.str();
            }
            c.samples++;
        }
        report.checks.push_back(c);
    }

    // K -> -infinity as |z| -> infinity: strictly decreasing along a geometric
    // radius sample and eventually below -(2c + 1), which is what the
    // compact-truncation argument consumes.
    {
        CheckResult c{"cost_growth"};
        const double cbound = global_bound(spec);
        c.allowed = -(2 * cbound + 1);
        bool decreasing = true;
        double last = 0, first = 0;
        const double t = ut(gen);
        const Pt dir = spec.dim == 1 ? pt(1.0) : pt(std::sqrt(0.5), std::sqrt(0.5));
        for (int j = 0; j <= 24; ++j) {
            const double r = std::ldexp(1.0, j); // 2^j
            const double k = spec.K(t, Pt{dir[0] * r, dir[1] * r});
            if (j == 0) first = k;
            else if (k >= last - 1e-12) decreasing = false;
            last = k;
            c.samples++;
        }
        (void)first;
        c.measured = last;
        c.pass = decreasing && last <= c.allowed;
        if (!c.pass) c.witness = "geometric radii up to 2^24";
        report.checks.push_back(c);
    }

    // Merge property: Gamma(t,z1) + Gamma(t,z2) = Gamma(t,z1+z2) (exact for
    // shift impulses) and K(t,z1+z2) >= K(t,z1) + K(t,z2).
    {
        CheckResult c{"impulse_merge"};
        for (std::size_t i = 0; i + 1 < zs.size(); i += 2) {
            const Pt &z1 = zs[i], &z2 = zs[i + 1];
            const double t = ut(gen);
            const Pt zm = add(z1, z2);
            const Pt gsum = add(spec.impulse_shift(t, z1), spec.impulse_shift(t, z2));
            const Pt gmerged = spec.impulse_shift(t, zm);
            const bool shift_ok = gsum == gmerged;
            const double kk = spec.K(t, zm) - (spec.K(t, z1) + spec.K(t, z2));
            if (kk < c.measured) c.measured = kk;
            if ((!shift_ok || kk < -1e-12) && c.pass) {
                c.pass = false;
                c.witness = detail::pt_str(z1, spec.dim) + " + " + detail::pt_str(z2, spec.dim);
            }
            c.samples++;
        }
        report.checks.push_back(c);
    }

    return report;
}

// ---------------------------------------------------------------------------
// Canonical instances
// ---------------------------------------------------------------------------

// TP1: d=1, T=1, mu(x,b)=b with B=[-1,1] (21 samples), sigma=0.5, f=0,
// g=cos x, Gamma(t,z)=z, K(t,z) = -0.1 - 0.05|z|.
inline ProblemSpec make_tp1() {
    ProblemSpec s;
    s.name = "tp1";
    s.dim = 1;
    s.dim_b = 1;
    s.horizon = Rational(1, 1);
    s.drift.A = {{{0, 0}, {0, 0}}};
    s.drift.c = pt(0.0);
    s.drift.D = {{{1, 0}, {0, 0}}};
    s.diffusion.family = Diffusion::Family::Constant;
    s.diffusion.s = pt(0.5);
    s.running.family = GainFamily::Constant;
    s.running.offset = 0;
    s.terminal.family = GainFamily::Cosine;
    s.terminal.amplitude = 1;
    s.terminal.wave = pt(1.0);
    s.cost.family = ImpulseCost::Family::Power;
    s.cost.k0 = 0.1;
    s.cost.k1 = 0.05;
    s.cost.p = 1;
    s.controls.lo = pt(-1.0);
    s.controls.hi = pt(1.0);
    s.controls.count = {21, 1};
    s.cost_floor = 0.1;
    return s;
}

// TP0: TP1 dynamics with f = 0 and g = 0; the value is identically zero.
inline ProblemSpec make_tp0() {
    ProblemSpec s = make_tp1();
    s.name = "tp0";
    s.terminal = TerminalGain{};
    s.terminal.family = GainFamily::Constant;
    s.terminal.offset = 0;
    return s;
}

// TP2: TP1 with g = 1; the value is identically one and impulses never pay.
inline ProblemSpec make_tp2() {
    ProblemSpec s = make_tp1();
    s.name = "tp2";
    s.terminal = TerminalGain{};
    s.terminal.family = GainFamily::Constant;
    s.terminal.offset = 1;
    return s;
}

} // namespace hjbqvi
