#pragma once

//
// Euler-Maruyama simulation of the impulse-controlled SDE
//
//   X_{k+1} = X_k + mu(X_k, b_k) dt + sigma(X_k, b_k) dW_k,
//   X <- X + Gamma(t_k, z) at grid times where the impulse policy acts,
//
// and Monte Carlo estimation of the gain J = E[ int f ds + sum K + g(X_T) ].
// Impulses are restricted to grid times; this is the computable analogue of
// the rational-impulse-time restriction and is exact for the game the
// toolkit defines, not an approximation of something else. A budget q means
// strictly fewer than q impulses per path.
//

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hjbqvi/parallel.hpp"
#include "hjbqvi/problem.hpp"
#include "hjbqvi/rational.hpp"
#include "hjbqvi/rng.hpp"
#include "hjbqvi/types.hpp"

namespace hjbqvi {

struct SimulationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ImpulseDecision {
    bool act = false;
    Pt z{0, 0};
};

// Feedback controls on the time lattice: k is the grid-time index, t its
// value. Nonanticipative by construction (they see only the current state).
using DiffusionPolicy = std::function<Pt(int k, double t, const Pt& x)>;
using ImpulsePolicy = std::function<ImpulseDecision(int k, double t, const Pt& x)>;

inline DiffusionPolicy constant_control(const Pt& b) {
    return [b](int, double, const Pt&) { return b; };
}
inline ImpulsePolicy hold_always() {
    return [](int, double, const Pt&) { return ImpulseDecision{}; };
}

struct PathImpulse {
    int k = 0;
    Rational t{0, 1};
    Pt z{0, 0};
    double cost = 0;
};

struct PathStep {
    int k = 0;
    double t = 0;
    Pt x_pre{0, 0};  // state on arrival at t_k
    Pt x_post{0, 0}; // state after impulses at t_k
    Pt b{0, 0};      // control applied on [t_k, t_{k+1})
    Pt dW{0, 0};     // Brownian increment of that interval
    double f_term = 0; // f(t_k, x_post, b) * dt, left-endpoint quadrature
};

struct SamplePath {
    std::vector<PathStep> steps; // indices k0..N_t inclusive
    std::vector<PathImpulse> impulses;
    int budget_q = 1;
    double f_integral = 0;
    double cost_sum = 0;
    double terminal_gain = 0; // g(X_T) after terminal impulses

    double gain() const { return f_integral + cost_sum + terminal_gain; }
};

// One path of the controlled SDE on the rational time lattice t_k = k T/N_t,
// from (t_{k0}, x0). Deterministic given the seed.
inline SamplePath simulate_path(const ProblemSpec& spec, const Pt& x0, int k0, int nt,
                                const DiffusionPolicy& bpol, const ImpulsePolicy& ipol, int q,
                                std::uint64_t seed) {
    if (q < 1) throw std::invalid_argument("simulate_path: budget q must be >= 1");
    if (k0 < 0 || k0 > nt) throw std::invalid_argument("simulate_path: bad start index");
    GaussianSampler rng(seed);
    SamplePath path;
    path.budget_q = q;
    Pt X = x0;
    for (int k = k0; k <= nt; ++k) {
        const Rational tk = spec.horizon * Rational(k, nt);
        const double t = tk.value();
        PathStep step;
        step.k = k;
        step.t = t;
        step.x_pre = X;
        // impulses at this grid time; fewer than q per path in total
        while (static_cast<int>(path.impulses.size()) < q - 1) {
            const ImpulseDecision dec = ipol(k, t, X);
            if (!dec.act) break;
            const double cost = spec.K(t, dec.z);
            X = add(X, spec.impulse_shift(t, dec.z));
            path.impulses.push_back({k, tk, dec.z, cost});
            path.cost_sum += cost;
        }
        step.x_post = X;
        if (k < nt) {
            const double dt =
                (spec.horizon * Rational(k + 1, nt)).value() - t;
            const Pt b = bpol(k, t, X);
            step.b = b;
            const double sq = std::sqrt(dt);
            Pt Xn = X;
            for (int a = 0; a < spec.dim; ++a) {
                const double dw = sq * rng.normal();
                step.dW[a] = dw;
                Xn[a] = X[a] + spec.mu(X, b, a) * dt + spec.sigma(X, b, a) * dw;
            }
            step.f_term = spec.f(t, X, b) * dt;
            path.f_integral += step.f_term;
            X = Xn;
            for (int a = 0; a < spec.dim; ++a)
                if (!std::isfinite(X[a]))
                    throw SimulationError("simulate_path: state blew up at step " +
                                          std::to_string(k));
        }
        path.steps.push_back(step);
    }
    path.terminal_gain = spec.g(X);
    return path;
}

struct GainEstimate {
    double mean = 0;
    double se = 0; // sample std / sqrt(n)
    int n = 0;
    std::uint64_t seed = 0;
};

namespace detail {

// Mean and standard error with a fixed pairwise reduction shape, so results
// do not depend on how paths were scheduled.
inline GainEstimate summarize(const std::vector<double>& gains, std::uint64_t seed) {
    GainEstimate est;
    est.n = static_cast<int>(gains.size());
    est.seed = seed;
    est.mean = pairwise_mean(gains);
    if (gains.size() > 1) {
        std::vector<double> sq(gains.size());
        for (std::size_t i = 0; i < gains.size(); ++i) {
            const double d = gains[i] - est.mean;
            sq[i] = d * d;
        }
        const double var = pairwise_sum(sq) / static_cast<double>(gains.size() - 1);
        est.se = std::sqrt(var / static_cast<double>(gains.size()));
    }
    return est;
}

} // namespace detail

// Monte Carlo estimate of the gain functional under the given feedback pair.
// Per-path seeds derive from the root seed via the documented splitting rule,
// so the estimate is independent of scheduling order and worker count.
inline GainEstimate estimate_gain(const ProblemSpec& spec, const Pt& x0, int k0, int nt,
                                  const DiffusionPolicy& bpol, const ImpulsePolicy& ipol, int q,
                                  int n_paths, std::uint64_t seed, int workers = 1) {
    if (n_paths < 2) throw std::invalid_argument("estimate_gain: need at least 2 paths");
    std::vector<double> gains(static_cast<std::size_t>(n_paths), 0.0);
    parallel_for(static_cast<std::size_t>(n_paths), workers, [&](std::size_t p) {
        const SamplePath path =
            simulate_path(spec, x0, k0, nt, bpol, ipol, q, split_seed(seed, p));
        gains[p] = path.gain();
    });
    return detail::summarize(gains, seed);
}

// Common-random-number probe of the spatial regularity of J: the two
// estimates share per-path seeds, so the difference isolates the dependence
// on the starting point.
inline double lipschitz_probe(const ProblemSpec& spec, int k0, int nt, const Pt& x,
                              const Pt& xhat, const DiffusionPolicy& bpol,
                              const ImpulsePolicy& ipol, int q, int n_paths, std::uint64_t seed,
                              int workers = 1) {
    const double d = dist(x, xhat, spec.dim);
    if (d <= 0) throw std::invalid_argument("lipschitz_probe: points must differ");
    const GainEstimate a = estimate_gain(spec, x, k0, nt, bpol, ipol, q, n_paths, seed, workers);
    const GainEstimate b =
        estimate_gain(spec, xhat, k0, nt, bpol, ipol, q, n_paths, seed, workers);
    return std::abs(a.mean - b.mean) / d;
}

} // namespace hjbqvi
