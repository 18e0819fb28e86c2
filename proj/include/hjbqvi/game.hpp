#pragma once

//
// Closes the loop between the PDE and the game: turns a Solution into
// feedback policies, rolls them out to estimate the upper and lower values,
// sweeps the impulse player's precommitment budget, and probes the dynamic
// programming principle as a rollout residual.
//

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hjbqvi/simulate.hpp"
#include "hjbqvi/solver.hpp"

namespace hjbqvi {

// Pure nearest-node lookups into the solver's recorded argmins. Total over
// the lattice; feedback on the current state only, hence nonanticipative.
struct FeedbackPolicyPair {
    GridPtr grid;
    std::vector<std::vector<Pt>> control;       // b*(t_k, node)
    std::vector<std::vector<unsigned char>> act;
    std::vector<std::vector<Pt>> zstar;

    Pt diffusion_at(int k, const Pt& x) const {
        const int kk = std::min<int>(std::max(k, 0), static_cast<int>(control.size()) - 1);
        return control[static_cast<std::size_t>(kk)][grid->nearest(x)];
    }
    ImpulseDecision impulse_at(int k, const Pt& x) const {
        const int kk = std::min<int>(std::max(k, 0), static_cast<int>(act.size()) - 1);
        const std::size_t i = grid->nearest(x);
        ImpulseDecision d;
        d.act = act[static_cast<std::size_t>(kk)][i] != 0;
        d.z = zstar[static_cast<std::size_t>(kk)][i];
        return d;
    }

    DiffusionPolicy diffusion() const {
        return [*this](int k, double, const Pt& x) { return diffusion_at(k, x); };
    }
    ImpulsePolicy impulse() const {
        return [*this](int k, double, const Pt& x) { return impulse_at(k, x); };
    }
};

inline FeedbackPolicyPair extract_policies(const ProblemSpec& spec, const Solution& sol) {
    if (!sol.grid || sol.layers.size() != static_cast<std::size_t>(sol.grid->time_steps()) + 1)
        throw std::invalid_argument("extract_policies: solution is missing layers");
    FeedbackPolicyPair pol;
    pol.grid = sol.grid;
    pol.act = sol.act;
    pol.zstar = sol.zstar;
    const auto bs = spec.control_points();
    pol.control.assign(sol.control_idx.size(), {});
    for (std::size_t k = 0; k < sol.control_idx.size(); ++k) {
        pol.control[k].resize(sol.control_idx[k].size());
        for (std::size_t i = 0; i < sol.control_idx[k].size(); ++i)
            pol.control[k][i] = bs[static_cast<std::size_t>(sol.control_idx[k][i])];
    }
    return pol;
}

struct ValuePairEstimate {
    double v_upper = 0, se_upper = 0;
    double v_lower = 0, se_lower = 0;
    int q = 1;
    int lower_adversary = -1; // index of the minimizing adversary
    std::string adversary_desc;
};

// Default adversary family: every constant control from the B sample plus
// the solver's own diffusion policy.
inline std::vector<DiffusionPolicy> default_adversaries(const ProblemSpec& spec,
                                                        const FeedbackPolicyPair& pol) {
    std::vector<DiffusionPolicy> fam;
    for (const Pt& b : spec.control_points()) fam.push_back(constant_control(b));
    fam.push_back(pol.diffusion());
    return fam;
}

// v_upper: fixed-point play, both players follow the solver's policies.
// v_lower: the adversary family minimizes against the solver's impulse
// policy (capped at q-1 impulses). The family shares path seeds, so the
// minimization compares like with like.
inline ValuePairEstimate estimate_value_pair(const ProblemSpec& spec,
                                             const FeedbackPolicyPair& pol, const Pt& x0, int q,
                                             const std::vector<DiffusionPolicy>& adversaries,
                                             int n_paths, std::uint64_t seed, int workers = 1) {
    if (adversaries.empty())
        throw std::invalid_argument("estimate_value_pair: adversary family must be nonempty");
    const int nt = pol.grid->time_steps();
    ValuePairEstimate out;
    out.q = q;
    out.adversary_desc =
        std::to_string(adversaries.size()) + " diffusion feedback policies (constants + solver)";
    const GainEstimate up =
        estimate_gain(spec, x0, 0, nt, pol.diffusion(), pol.impulse(), q, n_paths, seed, workers);
    out.v_upper = up.mean;
    out.se_upper = up.se;
    bool first = true;
    for (std::size_t a = 0; a < adversaries.size(); ++a) {
        const GainEstimate e = estimate_gain(spec, x0, 0, nt, adversaries[a], pol.impulse(), q,
                                             n_paths, seed, workers);
        if (first || e.mean < out.v_lower) {
            out.v_lower = e.mean;
            out.se_lower = e.se;
            out.lower_adversary = static_cast<int>(a);
            first = false;
        }
    }
    return out;
}

struct SweepRow {
    int q = 1;
    double v_lower = 0, se = 0;
};

// v_lower as a function of the precommitment budget. Budgets share the root
// seed (common random numbers), so the monotonicity in q is visible at desk
// scale.
inline std::vector<SweepRow> precommitment_sweep(const ProblemSpec& spec,
                                                 const FeedbackPolicyPair& pol, const Pt& x0,
                                                 int q_lo, int q_hi, int n_paths,
                                                 std::uint64_t seed, int workers = 1) {
    if (q_lo < 1 || q_hi < q_lo)
        throw std::invalid_argument("precommitment_sweep: bad budget range");
    const auto adversaries = default_adversaries(spec, pol);
    std::vector<SweepRow> rows;
    for (int q = q_lo; q <= q_hi; ++q) {
        const ValuePairEstimate e =
            estimate_value_pair(spec, pol, x0, q, adversaries, n_paths, seed, workers);
        rows.push_back({q, e.v_lower, e.se_lower});
    }
    return rows;
}

// Stopping rules over grid times; they see only the path prefix, so the
// produced stopping times are nonanticipative and take rational grid values
// by construction.
struct StoppingRule {
    enum class Kind { FixedTime, BoxExit };
    Kind kind = Kind::FixedTime;
    int fixed_k = 0; // FixedTime
    Box subbox;      // BoxExit: first grid time the post-impulse state leaves

    // First stopped index at or after k0 looking only at steps <= that index.
    int stop_index(const SamplePath& path, int dim) const {
        const int last = path.steps.back().k;
        if (kind == Kind::FixedTime) {
            if (fixed_k < path.steps.front().k || fixed_k > last)
                throw std::invalid_argument("StoppingRule: fixed time off the grid");
            return fixed_k;
        }
        for (const PathStep& s : path.steps) {
            bool outside = false;
            for (int a = 0; a < dim; ++a)
                if (s.x_post[a] < subbox.lo[a] || s.x_post[a] > subbox.hi[a]) outside = true;
            if (outside) return s.k;
        }
        return last;
    }

    std::string describe() const {
        if (kind == Kind::FixedTime) return "fixed_k=" + std::to_string(fixed_k);
        return "box_exit[" + std::to_string(subbox.lo[0]) + "," + std::to_string(subbox.hi[0]) +
               "]";
    }
};

struct DppResidual {
    double delta = 0; // mean J_0(0,x;.;theta) + mean u(theta, X_theta) - u(0,x0)
    double se = 0;
    double mean_theta = 0;
    std::string rule;
};

// Rolls the solver's own policies out to the stopping time and measures how
// far the stopped expectation drifts from the time-zero value.
inline DppResidual dpp_residual(const ProblemSpec& spec, const Solution& sol,
                                const FeedbackPolicyPair& pol, const Pt& x0,
                                const StoppingRule& rule, int q, int n_paths, std::uint64_t seed,
                                int workers = 1) {
    const int nt = sol.grid->time_steps();
    std::vector<double> vals(static_cast<std::size_t>(n_paths), 0.0);
    std::vector<double> thetas(static_cast<std::size_t>(n_paths), 0.0);
    parallel_for(static_cast<std::size_t>(n_paths), workers, [&](std::size_t p) {
        const SamplePath path = simulate_path(spec, x0, 0, nt, pol.diffusion(), pol.impulse(),
                                              q, split_seed(seed, p));
        const int kstop = rule.stop_index(path, spec.dim);
        double j0 = 0;
        Pt xs = x0;
        for (const PathStep& s : path.steps) {
            if (s.k > kstop) break;
            if (s.k == kstop) xs = s.x_post;
            if (s.k < kstop) j0 += s.f_term;
        }
        for (const PathImpulse& im : path.impulses)
            if (im.k <= kstop) j0 += im.cost;
        vals[p] = j0 + sol.layer(kstop).interp(xs);
        thetas[p] = sol.grid->time(kstop);
    });
    const GainEstimate e = detail::summarize(vals, seed);
    DppResidual out;
    out.delta = e.mean - sol.layer(0).interp(x0);
    out.se = e.se;
    out.mean_theta = pairwise_mean(thetas);
    out.rule = rule.describe();
    return out;
}

} // namespace hjbqvi
