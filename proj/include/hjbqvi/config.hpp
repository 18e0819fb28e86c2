#pragma once

//
// Config file schema: a single JSON document describing the problem (catalog
// families and parameters), grid, impulse lattice, scheme, Monte Carlo
// parameters and root seed. parse -> emit -> parse is the identity.
//

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hjbqvi/grid.hpp"
#include "hjbqvi/problem.hpp"
#include "hjbqvi/solver.hpp"

namespace hjbqvi {

using Json = nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace cfg {

inline Json vec_json(const Pt& p, int dim) {
    Json a = Json::array();
    for (int i = 0; i < dim; ++i) a.push_back(p[i]);
    return a;
}

inline Pt vec_parse(const Json& j, int dim, const std::string& what) {
    if (!j.is_array() || static_cast<int>(j.size()) != dim)
        throw ConfigError("config: field '" + what + "' must be an array of length " +
                          std::to_string(dim));
    Pt p{0, 0};
    for (int i = 0; i < dim; ++i) p[i] = j[static_cast<std::size_t>(i)].get<double>();
    return p;
}

inline Json mat_json(const std::array<std::array<double, 2>, 2>& m, int rows, int cols) {
    Json a = Json::array();
    for (int i = 0; i < rows; ++i) {
        Json r = Json::array();
        for (int j = 0; j < cols; ++j) r.push_back(m[i][j]);
        a.push_back(r);
    }
    return a;
}

inline std::array<std::array<double, 2>, 2> mat_parse(const Json& j, int rows, int cols,
                                                      const std::string& what) {
    std::array<std::array<double, 2>, 2> m{{{0, 0}, {0, 0}}};
    if (!j.is_array() || static_cast<int>(j.size()) != rows)
        throw ConfigError("config: field '" + what + "' must have " + std::to_string(rows) +
                          " rows");
    for (int i = 0; i < rows; ++i) {
        const Json& r = j[static_cast<std::size_t>(i)];
        if (!r.is_array() || static_cast<int>(r.size()) != cols)
            throw ConfigError("config: field '" + what + "' must have " + std::to_string(cols) +
                              " columns");
        for (int jj = 0; jj < cols; ++jj) m[i][jj] = r[static_cast<std::size_t>(jj)].get<double>();
    }
    return m;
}

} // namespace cfg

inline Json problem_to_json(const ProblemSpec& s) {
    Json j;
    j["name"] = s.name;
    j["dim"] = s.dim;
    j["dim_b"] = s.dim_b;
    j["horizon"] = {{"num", s.horizon.num}, {"den", s.horizon.den}};
    j["drift"] = {{"A", cfg::mat_json(s.drift.A, s.dim, s.dim)},
                  {"c", cfg::vec_json(s.drift.c, s.dim)},
                  {"D", cfg::mat_json(s.drift.D, s.dim, s.dim_b)}};
    if (s.diffusion.family == Diffusion::Family::Constant)
        j["diffusion"] = {{"family", "constant"}, {"s", cfg::vec_json(s.diffusion.s, s.dim)}};
    else
        j["diffusion"] = {{"family", "affine"}, {"s0", s.diffusion.s0}, {"s1", s.diffusion.s1}};

    auto gain_json = [&](GainFamily fam, double amplitude, double offset, const Pt& wave,
                         double phase, const Pt& center, double width, const Pt& slope) -> Json {
        switch (fam) {
            case GainFamily::Constant: return Json{{"family", "constant"}, {"offset", offset}};
            case GainFamily::Cosine:
                return Json{{"family", "cosine"},
                            {"amplitude", amplitude},
                            {"wave", cfg::vec_json(wave, s.dim)},
                            {"phase", phase},
                            {"offset", offset}};
            case GainFamily::Gaussian:
                return Json{{"family", "gaussian"},
                            {"amplitude", amplitude},
                            {"center", cfg::vec_json(center, s.dim)},
                            {"width", width},
                            {"offset", offset}};
            case GainFamily::Affine:
                return Json{{"family", "affine"},
                            {"slope", cfg::vec_json(slope, s.dim)},
                            {"offset", offset}};
            case GainFamily::Custom: break;
        }
        throw ConfigError("config: custom coefficients are not serializable");
    };
    j["running_gain"] = gain_json(s.running.family, s.running.amplitude, s.running.offset,
                                  s.running.wave, s.running.phase, s.running.center,
                                  s.running.width, s.running.slope);
    j["terminal_gain"] = gain_json(s.terminal.family, s.terminal.amplitude, s.terminal.offset,
                                   s.terminal.wave, s.terminal.phase, s.terminal.center,
                                   s.terminal.width, s.terminal.slope);
    if (s.cost.family == ImpulseCost::Family::Power)
        j["impulse_cost"] = {{"family", "power"}, {"k0", s.cost.k0}, {"k1", s.cost.k1},
                             {"p", s.cost.p}};
    else
        j["impulse_cost"] = {{"family", "constant"}, {"value", s.cost.value}};
    j["control_set"] = {{"lo", cfg::vec_json(s.controls.lo, s.dim_b)},
                        {"hi", cfg::vec_json(s.controls.hi, s.dim_b)},
                        {"count", Json::array()}};
    for (int a = 0; a < s.dim_b; ++a) j["control_set"]["count"].push_back(s.controls.count[a]);
    if (s.impulse_set)
        j["impulse_set"] = {{"lo", cfg::vec_json(s.impulse_set->lo, s.dim)},
                            {"hi", cfg::vec_json(s.impulse_set->hi, s.dim)}};
    j["cost_floor"] = s.cost_floor;
    return j;
}

inline ProblemSpec problem_from_json(const Json& j) {
    ProblemSpec s;
    s.name = j.value("name", std::string("custom"));
    s.dim = j.at("dim").get<int>();
    s.dim_b = j.at("dim_b").get<int>();
    if (s.dim != 1 && s.dim != 2) throw ConfigError("config: dim must be 1 or 2");
    if (s.dim_b != 1 && s.dim_b != 2) throw ConfigError("config: dim_b must be 1 or 2");
    s.horizon = Rational(j.at("horizon").at("num").get<std::int64_t>(),
                         j.at("horizon").at("den").get<std::int64_t>());
    const Json& jd = j.at("drift");
    s.drift.A = cfg::mat_parse(jd.at("A"), s.dim, s.dim, "drift.A");
    s.drift.c = cfg::vec_parse(jd.at("c"), s.dim, "drift.c");
    s.drift.D = cfg::mat_parse(jd.at("D"), s.dim, s.dim_b, "drift.D");
    const Json& js = j.at("diffusion");
    const std::string dfam = js.at("family").get<std::string>();
    if (dfam == "constant") {
        s.diffusion.family = Diffusion::Family::Constant;
        s.diffusion.s = cfg::vec_parse(js.at("s"), s.dim, "diffusion.s");
    } else if (dfam == "affine") {
        if (s.dim != 1) throw ConfigError("config: affine diffusion requires dim = 1");
        s.diffusion.family = Diffusion::Family::Affine;
        s.diffusion.s0 = js.at("s0").get<double>();
        s.diffusion.s1 = js.at("s1").get<double>();
    } else {
        throw ConfigError("config: unknown diffusion family '" + dfam + "'");
    }

    auto gain_parse = [&](const Json& jg, const std::string& what, GainFamily& fam,
                          double& amplitude, double& offset, Pt& wave, double& phase, Pt& center,
                          double& width, Pt& slope) {
        const std::string f = jg.at("family").get<std::string>();
        if (f == "constant") {
            fam = GainFamily::Constant;
            offset = jg.at("offset").get<double>();
        } else if (f == "cosine") {
            fam = GainFamily::Cosine;
            amplitude = jg.at("amplitude").get<double>();
            wave = cfg::vec_parse(jg.at("wave"), s.dim, what + ".wave");
            phase = jg.value("phase", 0.0);
            offset = jg.value("offset", 0.0);
        } else if (f == "gaussian") {
            fam = GainFamily::Gaussian;
            amplitude = jg.at("amplitude").get<double>();
            center = cfg::vec_parse(jg.at("center"), s.dim, what + ".center");
            width = jg.at("width").get<double>();
            offset = jg.value("offset", 0.0);
            if (width <= 0) throw ConfigError("config: gaussian width must be > 0");
        } else if (f == "affine") {
            fam = GainFamily::Affine;
            slope = cfg::vec_parse(jg.at("slope"), s.dim, what + ".slope");
            offset = jg.value("offset", 0.0);
        } else {
            throw ConfigError("config: unknown gain family '" + f + "' in " + what);
        }
    };
    gain_parse(j.at("running_gain"), "running_gain", s.running.family, s.running.amplitude,
               s.running.offset, s.running.wave, s.running.phase, s.running.center,
               s.running.width, s.running.slope);
    gain_parse(j.at("terminal_gain"), "terminal_gain", s.terminal.family, s.terminal.amplitude,
               s.terminal.offset, s.terminal.wave, s.terminal.phase, s.terminal.center,
               s.terminal.width, s.terminal.slope);

    const Json& jk = j.at("impulse_cost");
    const std::string kfam = jk.at("family").get<std::string>();
    if (kfam == "power") {
        s.cost.family = ImpulseCost::Family::Power;
        s.cost.k0 = jk.at("k0").get<double>();
        s.cost.k1 = jk.at("k1").get<double>();
        s.cost.p = jk.at("p").get<double>();
        if (s.cost.p <= 0) throw ConfigError("config: impulse cost exponent p must be > 0");
    } else if (kfam == "constant") {
        s.cost.family = ImpulseCost::Family::Constant;
        s.cost.value = jk.at("value").get<double>();
    } else {
        throw ConfigError("config: unknown impulse cost family '" + kfam + "'");
    }

    const Json& jb = j.at("control_set");
    s.controls.lo = cfg::vec_parse(jb.at("lo"), s.dim_b, "control_set.lo");
    s.controls.hi = cfg::vec_parse(jb.at("hi"), s.dim_b, "control_set.hi");
    const Json& jc = jb.at("count");
    if (!jc.is_array() || static_cast<int>(jc.size()) != s.dim_b)
        throw ConfigError("config: control_set.count must have dim_b entries");
    s.controls.count = {1, 1};
    for (int a = 0; a < s.dim_b; ++a) s.controls.count[a] = jc[static_cast<std::size_t>(a)].get<int>();

    if (j.contains("impulse_set")) {
        Box z;
        z.lo = cfg::vec_parse(j.at("impulse_set").at("lo"), s.dim, "impulse_set.lo");
        z.hi = cfg::vec_parse(j.at("impulse_set").at("hi"), s.dim, "impulse_set.hi");
        s.impulse_set = z;
    }
    s.cost_floor = j.at("cost_floor").get<double>();
    return s;
}

// Run-level configuration shared by every CLI command.
struct RunConfig {
    ProblemSpec problem;
    Pt grid_lo{0, 0}, grid_hi{0, 0};
    int grid_nodes = 0;
    int grid_steps = 0;
    BoundaryPolicy boundary = BoundaryPolicy::ValueExtrapolation;
    int impulse_points = 0;
    double impulse_radius_override = -1; // < 0: use truncation_radius
    Scheme scheme;
    int mc_paths = 10000;
    int mc_q = 4;
    Pt mc_x0{0, 0};
    std::uint64_t seed = 0;
    int workers = 1;

    GridPtr make_grid() const {
        return std::make_shared<Grid>(grid_lo, grid_hi, grid_nodes, grid_steps, problem.horizon,
                                      problem.dim, boundary);
    }
    ImpulseGrid make_impulse_grid() const {
        double r = truncation_radius(problem);
        if (impulse_radius_override >= 0) r = std::min(r, impulse_radius_override);
        return ImpulseGrid(problem, r, impulse_points);
    }
};

inline Json run_config_to_json(const RunConfig& c) {
    Json j;
    j["problem"] = problem_to_json(c.problem);
    j["grid"] = {{"lo", cfg::vec_json(c.grid_lo, c.problem.dim)},
                 {"hi", cfg::vec_json(c.grid_hi, c.problem.dim)},
                 {"nodes", c.grid_nodes},
                 {"steps", c.grid_steps},
                 {"boundary", c.boundary == BoundaryPolicy::ValueExtrapolation
                                  ? "value-extrapolation"
                                  : "reflected-drift"}};
    j["impulse_grid"] = Json{{"points", c.impulse_points}};
    if (c.impulse_radius_override >= 0) j["impulse_grid"]["radius"] = c.impulse_radius_override;
    j["scheme"] = {{"stepping",
                    c.scheme.stepping == Scheme::Stepping::Implicit ? "implicit" : "explicit"},
                   {"policy_tol", c.scheme.policy_tol},
                   {"obstacle_cap", c.scheme.obstacle_cap},
                   {"rho", c.scheme.rho}};
    j["mc"] = {{"paths", c.mc_paths}, {"q", c.mc_q}, {"x0", cfg::vec_json(c.mc_x0, c.problem.dim)}};
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    return j;
}

inline RunConfig run_config_from_json(const Json& j) {
    RunConfig c;
    c.problem = problem_from_json(j.at("problem"));
    const Json& jg = j.at("grid");
    c.grid_lo = cfg::vec_parse(jg.at("lo"), c.problem.dim, "grid.lo");
    c.grid_hi = cfg::vec_parse(jg.at("hi"), c.problem.dim, "grid.hi");
    c.grid_nodes = jg.at("nodes").get<int>();
    c.grid_steps = jg.at("steps").get<int>();
    const std::string b = jg.value("boundary", std::string("value-extrapolation"));
    if (b == "value-extrapolation") c.boundary = BoundaryPolicy::ValueExtrapolation;
    else if (b == "reflected-drift") c.boundary = BoundaryPolicy::ReflectedDrift;
    else throw ConfigError("config: unknown boundary policy '" + b + "'");
    const Json& ji = j.at("impulse_grid");
    c.impulse_points = ji.at("points").get<int>();
    if (ji.contains("radius")) c.impulse_radius_override = ji.at("radius").get<double>();
    if (j.contains("scheme")) {
        const Json& js = j.at("scheme");
        const std::string st = js.value("stepping", std::string("implicit"));
        if (st == "implicit") c.scheme.stepping = Scheme::Stepping::Implicit;
        else if (st == "explicit") c.scheme.stepping = Scheme::Stepping::Explicit;
        else throw ConfigError("config: unknown stepping '" + st + "'");
        c.scheme.policy_tol = js.value("policy_tol", 1e-9);
        c.scheme.obstacle_cap = js.value("obstacle_cap", 60);
        c.scheme.rho = js.value("rho", 0.0);
    }
    if (j.contains("mc")) {
        const Json& jm = j.at("mc");
        c.mc_paths = jm.value("paths", 10000);
        c.mc_q = jm.value("q", 4);
        if (jm.contains("x0")) c.mc_x0 = cfg::vec_parse(jm.at("x0"), c.problem.dim, "mc.x0");
    }
    c.seed = j.value("seed", static_cast<std::uint64_t>(0));
    c.workers = j.value("workers", 1);
    c.scheme.workers = c.workers;
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config: parse failure in '" + path + "': " + e.what());
    }
    return run_config_from_json(j);
}

} // namespace hjbqvi
