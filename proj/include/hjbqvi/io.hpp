#pragma once

//
// Output plumbing: CSV writers with a fixed number format (round-trip exact,
// byte-stable across runs and worker counts), verdict records, and the run
// manifest. The manifest's timing field is the only output that varies
// between identical runs.
//

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hjbqvi/game.hpp"
#include "hjbqvi/solver.hpp"

namespace hjbqvi {

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open output file " + path.string());
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

// One CSV per value layer: coordinates, value, control, act flag, impulse.
inline void write_layer_csv(const std::filesystem::path& path, const ProblemSpec& spec,
                            const Solution& sol, int k) {
    CsvWriter csv(path);
    const Grid& g = *sol.grid;
    std::vector<std::string> head{"x0"};
    if (g.dim() == 2) head.push_back("x1");
    head.insert(head.end(), {"u", "b0"});
    if (spec.dim_b == 2) head.push_back("b1");
    head.emplace_back("act");
    head.emplace_back("z0");
    if (g.dim() == 2) head.push_back("z1");
    csv.row(head);
    const auto bs = spec.control_points();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Pt x = g.node(i);
        std::vector<std::string> cells{fmt_double(x[0])};
        if (g.dim() == 2) cells.push_back(fmt_double(x[1]));
        cells.push_back(fmt_double(sol.layer(k)[i]));
        const Pt b = bs[static_cast<std::size_t>(sol.control_idx[static_cast<std::size_t>(k)][i])];
        cells.push_back(fmt_double(b[0]));
        if (spec.dim_b == 2) cells.push_back(fmt_double(b[1]));
        cells.push_back(sol.act[static_cast<std::size_t>(k)][i] ? "1" : "0");
        cells.push_back(fmt_double(sol.zstar[static_cast<std::size_t>(k)][i][0]));
        if (g.dim() == 2) cells.push_back(fmt_double(sol.zstar[static_cast<std::size_t>(k)][i][1]));
        csv.row(cells);
    }
}

// Plot data: (x, u(0,x)) plus the act region of the first layer.
inline void write_plot_csv(const std::filesystem::path& path, const Solution& sol) {
    CsvWriter csv(path);
    const Grid& g = *sol.grid;
    csv.row({"x0", "u0", "act"});
    for (std::size_t i = 0; i < g.size(); ++i) {
        csv.row({fmt_double(g.node(i)[0]), fmt_double(sol.layer(0)[i]),
                 sol.act[0][i] ? "1" : "0"});
    }
}

inline void write_path_csv(const std::filesystem::path& path, const SamplePath& p, int dim) {
    CsvWriter csv(path);
    std::vector<std::string> head{"k", "t", "x_pre0"};
    if (dim == 2) head.push_back("x_pre1");
    head.push_back("x_post0");
    if (dim == 2) head.push_back("x_post1");
    head.insert(head.end(), {"b0", "z0", "f_acc", "K_acc"});
    csv.row(head);
    double f_acc = 0, k_acc = 0;
    std::size_t imp = 0;
    for (const PathStep& s : p.steps) {
        std::string z = "0";
        while (imp < p.impulses.size() && p.impulses[imp].k == s.k) {
            z = fmt_double(p.impulses[imp].z[0]);
            k_acc += p.impulses[imp].cost;
            ++imp;
        }
        f_acc += s.f_term;
        std::vector<std::string> cells{std::to_string(s.k), fmt_double(s.t),
                                       fmt_double(s.x_pre[0])};
        if (dim == 2) cells.push_back(fmt_double(s.x_pre[1]));
        cells.push_back(fmt_double(s.x_post[0]));
        if (dim == 2) cells.push_back(fmt_double(s.x_post[1]));
        cells.insert(cells.end(),
                     {fmt_double(s.b[0]), z, fmt_double(f_acc), fmt_double(k_acc)});
        csv.row(cells);
    }
}

struct Verdict {
    std::string check;
    bool pass = false;
    std::string worst_node;
    double margin = 0;
};

inline void write_verdicts(const std::filesystem::path& path, const std::vector<Verdict>& vs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file " + path.string());
    for (const Verdict& v : vs) {
        nlohmann::json j{{"check", v.check},
                         {"pass", v.pass},
                         {"worst_node", v.worst_node},
                         {"margin", v.margin}};
        out << j.dump() << '\n';
    }
}

struct RunManifest {
    std::string command;
    std::string config_hash; // hex FNV-1a of the canonical config dump
    std::uint64_t seed = 0;
    std::string tool_version;
    double timing_seconds = 0;
    std::vector<std::string> outputs;
};

inline void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
    nlohmann::json j{{"command", m.command},       {"config_hash", m.config_hash},
                     {"seed", m.seed},             {"tool_version", m.tool_version},
                     {"timing_seconds", m.timing_seconds}, {"outputs", m.outputs}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file " + path.string());
    out << j.dump(2) << '\n';
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

} // namespace hjbqvi
