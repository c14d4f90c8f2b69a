/**
 * @file experiment.hpp
 * @brief Configuration, epsilon sweeps and their on-disk reports.
 *
 * An experiment solves one parameter set for a decreasing list of eps values
 * from a common seed set and writes report.csv (one row per seed and eps),
 * summary.json, the cached radial profile and, optionally, KGMF snapshots.
 */
#pragma once

#include "kgm/analysis.hpp"
#include "kgm/energy.hpp"
#include "kgm/errors.hpp"
#include "kgm/grid.hpp"
#include "kgm/ground_state.hpp"
#include "kgm/minimizer.hpp"
#include "kgm/snapshot.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgm {

struct ExperimentConfig {
    SystemKind system = SystemKind::KGM;
    double a = 2.0;
    double q = 1.0;
    double omega = 0.5;
    double p = 4.0;
    std::vector<double> eps_list{2.0 * std::numbers::pi / 16.0};
    std::size_t grid_n = 48;
    double length = 2.0 * std::numbers::pi;
    std::optional<std::size_t> seed_lattice{2}; ///< m: m^3 seeds on a regular lattice
    std::vector<Point> seeds;                   ///< explicit seeds, used when seed_lattice is empty
    SolveOptions solver{};
    double profile_tol = 1e-10;
    double peak_threshold = 0.5;
    double cluster_dist_factor = 1.0; ///< barycenters closer than factor * eps are linked
    double cluster_energy_tol = 1e-6; ///< relative energy tolerance for linking
    unsigned workers = 1;
    std::filesystem::path output_dir = "kgm_out";
    bool emit_fields = false;
    bool verbose = false;

    SystemParams params(double eps) const {
        return system == SystemKind::KGM ? SystemParams::kgm(eps, a, q, omega, p) : SystemParams::sm(eps, q, omega, p);
    }

    void validate() const {
        auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
        if (grid_n < 16 || grid_n % 2 != 0) fail("grid_n must be even and >= 16");
        if (!(length > 0.0)) fail("length must be positive");
        if (eps_list.empty()) fail("eps list is empty");
        for (std::size_t i = 0; i < eps_list.size(); ++i) {
            if (!(eps_list[i] < length / 8.0)) fail("every eps must be below L/8");
            if (i > 0 && !(eps_list[i] < eps_list[i - 1])) fail("eps list must be strictly decreasing");
            params(eps_list[i]).validate();
        }
        if (seed_lattice && *seed_lattice < 1) fail("seed lattice size must be >= 1");
        if (!(profile_tol > 0.0)) fail("profile_tol must be positive");
        solver.validate();
    }
};

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_number(const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: not a number: '" + text + "'");
    }
    if (used != text.size()) throw std::invalid_argument("config: not a number: '" + text + "'");
    return v;
}

} // namespace detail

/**
 * Parses a length such as "6.28", "2pi" or "pi".
 */
inline double parse_length(const std::string& raw) {
    const std::string text = detail::trim(raw);
    if (text.size() >= 2 && text.substr(text.size() - 2) == "pi") {
        const std::string head = detail::trim(text.substr(0, text.size() - 2));
        const double factor = head.empty() ? 1.0 : detail::parse_number(head.back() == '*' ? detail::trim(head.substr(0, head.size() - 1)) : head);
        return factor * std::numbers::pi;
    }
    return detail::parse_number(text);
}

/// Parses an eps value: a plain number or "L/k", meaning length / k.
inline double parse_eps(const std::string& raw, double length) {
    const std::string text = detail::trim(raw);
    if (text.size() > 2 && text[0] == 'L' && text[1] == '/') return length / detail::parse_number(detail::trim(text.substr(2)));
    return detail::parse_number(text);
}

inline std::vector<Point> parse_seed_list(const std::string& text) {
    std::vector<Point> seeds;
    for (const auto& item : detail::split(text, ';')) {
        const auto c = detail::split(item, ',');
        if (c.size() != 3) throw std::invalid_argument("config: seed '" + item + "' needs three coordinates");
        seeds.push_back({detail::parse_number(c[0]), detail::parse_number(c[1]), detail::parse_number(c[2])});
    }
    return seeds;
}

/**
 * Applies one key = value setting. Values that depend on the box length
 * (eps given as L/k) use the length set so far, so "length" should precede
 * "eps_list" in files; apply_config_text handles that ordering itself.
 */
inline void apply_setting(ExperimentConfig& cfg, const std::string& key_raw, const std::string& value_raw) {
    const std::string key = detail::trim(key_raw);
    const std::string value = detail::trim(value_raw);
    auto as_size = [&](const std::string& v) {
        const double d = detail::parse_number(v);
        if (d < 0 || d != std::floor(d)) throw std::invalid_argument("config: '" + key + "' must be a nonnegative integer");
        return static_cast<std::size_t>(d);
    };
    auto as_bool = [&](const std::string& v) {
        if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
        if (v == "0" || v == "false" || v == "no" || v == "off") return false;
        throw std::invalid_argument("config: '" + key + "' must be a boolean");
    };
    if (key == "system") {
        std::string v;
        for (char ch : value) v.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
        if (v == "KGM") cfg.system = SystemKind::KGM;
        else if (v == "SM") cfg.system = SystemKind::SM;
        else throw std::invalid_argument("config: system must be KGM or SM");
    } else if (key == "a") cfg.a = detail::parse_number(value);
    else if (key == "q") cfg.q = detail::parse_number(value);
    else if (key == "omega") cfg.omega = detail::parse_number(value);
    else if (key == "p") cfg.p = detail::parse_number(value);
    else if (key == "length") cfg.length = parse_length(value);
    else if (key == "grid_n") cfg.grid_n = as_size(value);
    else if (key == "eps_list") {
        cfg.eps_list.clear();
        for (const auto& item : detail::split(value, ',')) cfg.eps_list.push_back(parse_eps(item, cfg.length));
    } else if (key == "seed_lattice") {
        cfg.seed_lattice = as_size(value);
    } else if (key == "seeds") {
        cfg.seeds = parse_seed_list(value);
        cfg.seed_lattice.reset();
    } else if (key == "max_iters") cfg.solver.max_iters = as_size(value);
    else if (key == "grad_tol") cfg.solver.grad_tol = detail::parse_number(value);
    else if (key == "step0") cfg.solver.step0 = detail::parse_number(value);
    else if (key == "backtrack") cfg.solver.backtrack = detail::parse_number(value);
    else if (key == "profile_tol") cfg.profile_tol = detail::parse_number(value);
    else if (key == "peak_threshold") cfg.peak_threshold = detail::parse_number(value);
    else if (key == "cluster_dist_factor") cfg.cluster_dist_factor = detail::parse_number(value);
    else if (key == "cluster_energy_tol") cfg.cluster_energy_tol = detail::parse_number(value);
    else if (key == "workers") cfg.workers = static_cast<unsigned>(as_size(value));
    else if (key == "output_dir" || key == "out") cfg.output_dir = value;
    else if (key == "emit_fields") cfg.emit_fields = as_bool(value);
    else if (key == "verbose") cfg.verbose = as_bool(value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

/// Parses "key = value" lines ('#' starts a comment) into cfg.
inline void apply_config_text(ExperimentConfig& cfg, std::istream& is) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (detail::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not 'key = value'");
        entries.emplace_back(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    // The box length must be known before eps values written as L/k are read.
    for (const auto& [k, v] : entries)
        if (k == "length") apply_setting(cfg, k, v);
    for (const auto& [k, v] : entries)
        if (k != "length") apply_setting(cfg, k, v);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file " + path.string());
    ExperimentConfig cfg;
    apply_config_text(cfg, is);
    return cfg;
}

/**
 * m^3 seeds on the regular lattice with node coordinates
 * floor((2i+1) n / (2m)) h, i.e. cell centres snapped to grid nodes.
 */
inline std::vector<Point> lattice_seeds(std::size_t m, const TorusGrid& grid) {
    std::vector<Point> seeds;
    const std::size_t n = grid.n();
    std::vector<double> coord(m);
    for (std::size_t i = 0; i < m; ++i)
        coord[i] = static_cast<double>(((2 * i + 1) * n) / (2 * m)) * grid.spacing();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < m; ++k) seeds.push_back({coord[i], coord[j], coord[k]});
    return seeds;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> cols{
        "seed_id", "eps",         "status", "iterations", "energy", "t_projection", "grad_norm",
        "nehari_residual", "bary_x", "bary_y", "bary_z",     "peak_x", "peak_y",       "peak_z",
        "peak_value", "num_peaks", "maxval_margin", "profile_sup_error", "cluster_id"};
    return cols;
}

namespace detail {

/// Shortest text that reads back to the same double; nan for NaN.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

} // namespace detail

inline std::string report_header() {
    std::string line;
    for (const auto& c : report_columns()) line += (line.empty() ? "" : ",") + c;
    return line + "\n";
}

inline std::string report_row(const SolutionRecord& r) {
    using detail::fmt;
    std::ostringstream os;
    os << r.seed_id << ',' << fmt(r.eps) << ',' << to_string(r.status) << ',' << r.iterations << ',' << fmt(r.energy)
       << ',' << fmt(r.t_at_projection) << ',' << fmt(r.grad_norm) << ',' << fmt(r.nehari_residual) << ','
       << fmt(r.barycenter[0]) << ',' << fmt(r.barycenter[1]) << ',' << fmt(r.barycenter[2]) << ','
       << fmt(r.peak_point[0]) << ',' << fmt(r.peak_point[1]) << ',' << fmt(r.peak_point[2]) << ','
       << fmt(r.peak_value) << ',' << r.num_peaks << ',' << fmt(r.maxval_margin) << ',' << fmt(r.profile_sup_error)
       << ',' << r.cluster_id << '\n';
    return os.str();
}

struct EpsSummary {
    double eps = 0.0;
    std::vector<SolutionRecord> records;
    std::vector<SolveResult> results; ///< kept only when requested
    double best_energy = std::numeric_limits<double>::quiet_NaN();
    std::size_t clusters = 0;
    std::size_t converged = 0;
    std::size_t certified = 0;
};

struct ExperimentResult {
    RadialProfile profile;
    std::vector<Point> seeds;
    std::vector<EpsSummary> sweep;
    int exit_code = 0;
};

inline std::filesystem::path profile_cache_path(const std::filesystem::path& dir, double c0, double p, double tol) {
    return dir / ("profile_c0_" + detail::fmt(c0) + "_p_" + detail::fmt(p) + "_tol_" + detail::fmt(tol) + ".txt");
}

/**
 * Loads the radial profile for (c0, p, tol) from dir, computing and caching
 * it first if absent. The profile is always taken from the cached text so
 * that fresh and cached runs see identical values.
 */
inline RadialProfile cached_profile(const std::filesystem::path& dir, double c0, double p, double tol) {
    const auto path = profile_cache_path(dir, c0, p, tol);
    if (!std::filesystem::exists(path)) {
        const RadialProfile fresh = shoot_ground_state(c0, p, tol);
        const auto tmp = path.string() + ".tmp";
        {
            std::ofstream os(tmp);
            if (!os) throw IoError("cannot write profile cache " + tmp);
            write_profile(fresh, os);
            if (!os) throw IoError("cannot write profile cache " + tmp);
        }
        std::filesystem::rename(tmp, path);
    }
    std::ifstream is(path);
    if (!is) throw IoError("cannot read profile cache " + path.string());
    return read_profile(is);
}

inline nlohmann::ordered_json summary_json(const ExperimentConfig& cfg, const ExperimentResult& res) {
    nlohmann::ordered_json j;
    j["system"] = to_string(cfg.system);
    j["a"] = cfg.a;
    j["q"] = cfg.q;
    j["omega"] = cfg.omega;
    j["p"] = cfg.p;
    j["c0"] = cfg.params(cfg.eps_list.front()).c0();
    j["grid_n"] = cfg.grid_n;
    j["length"] = cfg.length;
    j["num_seeds"] = res.seeds.size();
    j["m_inf"] = res.profile.m_inf;
    j["u0"] = res.profile.u0;
    j["r95"] = mass_radius(res.profile, 0.95);
    auto arr = [&](auto get) {
        auto a = nlohmann::ordered_json::array();
        for (const auto& s : res.sweep) a.push_back(get(s));
        return a;
    };
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
    const double n_seeds = static_cast<double>(std::max<std::size_t>(res.seeds.size(), 1));
    j["eps"] = arr([&](const EpsSummary& s) { return num(s.eps); });
    j["best_energy"] = arr([&](const EpsSummary& s) { return num(s.best_energy); });
    j["best_energy_minus_m_inf"] = arr([&](const EpsSummary& s) { return num(s.best_energy - res.profile.m_inf); });
    j["cluster_count"] = arr([&](const EpsSummary& s) { return s.clusters; });
    j["converged_fraction"] = arr([&](const EpsSummary& s) { return num(static_cast<double>(s.converged) / n_seeds); });
    j["certified_fraction"] = arr([&](const EpsSummary& s) { return num(static_cast<double>(s.certified) / n_seeds); });
    j["exit_code"] = res.exit_code;
    return j;
}

/**
 * Runs the sweep described by cfg. Diagnostics go to `log`. Stage failures
 * (profile, output files) set a nonzero exit code and stop the sweep;
 * results written so far are kept. Failed seeds are reported as rows with
 * status Failed and do not change the exit code.
 *
 * When keep_results is set the raw solve results are retained in the return
 * value for in-process inspection.
 */
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream& log, bool keep_results = false) {
    cfg.validate();
    ExperimentResult res;
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) {
        log << "error: cannot create output directory " << cfg.output_dir << ": " << ec.message() << "\n";
        res.exit_code = 2;
        return res;
    }

    const SystemParams base = cfg.params(cfg.eps_list.front());
    try {
        res.profile = cached_profile(cfg.output_dir, base.c0(), base.p, cfg.profile_tol);
    } catch (const std::exception& e) {
        log << "error: radial profile stage failed: " << e.what() << "\n";
        res.exit_code = 3;
        return res;
    }

    const GridPtr grid = make_grid(cfg.grid_n, cfg.length);
    res.seeds = cfg.seed_lattice ? lattice_seeds(*cfg.seed_lattice, *grid) : cfg.seeds;

    const fs::path report_path = cfg.output_dir / "report.csv";
    std::ofstream report(report_path, std::ios::trunc);
    if (!report) {
        log << "error: cannot write " << report_path << "\n";
        res.exit_code = 4;
        return res;
    }
    report << report_header() << std::flush;

    auto write_summary = [&] {
        std::ofstream js(cfg.output_dir / "summary.json", std::ios::trunc);
        js << summary_json(cfg, res).dump(2) << "\n";
        if (!js) {
            log << "error: cannot write summary.json\n";
            res.exit_code = 5;
        }
    };

    for (std::size_t eps_index = 0; eps_index < cfg.eps_list.size(); ++eps_index) {
        const double eps = cfg.eps_list[eps_index];
        const SystemParams params = cfg.params(eps);
        EpsSummary summary;
        summary.eps = eps;
        SolveOptions opts = cfg.solver;
        opts.log = cfg.verbose ? &log : nullptr;
        std::vector<SolveResult> results;
        try {
            results = multi_start(res.seeds, params, res.profile, grid, opts, cfg.workers);
        } catch (const std::exception& e) {
            log << "error: solve stage failed at eps = " << detail::fmt(eps) << ": " << e.what() << "\n";
            res.exit_code = 6;
            break;
        }
        for (const auto& r : results) {
            summary.records.push_back(analyze_solution(r, params, res.profile, cfg.peak_threshold));
            if (r.status == SolveStatus::Failed) log << "seed " << r.seed_id << " failed: " << r.error << "\n";
        }
        double best = std::numeric_limits<double>::infinity();
        for (const auto& r : summary.records) {
            if (r.status == SolveStatus::Converged) {
                ++summary.converged;
                if (r.certified()) ++summary.certified;
            }
            if (std::isfinite(r.energy)) best = std::min(best, r.energy);
        }
        if (std::isfinite(best)) summary.best_energy = best;
        const double energy_tol = cfg.cluster_energy_tol * std::max(1.0, std::abs(summary.best_energy));
        cluster_solutions(summary.records, *grid, cfg.cluster_dist_factor * eps,
                          std::isfinite(energy_tol) ? energy_tol : 0.0);
        summary.clusters = cluster_count(summary.records);
        for (const auto& r : summary.records) report << report_row(r);
        report.flush();

        if (cfg.emit_fields) {
            for (const auto& r : results) {
                if (!r.point) continue;
                char name[96];
                std::snprintf(name, sizeof name, "field_eps%zu_seed%zu.kgmf",
                              eps_index, r.seed_id);
                try {
                    save_field(r.point->u, eps, cfg.output_dir / name);
                } catch (const std::exception& e) {
                    log << "error: " << e.what() << "\n";
                    res.exit_code = 7;
                }
            }
        }
        if (keep_results) summary.results = std::move(results);
        res.sweep.push_back(std::move(summary));
        write_summary();
    }
    if (!report) {
        log << "error: writing report.csv failed\n";
        res.exit_code = 4;
    }
    write_summary();
    return res;
}

} // namespace kgm
