#pragma once

// Run configuration documents.
//
//   # comment
//   [problem]   kind = ring | random | file, n, p, seed, path
//   [params]    gamma_s, gamma_m, gamma_p, kappa (required), zeta
//   [schedule]  t_max (required), pump_start | pump_start_ratio, pump_end | pump_end_ratio (required),
//               zeta_start, zeta_end
//   [run]       experiment, method, n_traj, n_steps, n_runs, eps_thr, seed, zeta_grid, t_max_list,
//               histogram_bins, histogram_lower, histogram_upper, record_stride, threads, out_dir
//
// *_ratio keys are in units of the pump threshold gamma gamma_p / kappa. Lists are comma separated.
// Unknown sections or keys, duplicates and malformed values are rejected with the line number.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cim/error.hpp"
#include "cim/experiments.hpp"
#include "cim/format.hpp"
#include "cim/model.hpp"

namespace cim {

struct RunConfig {
    ExperimentConfig experiment;
    std::string out_dir = ".";
    int threads = 0;  ///< 0 -> CIM_THREADS or hardware

    friend bool operator==(const RunConfig &, const RunConfig &) = default;
};

namespace detail {

struct ConfigEntry {
    std::string value;
    int line = 0;
    bool used = false;
};

using ConfigSection = std::map<std::string, ConfigEntry>;

class ConfigReader {
  public:
    explicit ConfigReader(std::string_view text) {
        static const char *const kSections[] = {"problem", "params", "schedule", "run"};
        std::string current;
        int line_no = 0;
        std::istringstream in{std::string(text)};
        std::string raw;
        while (std::getline(in, raw)) {
            ++line_no;
            std::string_view line = raw;
            if (const auto hash = line.find('#'); hash != std::string_view::npos) {
                line = line.substr(0, hash);
            }
            line = trim(line);
            if (line.empty()) {
                continue;
            }
            if (line.front() == '[') {
                if (line.back() != ']') {
                    fail(line_no, "malformed section header");
                }
                current = std::string(trim(line.substr(1, line.size() - 2)));
                bool known = false;
                for (const char *s : kSections) {
                    known = known || current == s;
                }
                if (!known) {
                    fail(line_no, "unknown section [" + current + "]");
                }
                if (!seen_.emplace(current).second) {
                    fail(line_no, "duplicate section [" + current + "]");
                }
                sections_[current];
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                fail(line_no, "expected 'key = value'");
            }
            if (current.empty()) {
                fail(line_no, "key outside of any section");
            }
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            if (key.empty()) {
                fail(line_no, "empty key");
            }
            auto &section = sections_[current];
            if (section.count(key) != 0) {
                fail(line_no, "duplicate key [" + current + "] " + key);
            }
            section[key] = {value, line_no, false};
        }
    }

    [[noreturn]] static void fail(int line, const std::string &message) {
        throw InputError("config line " + std::to_string(line) + ": " + message);
    }

    ConfigEntry *find(const std::string &section, const std::string &key) {
        auto s = sections_.find(section);
        if (s == sections_.end()) {
            return nullptr;
        }
        auto k = s->second.find(key);
        if (k == s->second.end()) {
            return nullptr;
        }
        k->second.used = true;
        return &k->second;
    }

    bool has(const std::string &section, const std::string &key) {
        auto s = sections_.find(section);
        return s != sections_.end() && s->second.count(key) != 0;
    }

    std::optional<double> real(const std::string &section, const std::string &key) {
        ConfigEntry *e = find(section, key);
        if (e == nullptr) {
            return std::nullopt;
        }
        double v = 0.0;
        if (!parse_double(e->value, v) || !std::isfinite(v)) {
            fail(e->line, "[" + section + "] " + key + ": expected a finite real number, got '" + e->value + "'");
        }
        return v;
    }

    double required_real(const std::string &section, const std::string &key) {
        const auto v = real(section, key);
        if (!v) {
            throw InputError("config: missing required field [" + section + "] " + key);
        }
        return *v;
    }

    template <class Int>
    std::optional<Int> integer(const std::string &section, const std::string &key) {
        ConfigEntry *e = find(section, key);
        if (e == nullptr) {
            return std::nullopt;
        }
        Int v{};
        if (!parse_integer(e->value, v)) {
            fail(e->line, "[" + section + "] " + key + ": expected an integer, got '" + e->value + "'");
        }
        return v;
    }

    std::optional<std::string> text(const std::string &section, const std::string &key) {
        ConfigEntry *e = find(section, key);
        if (e == nullptr) {
            return std::nullopt;
        }
        return e->value;
    }

    std::optional<std::vector<double>> real_list(const std::string &section, const std::string &key) {
        ConfigEntry *e = find(section, key);
        if (e == nullptr) {
            return std::nullopt;
        }
        std::vector<double> out;
        std::string_view rest = e->value;
        while (true) {
            const auto comma = rest.find(',');
            const std::string_view item = trim(rest.substr(0, comma));
            double v = 0.0;
            if (!parse_double(item, v) || !std::isfinite(v)) {
                fail(e->line, "[" + section + "] " + key + ": bad list element '" + std::string(item) + "'");
            }
            out.push_back(v);
            if (comma == std::string_view::npos) {
                break;
            }
            rest = rest.substr(comma + 1);
        }
        return out;
    }

    int line_of(const std::string &section, const std::string &key) {
        ConfigEntry *e = find(section, key);
        return e == nullptr ? 0 : e->line;
    }

    void reject_unused() const {
        for (const auto &[name, section] : sections_) {
            for (const auto &[key, entry] : section) {
                if (!entry.used) {
                    fail(entry.line, "unknown key [" + name + "] " + key);
                }
            }
        }
    }

  private:
    std::map<std::string, ConfigSection> sections_;
    std::set<std::string> seen_;
};

// Field-level check that names the offending key and line.
inline void check_field(ConfigReader &r, bool ok, const std::string &section, const std::string &key,
                        const std::string &message) {
    if (!ok) {
        const int line = r.line_of(section, key);
        if (line > 0) {
            ConfigReader::fail(line, "[" + section + "] " + key + ": " + message);
        }
        throw InputError("config: [" + section + "] " + key + ": " + message);
    }
}

}  // namespace detail

/// Parses and fully validates a configuration document.
inline RunConfig parse_config(std::string_view text) {
    detail::ConfigReader r(text);
    RunConfig rc;
    ExperimentConfig &cfg = rc.experiment;

    // [problem]
    if (const auto kind = r.text("problem", "kind")) {
        if (*kind == "ring") {
            cfg.problem.kind = ProblemKind::kRing;
        } else if (*kind == "random") {
            cfg.problem.kind = ProblemKind::kRandom;
        } else if (*kind == "file") {
            cfg.problem.kind = ProblemKind::kFile;
        } else {
            detail::check_field(r, false, "problem", "kind", "expected ring, random or file");
        }
    }
    if (const auto n = r.integer<std::size_t>("problem", "n")) {
        cfg.problem.n = *n;
    }
    if (const auto p = r.real("problem", "p")) {
        cfg.problem.p = *p;
    }
    if (const auto s = r.integer<std::uint64_t>("problem", "seed")) {
        cfg.problem.seed = *s;
    }
    if (const auto path = r.text("problem", "path")) {
        cfg.problem.path = *path;
    }
    detail::check_field(r, cfg.problem.p >= 0.0 && cfg.problem.p <= 1.0, "problem", "p", "must lie in [0, 1]");
    if (cfg.problem.kind == ProblemKind::kRing) {
        detail::check_field(r, cfg.problem.n >= 3, "problem", "n", "a ring needs at least 3 spins");
    } else if (cfg.problem.kind == ProblemKind::kRandom) {
        detail::check_field(r, cfg.problem.n >= 1, "problem", "n", "must be positive");
    } else {
        detail::check_field(r, !cfg.problem.path.empty(), "problem", "path", "required when kind = file");
    }

    // [params]
    CimParams &p = cfg.params;
    p.gamma_s = r.required_real("params", "gamma_s");
    p.gamma_m = r.required_real("params", "gamma_m");
    p.gamma_p = r.required_real("params", "gamma_p");
    p.kappa = r.required_real("params", "kappa");
    p.zeta = r.real("params", "zeta").value_or(0.0);
    detail::check_field(r, p.gamma_s >= 0.0, "params", "gamma_s", "must be nonnegative");
    detail::check_field(r, p.gamma_m >= 0.0, "params", "gamma_m", "must be nonnegative");
    detail::check_field(r, p.gamma_p > 0.0, "params", "gamma_p", "must be positive");
    detail::check_field(r, p.kappa > 0.0, "params", "kappa", "must be positive");
    detail::check_field(r, p.zeta >= 0.0, "params", "zeta", "must be nonnegative");
    detail::check_field(r, !(p.gamma_m == 0.0 && p.zeta > 0.0), "params", "gamma_m",
                        "feedback (zeta > 0) needs a measurement channel; gamma_m = 0 leaves zeta/sqrt(2 gamma_m) "
                        "undefined");
    const double threshold = pump_threshold(p);

    // [schedule]
    RampSchedule &s = cfg.schedule;
    s.t_max = r.required_real("schedule", "t_max");
    auto pump_value = [&](const std::string &key, bool required) -> double {
        const bool abs_given = r.has("schedule", key);
        const bool ratio_given = r.has("schedule", key + "_ratio");
        if (abs_given && ratio_given) {
            detail::check_field(r, false, "schedule", key + "_ratio", "conflicts with " + key + "; give only one");
        }
        if (ratio_given) {
            return *r.real("schedule", key + "_ratio") * threshold;
        }
        if (abs_given) {
            return *r.real("schedule", key);
        }
        if (required) {
            throw InputError("config: missing required field [schedule] " + key + " (or " + key + "_ratio)");
        }
        return 0.0;
    };
    s.pump_start = pump_value("pump_start", false);
    s.pump_end = pump_value("pump_end", true);
    s.zeta_start = r.real("schedule", "zeta_start").value_or(p.zeta);
    s.zeta_end = r.real("schedule", "zeta_end").value_or(p.zeta);
    detail::check_field(r, s.t_max > 0.0, "schedule", "t_max", "must be positive");
    detail::check_field(r, s.pump_start >= 0.0, "schedule", "pump_start", "must be nonnegative");
    detail::check_field(r, s.pump_end >= 0.0, "schedule", "pump_end", "must be nonnegative");
    detail::check_field(r, s.zeta_start >= 0.0, "schedule", "zeta_start", "must be nonnegative");
    detail::check_field(r, s.zeta_end >= 0.0, "schedule", "zeta_end", "must be nonnegative");
    detail::check_field(r, p.gamma_m > 0.0 || (s.zeta_start == 0.0 && s.zeta_end == 0.0), "schedule", "zeta_end",
                        "a feedback ramp needs gamma_m > 0");

    // [run]
    if (const auto e = r.text("run", "experiment")) {
        detail::check_field(r, *e == "a" || *e == "b" || *e == "c", "run", "experiment", "expected a, b or c");
        cfg.experiment = *e;
    }
    if (const auto m = r.text("run", "method")) {
        if (*m == "total") {
            cfg.method = Method::kTotal;
        } else if (*m == "conditional") {
            cfg.method = Method::kConditional;
        } else {
            detail::check_field(r, false, "run", "method", "expected total or conditional");
        }
    }
    cfg.n_traj = r.integer<std::size_t>("run", "n_traj").value_or(cfg.n_traj);
    cfg.n_steps = r.integer<std::size_t>("run", "n_steps").value_or(cfg.n_steps);
    cfg.n_runs = r.integer<std::size_t>("run", "n_runs").value_or(cfg.n_runs);
    cfg.eps_thr = r.real("run", "eps_thr").value_or(cfg.eps_thr);
    cfg.seed = r.integer<std::uint64_t>("run", "seed").value_or(cfg.seed);
    cfg.zeta_grid = r.real_list("run", "zeta_grid").value_or(std::vector<double>{});
    cfg.t_max_list = r.real_list("run", "t_max_list").value_or(std::vector<double>{});
    cfg.histogram.bins = r.integer<std::size_t>("run", "histogram_bins").value_or(0);
    const auto lower = r.real("run", "histogram_lower");
    const auto upper = r.real("run", "histogram_upper");
    detail::check_field(r, lower.has_value() == upper.has_value(), "run", lower ? "histogram_lower" : "histogram_upper",
                        "histogram_lower and histogram_upper must be given together");
    if (lower) {
        cfg.histogram.auto_range = false;
        cfg.histogram.lower = *lower;
        cfg.histogram.upper = *upper;
        detail::check_field(r, *upper > *lower, "run", "histogram_upper", "must exceed histogram_lower");
        detail::check_field(r, cfg.histogram.bins > 0, "run", "histogram_bins",
                            "an explicit range needs histogram_bins > 0");
    }
    cfg.record_stride = r.integer<std::size_t>("run", "record_stride").value_or(0);
    rc.threads = r.integer<int>("run", "threads").value_or(0);
    rc.out_dir = r.text("run", "out_dir").value_or(".");

    detail::check_field(r, cfg.n_traj >= 1, "run", "n_traj", "must be positive");
    detail::check_field(r, cfg.n_steps >= 1 && cfg.n_steps < 0xFFFFFFFFu, "run", "n_steps",
                        "must be positive and below 2^32 - 1");
    detail::check_field(r, cfg.n_runs >= 1, "run", "n_runs", "must be positive");
    detail::check_field(r, cfg.eps_thr > 0.0 && cfg.eps_thr < 1.0, "run", "eps_thr", "must lie in (0, 1)");
    detail::check_field(r, rc.threads >= 0, "run", "threads", "must be nonnegative");
    for (double z : cfg.zeta_grid) {
        detail::check_field(r, z >= 0.0, "run", "zeta_grid", "entries must be nonnegative");
        detail::check_field(r, z == 0.0 || p.gamma_m > 0.0, "run", "zeta_grid", "feedback needs gamma_m > 0");
    }
    for (double t : cfg.t_max_list) {
        detail::check_field(r, t > 0.0, "run", "t_max_list", "entries must be positive");
    }
    if (cfg.method == Method::kConditional) {
        detail::check_field(r, p.gamma_m > 0.0, "params", "gamma_m",
                            "the conditional method needs gamma_m > 0: the homodyne record is what the weights are "
                            "conditioned on, and f = zeta/sqrt(2 gamma_m) is undefined otherwise");
        detail::check_field(r, cfg.experiment != "c", "run", "method", "experiment c supports only the total method");
    }
    r.reject_unused();
    return rc;
}

namespace detail {

inline std::string join_reals(const std::vector<double> &values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        out += format_double(values[i]);
    }
    return out;
}

}  // namespace detail

/// Canonical document; parse_config(serialize_config(c)) == c for every valid c.
inline std::string serialize_config(const RunConfig &rc) {
    const ExperimentConfig &cfg = rc.experiment;
    std::ostringstream os;
    os << "[problem]\n";
    switch (cfg.problem.kind) {
    case ProblemKind::kRing:
        os << "kind = ring\n";
        break;
    case ProblemKind::kRandom:
        os << "kind = random\n";
        break;
    case ProblemKind::kFile:
        os << "kind = file\n";
        break;
    }
    os << "n = " << cfg.problem.n << "\n";
    os << "p = " << format_double(cfg.problem.p) << "\n";
    os << "seed = " << cfg.problem.seed << "\n";
    if (!cfg.problem.path.empty()) {
        os << "path = " << cfg.problem.path << "\n";
    }
    os << "\n[params]\n";
    os << "gamma_s = " << format_double(cfg.params.gamma_s) << "\n";
    os << "gamma_m = " << format_double(cfg.params.gamma_m) << "\n";
    os << "gamma_p = " << format_double(cfg.params.gamma_p) << "\n";
    os << "kappa = " << format_double(cfg.params.kappa) << "\n";
    os << "zeta = " << format_double(cfg.params.zeta) << "\n";
    os << "\n[schedule]\n";
    os << "t_max = " << format_double(cfg.schedule.t_max) << "\n";
    os << "pump_start = " << format_double(cfg.schedule.pump_start) << "\n";
    os << "pump_end = " << format_double(cfg.schedule.pump_end) << "\n";
    os << "zeta_start = " << format_double(cfg.schedule.zeta_start) << "\n";
    os << "zeta_end = " << format_double(cfg.schedule.zeta_end) << "\n";
    os << "\n[run]\n";
    os << "experiment = " << cfg.experiment << "\n";
    os << "method = " << (cfg.method == Method::kTotal ? "total" : "conditional") << "\n";
    os << "n_traj = " << cfg.n_traj << "\n";
    os << "n_steps = " << cfg.n_steps << "\n";
    os << "n_runs = " << cfg.n_runs << "\n";
    os << "eps_thr = " << format_double(cfg.eps_thr) << "\n";
    os << "seed = " << cfg.seed << "\n";
    if (!cfg.zeta_grid.empty()) {
        os << "zeta_grid = " << detail::join_reals(cfg.zeta_grid) << "\n";
    }
    if (!cfg.t_max_list.empty()) {
        os << "t_max_list = " << detail::join_reals(cfg.t_max_list) << "\n";
    }
    os << "histogram_bins = " << cfg.histogram.bins << "\n";
    if (!cfg.histogram.auto_range) {
        os << "histogram_lower = " << format_double(cfg.histogram.lower) << "\n";
        os << "histogram_upper = " << format_double(cfg.histogram.upper) << "\n";
    }
    os << "record_stride = " << cfg.record_stride << "\n";
    os << "threads = " << rc.threads << "\n";
    os << "out_dir = " << rc.out_dir << "\n";
    return os.str();
}

}  // namespace cim
