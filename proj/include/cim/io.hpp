#pragma once

// Result serialization. Every CSV starts with '#' lines carrying the resolved configuration and
// seed; JSON documents carry the same text under "config". Floating values use shortest
// round-trip formatting, so equal results give byte-identical files.

#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cim/config.hpp"
#include "cim/density_oracle.hpp"
#include "cim/experiments.hpp"
#include "cim/format.hpp"
#include "cim/sde_conditional.hpp"
#include "cim/sde_total.hpp"

namespace cim {

using Json = nlohmann::ordered_json;

/// Configuration text used for provenance. Runtime-only settings (thread count, output
/// directory) are dropped so that outputs do not depend on them.
inline std::string provenance_text(const RunConfig &rc) {
    RunConfig copy = rc;
    copy.threads = 0;
    copy.out_dir = ".";
    return serialize_config(copy);
}

inline void write_provenance(std::ostream &os, const std::string &tool, const std::string &config_text) {
    os << "# " << tool << "\n";
    std::istringstream in(config_text);
    std::string line;
    while (std::getline(in, line)) {
        os << "# " << line << "\n";
    }
}

/// Columns: t, mode, mean_re_x, mean_im_x, std_err.
inline void write_step_csv(std::ostream &os, const std::vector<StepRecord> &steps) {
    os << "t,mode,mean_re_x,mean_im_x,std_err\n";
    for (const StepRecord &rec : steps) {
        for (std::size_t i = 0; i < rec.mean_x.size(); ++i) {
            os << format_double(rec.t) << ',' << i << ',' << format_double(rec.mean_x[i].real()) << ','
               << format_double(rec.mean_x[i].imag()) << ',' << format_double(rec.std_err[i]) << '\n';
        }
    }
}

/// Columns: t, mean, stddev, std_err.
inline void write_energy_csv(std::ostream &os, const std::vector<EnergyRecord> &energies) {
    os << "t,mean_energy,stddev,std_err\n";
    for (const EnergyRecord &e : energies) {
        os << format_double(e.t) << ',' << format_double(e.mean) << ',' << format_double(e.stddev) << ','
           << format_double(e.std_err) << '\n';
    }
}

/// Columns: trajectory, mode, re_alpha, im_alpha, re_beta, im_beta.
inline void write_state_table(std::ostream &os, const PhaseEnsemble &state) {
    os << "trajectory,mode,re_alpha,im_alpha,re_beta,im_beta\n";
    for (std::size_t k = 0; k < state.n_traj; ++k) {
        for (std::size_t i = 0; i < state.n_modes; ++i) {
            const cplx a = state.alpha[k * state.n_modes + i];
            const cplx b = state.beta[k * state.n_modes + i];
            os << k << ',' << i << ',' << format_double(a.real()) << ',' << format_double(a.imag()) << ','
               << format_double(b.real()) << ',' << format_double(b.imag()) << '\n';
        }
    }
}

/// Columns: t, mode, mean_re_x, mean_im_x, w_min_ratio, w_max_ratio, breed_count; then a final
/// "# final_spins=<+-...> energy=<E>" line.
inline void write_conditional_csv(std::ostream &os, const ConditionalRunRecord &run) {
    os << "t,mode,mean_re_x,mean_im_x,w_min_ratio,w_max_ratio,breed_count\n";
    for (const ConditionalRecord &rec : run.trace) {
        for (std::size_t i = 0; i < rec.mean_x.size(); ++i) {
            os << format_double(rec.t) << ',' << i << ',' << format_double(rec.mean_x[i].real()) << ','
               << format_double(rec.mean_x[i].imag()) << ',' << format_double(rec.weights.min_ratio) << ','
               << format_double(rec.weights.max_ratio) << ',' << rec.breed_count << '\n';
        }
    }
    os << "# final_spins=" << run.spins.to_string() << " energy=" << format_double(run.energy) << '\n';
}

inline Json histogram_json(const std::vector<HistogramBin> &bins) {
    Json out = Json::array();
    for (const HistogramBin &b : bins) {
        out.push_back({{"lower", b.lower}, {"upper", b.upper}, {"mass", b.mass}});
    }
    return out;
}

inline Json summary_json(const RunSummary &summary, const std::string &config_text) {
    Json j;
    j["experiment"] = summary.experiment;
    j["config"] = config_text;
    if (summary.has_ground) {
        j["ground_energy"] = summary.ground_energy;
    }
    Json grid = Json::array();
    for (const GridPoint &g : summary.grid) {
        grid.push_back({{"zeta", g.zeta},
                        {"t_max", g.t_max},
                        {"success", g.success.value},
                        {"success_std_err", g.success.std_err},
                        {"samples", g.samples},
                        {"mean_energy", g.mean_energy}});
    }
    j["grid"] = grid;
    if (!summary.energy_trace.empty()) {
        Json trace = Json::array();
        for (const EnergyRecord &e : summary.energy_trace) {
            trace.push_back({{"t", e.t}, {"mean", e.mean}, {"stddev", e.stddev}, {"std_err", e.std_err}});
        }
        j["energy_trace"] = trace;
    }
    if (!summary.histogram.empty()) {
        j["histogram"] = histogram_json(summary.histogram);
    }
    return j;
}

inline Json oracle_json(const std::vector<OracleRecord> &records) {
    Json out = Json::array();
    for (const OracleRecord &r : records) {
        Json modes = Json::array();
        for (const QuadratureMoments &m : r.moments) {
            modes.push_back({{"x", m.x}, {"x2", m.x2}, {"n", m.n}});
        }
        out.push_back({{"t", r.t},
                       {"moments", modes},
                       {"trace_error", r.trace_error},
                       {"positivity_margin", r.positivity_margin}});
    }
    return out;
}

}  // namespace cim
