// Command-line driver: cim <subcommand> [options]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cim/cim.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;
    std::string out = ".";
};

void add_common(CLI::App *sub, Common &c) {
    sub->add_option("--seed", c.seed, "Master seed (overrides the config)")->each([&c](const std::string &) {
        c.seed_given = true;
    });
    sub->add_option("--threads", c.threads, "Worker threads (default: CIM_THREADS or hardware)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out", c.out, "Output directory");
}

std::string read_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw cim::InputError("cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ofstream open_output(const std::string &dir, const std::string &name) {
    fs::create_directories(dir);
    const fs::path path = fs::path(dir) / name;
    std::ofstream out(path);
    if (!out) {
        throw cim::InputError("cannot write '" + path.string() + "'");
    }
    return out;
}

cim::RunConfig load_config(const std::string &path, const Common &c) {
    cim::RunConfig rc = cim::parse_config(read_file(path));
    if (c.seed_given) {
        rc.experiment.seed = c.seed;
    }
    if (c.threads > 0) {
        rc.threads = c.threads;
    }
    rc.out_dir = c.out;
    cim::set_thread_count(rc.threads);
    return rc;
}

int gen_problem(std::size_t ring, std::size_t random_n, double p, const Common &c, const std::string &file) {
    if ((ring > 0) == (random_n > 0)) {
        throw cim::InputError("gen-problem needs exactly one of --ring N or --random N");
    }
    const cim::IsingProblem problem =
        ring > 0 ? cim::ring_afm(ring) : cim::random_graph_problem(random_n, p, c.seed_given ? c.seed : 1);
    auto out = open_output(c.out, file);
    cim::write_problem(out, problem);
    std::cout << (fs::path(c.out) / file).string() << '\n';
    return 0;
}

int run_total_cmd(const std::string &config, const Common &c, bool final_states) {
    const cim::RunConfig rc = load_config(config, c);
    const cim::ExperimentConfig &cfg = rc.experiment;
    const cim::IsingProblem problem = cim::build_problem(cfg.problem);
    cim::RecordingConfig rec;
    rec.stride = cfg.record_stride;
    const cim::TotalRunRecord run =
        cim::run_total(problem, cfg.params, cfg.schedule, cfg.n_traj, cfg.n_steps, cfg.seed, rec);
    const std::string prov = cim::provenance_text(rc);
    {
        auto out = open_output(c.out, "total_steps.csv");
        cim::write_provenance(out, "run-total", prov);
        cim::write_step_csv(out, run.steps);
    }
    {
        auto out = open_output(c.out, "total_energy.csv");
        cim::write_provenance(out, "run-total", prov);
        cim::write_energy_csv(out, run.energies);
    }
    if (final_states) {
        auto out = open_output(c.out, "total_final.csv");
        cim::write_provenance(out, "run-total", prov);
        cim::write_state_table(out, run.final_state);
    }
    std::cout << "final mean energy " << cim::format_double(run.energies.back().mean, 10) << " +- "
              << cim::format_double(run.energies.back().std_err, 3) << '\n';
    return 0;
}

int run_conditional_cmd(const std::string &config, const Common &c) {
    const cim::RunConfig rc = load_config(config, c);
    const cim::ExperimentConfig &cfg = rc.experiment;
    const cim::IsingProblem problem = cim::build_problem(cfg.problem);
    const cim::ConditionalRunRecord run = cim::run_conditional(problem, cfg.params, cfg.schedule, cfg.n_traj,
                                                               cfg.n_steps, cfg.eps_thr, cfg.seed, cfg.record_stride);
    auto out = open_output(c.out, "conditional_trace.csv");
    cim::write_provenance(out, "run-conditional", cim::provenance_text(rc));
    cim::write_conditional_csv(out, run);
    std::cout << "spins " << run.spins.to_string() << " energy " << cim::format_double(run.energy) << " breeds "
              << run.breed_count << '\n';
    return 0;
}

int oracle_cmd(int modes, int cutoff, bool compare_total, std::size_t n_traj, double t_max, double eps_ratio,
               double zeta, const Common &c) {
    cim::set_thread_count(c.threads);
    // Desk parameters: threshold 4, so eps_ratio = 1.5 gives eps_p = 6 and |alpha_s|^2 = 8.
    cim::CimParams params{0.9, 0.1, 2.0, 0.5, 0.0};
    const double eps_p = eps_ratio * cim::pump_threshold(params);
    std::vector<double> checkpoints;
    for (int k = 1; k <= 10; ++k) {
        checkpoints.push_back(t_max * k / 10.0);
    }
    if (compare_total) {
        if (modes != 1) {
            throw cim::InputError("--compare-total is defined for a single mode");
        }
        cim::MomentComparisonSetup setup;
        setup.params = params;
        setup.eps_p = eps_p;
        setup.cutoff = cutoff;
        setup.n_traj = n_traj;
        setup.checkpoints = checkpoints;
        setup.seed = c.seed_given ? c.seed : 1;
        const auto cps = cim::compare_total_moments(setup);
        cim::Json j;
        j["eps_p"] = eps_p;
        j["cutoff"] = cutoff;
        j["n_traj"] = n_traj;
        j["seed"] = setup.seed;
        cim::Json rows = cim::Json::array();
        for (const auto &cp : cps) {
            rows.push_back({{"t", cp.t},
                            {"oracle", {{"x", cp.oracle.x}, {"x2", cp.oracle.x2}, {"n", cp.oracle.n}}},
                            {"sde",
                             {{"x", cp.sde.x},
                              {"x_err", cp.sde.x_err},
                              {"x2", cp.sde.x2},
                              {"x2_err", cp.sde.x2_err},
                              {"n", cp.sde.n},
                              {"n_err", cp.sde.n_err}}}});
        }
        j["checkpoints"] = rows;
        const double dev = cim::max_relative_deviation(cps);
        j["max_relative_deviation"] = dev;
        j["agree"] = cim::moments_agree(cps);
        auto out = open_output(c.out, "oracle_compare.json");
        out << j.dump(2) << '\n';
        std::cout << "max relative deviation " << cim::format_double(dev, 6) << '\n';
        return 0;
    }
    std::vector<double> J(static_cast<std::size_t>(modes * modes), 0.0);
    if (modes == 2) {
        J[1] = J[2] = -1.0;
    }
    params.zeta = zeta;
    const cim::OracleModel model{params, eps_p, zeta, J};
    const cim::OperatorSet ops = cim::OperatorSet::build(modes, cutoff, model);
    const auto records = cim::integrate_total(ops, cim::DensityState::vacuum(modes, cutoff), 1e-3, checkpoints);
    auto out = open_output(c.out, "oracle.json");
    out << cim::oracle_json(records).dump(2) << '\n';
    const auto &last = records.back().moments[0];
    std::cout << "t=" << cim::format_double(records.back().t) << " <x>=" << cim::format_double(last.x, 8)
              << " <x^2>=" << cim::format_double(last.x2, 8) << " <n>=" << cim::format_double(last.n, 8) << '\n';
    return 0;
}

int experiment_cmd(const std::string &config, const Common &c) {
    const cim::RunConfig rc = load_config(config, c);
    const cim::RunSummary summary = cim::run_experiment(rc.experiment);
    const std::string prov = cim::provenance_text(rc);
    {
        auto out = open_output(c.out, "summary.json");
        out << cim::summary_json(summary, prov).dump(2) << '\n';
    }
    if (!summary.energy_trace.empty()) {
        auto out = open_output(c.out, "energy_trace.csv");
        cim::write_provenance(out, "experiment", prov);
        cim::write_energy_csv(out, summary.energy_trace);
    }
    if (!summary.histogram.empty()) {
        auto out = open_output(c.out, "histogram.csv");
        cim::write_provenance(out, "experiment", prov);
        out << "lower,upper,mass\n";
        for (const auto &b : summary.histogram) {
            out << cim::format_double(b.lower) << ',' << cim::format_double(b.upper) << ','
                << cim::format_double(b.mass) << '\n';
        }
    }
    for (const auto &g : summary.grid) {
        std::cout << "t_max=" << cim::format_double(g.t_max) << " zeta=" << cim::format_double(g.zeta)
                  << " success=" << cim::format_double(g.success.value, 6) << " +- "
                  << cim::format_double(g.success.std_err, 3) << " mean_energy=" << cim::format_double(g.mean_energy, 8)
                  << '\n';
    }
    std::cerr << "elapsed " << cim::format_double(summary.seconds, 4) << " s\n";
    return 0;
}

// Energies of the trajectories in a final-state table, with a histogram and, for small problems,
// the ground-state success fraction.
int analyze_cmd(const std::string &states_path, const std::string &problem_path, std::size_t bins, const Common &c) {
    std::ifstream pin(problem_path);
    if (!pin) {
        throw cim::InputError("cannot open problem file '" + problem_path + "'");
    }
    const cim::IsingProblem problem = cim::read_problem(pin);
    std::ifstream sin(states_path);
    if (!sin) {
        throw cim::InputError("cannot open state table '" + states_path + "'");
    }
    std::map<std::size_t, std::vector<double>> re_x;
    std::string line;
    int line_no = 0;
    bool header = false;
    while (std::getline(sin, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (!header) {
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string item;
        while (std::getline(ls, item, ',')) {
            f.push_back(item);
        }
        std::size_t k = 0, i = 0;
        double ra = 0, rb = 0;
        if (f.size() != 6 || !cim::parse_integer(f[0], k) || !cim::parse_integer(f[1], i) ||
            !cim::parse_double(f[2], ra) || !cim::parse_double(f[4], rb)) {
            throw cim::InputError("state table line " + std::to_string(line_no) + ": malformed row");
        }
        if (i >= problem.size()) {
            throw cim::InputError("state table line " + std::to_string(line_no) + ": mode index out of range");
        }
        auto &row = re_x[k];
        row.resize(problem.size(), 0.0);
        row[i] = ra + rb;
    }
    if (re_x.empty()) {
        throw cim::InputError("state table has no rows");
    }
    std::vector<double> energies;
    std::vector<cim::SpinConfig> spins;
    for (const auto &[k, xs] : re_x) {
        std::vector<int> s(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            s[i] = xs[i] >= 0.0 ? 1 : -1;
        }
        spins.emplace_back(s);
        energies.push_back(cim::ising_energy(problem, spins.back()));
    }
    cim::Json j;
    j["trajectories"] = energies.size();
    j["mean_energy"] = cim::pairwise_sum(energies) / static_cast<double>(energies.size());
    cim::HistogramSpec spec;
    spec.bins = bins;
    j["histogram"] = cim::histogram_json(cim::energy_histogram(energies, spec));
    if (problem.size() <= cim::kBruteForceLimit) {
        const cim::GroundStates gs = cim::brute_force_ground_state(problem);
        const cim::Estimate e = cim::success_probability(spins, gs.configs);
        j["ground_energy"] = gs.energy;
        j["success"] = e.value;
        j["success_std_err"] = e.std_err;
    }
    auto out = open_output(c.out, "analysis.json");
    out << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Measurement-feedback coherent Ising machine simulator"};
    app.require_subcommand(1);

    Common common;
    std::string config;

    auto *gen = app.add_subcommand("gen-problem", "Write an Ising problem file");
    std::size_t ring = 0, random_n = 0;
    double p = 0.1;
    std::string problem_file = "problem.txt";
    gen->add_option("--ring", ring, "Antiferromagnetic ring with N spins");
    gen->add_option("--random", random_n, "Random +-1 couplings on N spins");
    gen->add_option("--p", p, "Edge probability for --random")->check(CLI::Range(0.0, 1.0));
    gen->add_option("--file", problem_file, "Output file name inside --out");
    add_common(gen, common);

    auto *total = app.add_subcommand("run-total", "Total-master-equation positive-P run");
    bool final_states = false;
    total->add_option("config", config, "Configuration file")->required()->check(CLI::ExistingFile);
    total->add_flag("--final-states", final_states, "Also write the final per-trajectory state table");
    add_common(total, common);

    auto *cond = app.add_subcommand("run-conditional", "Weighted conditional run");
    cond->add_option("config", config, "Configuration file")->required()->check(CLI::ExistingFile);
    add_common(cond, common);

    auto *oracle = app.add_subcommand("oracle", "Density-matrix oracle (desk parameters)");
    int modes = 1, cutoff = 32;
    bool compare_total = false;
    std::size_t oracle_traj = 100000;
    double oracle_tmax = 5.0, eps_ratio = 1.5, oracle_zeta = 0.0;
    oracle->add_option("--modes", modes, "1 or 2")->check(CLI::Range(1, 2));
    oracle->add_option("--cutoff", cutoff, "Fock cutoff per mode")->check(CLI::Range(2, 64));
    oracle->add_flag("--compare-total", compare_total, "Compare moments with the positive-P total SDE");
    oracle->add_option("--n-traj", oracle_traj, "Trajectories for --compare-total");
    oracle->add_option("--t-max", oracle_tmax, "Integration time")->check(CLI::PositiveNumber);
    oracle->add_option("--pump-ratio", eps_ratio, "Pump in units of the threshold")->check(CLI::NonNegativeNumber);
    oracle->add_option("--zeta", oracle_zeta, "Feedback strength (two modes couple with J = -1)")
        ->check(CLI::NonNegativeNumber);
    add_common(oracle, common);

    auto *exp = app.add_subcommand("experiment", "Experiment a, b or c from a configuration file");
    exp->add_option("config", config, "Configuration file")->required()->check(CLI::ExistingFile);
    add_common(exp, common);

    auto *analyze = app.add_subcommand("analyze", "Energies and success of a final-state table");
    std::string states, problem_path;
    std::size_t bins = 0;
    analyze->add_option("states", states, "State table written by run-total --final-states")->required();
    analyze->add_option("--problem", problem_path, "Problem file")->required();
    analyze->add_option("--bins", bins, "Histogram bins (0: one per distinct energy)");
    add_common(analyze, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(cim::ExitCode::kConfig);
    }

    try {
        if (*gen) {
            return gen_problem(ring, random_n, p, common, problem_file);
        }
        if (*total) {
            return run_total_cmd(config, common, final_states);
        }
        if (*cond) {
            return run_conditional_cmd(config, common);
        }
        if (*oracle) {
            return oracle_cmd(modes, cutoff, compare_total, oracle_traj, oracle_tmax, eps_ratio, oracle_zeta, common);
        }
        if (*exp) {
            return experiment_cmd(config, common);
        }
        if (*analyze) {
            return analyze_cmd(states, problem_path, bins, common);
        }
    } catch (const cim::Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(cim::ExitCode::kConfig);
    }
    return 0;
}
