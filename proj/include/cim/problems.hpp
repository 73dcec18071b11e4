#pragma once

// Ising problem instances, the Max-Cut reduction, and an exhaustive ground-state oracle.
//
// Energy convention: H(s) = -sum_{i,j} J_ij s_i s_j - sum_i h_i s_i with the double sum over
// ALL ordered pairs, so every undirected edge contributes twice. This is the convention under
// which the Max-Cut identity H = C + 2 sum_{(i,j) in cut} J_ij holds.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cim/error.hpp"
#include "cim/format.hpp"
#include "cim/rng.hpp"

namespace cim {

/// One upper-triangle coupling entry (i < j).
struct Coupling {
    std::size_t i;
    std::size_t j;
    double value;
};

/// Symmetric, zero-diagonal coupling matrix. Dense storage up to kDenseLimit spins,
/// compressed rows (both triangles) above.
class CouplingMatrix {
  public:
    static constexpr std::size_t kDenseLimit = 64;

    CouplingMatrix() = default;

    /// Builds from upper-triangle entries; zero values are dropped, duplicates rejected.
    CouplingMatrix(std::size_t n, std::span<const Coupling> upper) : n_(n) {
        std::vector<std::vector<std::pair<std::size_t, double>>> rows(n);
        std::map<std::pair<std::size_t, std::size_t>, bool> seen;
        for (const Coupling &c : upper) {
            require(c.i < n && c.j < n, "coupling index out of range (" + std::to_string(c.i) + ", " +
                                            std::to_string(c.j) + ") for n=" + std::to_string(n));
            require(c.i != c.j, "diagonal coupling J[" + std::to_string(c.i) + "][" + std::to_string(c.i) +
                                    "] must be zero");
            require(std::isfinite(c.value), "coupling value must be finite");
            const auto key = std::minmax(c.i, c.j);
            require(!seen[key], "duplicate coupling for pair (" + std::to_string(key.first) + ", " +
                                    std::to_string(key.second) + ")");
            seen[key] = true;
            if (c.value == 0.0) {
                continue;
            }
            rows[c.i].emplace_back(c.j, c.value);
            rows[c.j].emplace_back(c.i, c.value);
        }
        row_start_.assign(n + 1, 0);
        for (std::size_t i = 0; i < n; ++i) {
            std::sort(rows[i].begin(), rows[i].end());
            row_start_[i + 1] = row_start_[i] + rows[i].size();
        }
        cols_.reserve(row_start_[n]);
        vals_.reserve(row_start_[n]);
        for (const auto &row : rows) {
            for (const auto &[col, val] : row) {
                cols_.push_back(col);
                vals_.push_back(val);
            }
        }
        if (n <= kDenseLimit) {
            dense_.assign(n * n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = row_start_[i]; k < row_start_[i + 1]; ++k) {
                    dense_[i * n + cols_[k]] = vals_[k];
                }
            }
        }
    }

    std::size_t size() const noexcept { return n_; }
    bool is_dense() const noexcept { return !dense_.empty() || n_ == 0; }

    /// Number of stored nonzeros over both triangles.
    std::size_t nonzeros() const noexcept { return vals_.size(); }

    double at(std::size_t i, std::size_t j) const {
        if (!dense_.empty()) {
            return dense_[i * n_ + j];
        }
        const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_start_[i]);
        const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_start_[i + 1]);
        const auto it = std::lower_bound(first, last, j);
        return (it != last && *it == j) ? vals_[static_cast<std::size_t>(it - cols_.begin())] : 0.0;
    }

    /// Calls f(j, J_ij) for each nonzero in row i, in increasing j.
    template <class F>
    void for_each_in_row(std::size_t i, F &&f) const {
        for (std::size_t k = row_start_[i]; k < row_start_[i + 1]; ++k) {
            f(cols_[k], vals_[k]);
        }
    }

    /// y = J x. T is double or std::complex<double>.
    template <class T>
    void apply(std::span<const T> x, std::span<T> y) const {
        for (std::size_t i = 0; i < n_; ++i) {
            T acc{};
            for (std::size_t k = row_start_[i]; k < row_start_[i + 1]; ++k) {
                acc += vals_[k] * x[cols_[k]];
            }
            y[i] = acc;
        }
    }

    /// Sum over row i of J_ij (used by the printed real-noise variant).
    double row_sum(std::size_t i) const {
        double acc = 0.0;
        for_each_in_row(i, [&](std::size_t, double v) { acc += v; });
        return acc;
    }

    /// Upper-triangle nonzeros in row-major order.
    std::vector<Coupling> upper_triangle() const {
        std::vector<Coupling> out;
        for (std::size_t i = 0; i < n_; ++i) {
            for_each_in_row(i, [&](std::size_t j, double v) {
                if (j > i) {
                    out.push_back({i, j, v});
                }
            });
        }
        return out;
    }

  private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_start_{0};
    std::vector<std::size_t> cols_;
    std::vector<double> vals_;
    std::vector<double> dense_;
};

/// n spins, symmetric zero-diagonal couplings J, Zeeman field h, provenance label.
class IsingProblem {
  public:
    IsingProblem(std::size_t n, std::span<const Coupling> upper, std::vector<double> h = {}, std::string label = {})
        : n_(n), J_(n, upper), h_(std::move(h)), label_(std::move(label)) {
        require(n >= 1, "Ising problem needs at least one spin");
        if (h_.empty()) {
            h_.assign(n, 0.0);
        }
        require(h_.size() == n, "field vector length " + std::to_string(h_.size()) + " != n=" + std::to_string(n));
        for (double v : h_) {
            require(std::isfinite(v), "field entries must be finite");
        }
    }

    /// From a full n x n row-major matrix; must be symmetric with zero diagonal.
    static IsingProblem from_dense(std::size_t n, std::span<const double> J, std::vector<double> h = {},
                                   std::string label = {}) {
        require(J.size() == n * n, "dense coupling matrix must have n*n entries");
        std::vector<Coupling> upper;
        for (std::size_t i = 0; i < n; ++i) {
            require(J[i * n + i] == 0.0, "J[" + std::to_string(i) + "][" + std::to_string(i) + "] must be zero");
            for (std::size_t j = i + 1; j < n; ++j) {
                require(J[i * n + j] == J[j * n + i], "coupling matrix not symmetric at (" + std::to_string(i) +
                                                          ", " + std::to_string(j) + ")");
                if (J[i * n + j] != 0.0) {
                    upper.push_back({i, j, J[i * n + j]});
                }
            }
        }
        return IsingProblem(n, upper, std::move(h), std::move(label));
    }

    std::size_t size() const noexcept { return n_; }
    const CouplingMatrix &J() const noexcept { return J_; }
    const std::vector<double> &h() const noexcept { return h_; }
    const std::string &label() const noexcept { return label_; }
    bool has_field() const noexcept {
        return std::any_of(h_.begin(), h_.end(), [](double v) { return v != 0.0; });
    }

  private:
    std::size_t n_;
    CouplingMatrix J_;
    std::vector<double> h_;
    std::string label_;
};

/// Spin assignment with entries in {+1, -1}.
struct SpinConfig {
    std::vector<int> spins;

    SpinConfig() = default;
    explicit SpinConfig(std::vector<int> s) : spins(std::move(s)) {
        for (int v : spins) {
            require(v == 1 || v == -1, "spin entries must be +1 or -1");
        }
    }

    std::size_t size() const noexcept { return spins.size(); }
    int operator[](std::size_t i) const { return spins[i]; }
    SpinConfig flipped() const {
        SpinConfig out = *this;
        for (int &v : out.spins) {
            v = -v;
        }
        return out;
    }
    friend bool operator==(const SpinConfig &, const SpinConfig &) = default;
    friend auto operator<=>(const SpinConfig &a, const SpinConfig &b) { return a.spins <=> b.spins; }

    std::string to_string() const {
        std::string out;
        out.reserve(spins.size());
        for (int v : spins) {
            out.push_back(v > 0 ? '+' : '-');
        }
        return out;
    }
};

struct Edge {
    std::size_t u;
    std::size_t v;
    double weight;
};

/// Undirected graph with strictly positive edge weights.
class WeightedGraph {
  public:
    WeightedGraph(std::size_t n_vertices, std::vector<Edge> edges) : n_(n_vertices), edges_(std::move(edges)) {
        require(n_ >= 1, "graph needs at least one vertex");
        std::map<std::pair<std::size_t, std::size_t>, bool> seen;
        for (const Edge &e : edges_) {
            require(e.u < n_ && e.v < n_, "edge endpoint out of range");
            require(e.u != e.v, "self-loop on vertex " + std::to_string(e.u));
            require(e.weight > 0.0 && std::isfinite(e.weight), "edge weights must be positive and finite");
            const auto key = std::minmax(e.u, e.v);
            require(!seen[key], "duplicate edge (" + std::to_string(key.first) + ", " + std::to_string(key.second) +
                                    ")");
            seen[key] = true;
        }
    }

    std::size_t n_vertices() const noexcept { return n_; }
    const std::vector<Edge> &edges() const noexcept { return edges_; }

  private:
    std::size_t n_;
    std::vector<Edge> edges_;
};

/// Energy of a raw +-1 sign vector; the caller guarantees the length.
inline double ising_energy(const IsingProblem &problem, std::span<const int> spins) {
    double coupling = 0.0;
    double field = 0.0;
    for (std::size_t i = 0; i < problem.size(); ++i) {
        double local = 0.0;
        problem.J().for_each_in_row(i, [&](std::size_t j, double v) { local += v * spins[j]; });
        coupling += spins[i] * local;
        field += problem.h()[i] * spins[i];
    }
    return -coupling - field;
}

inline double ising_energy(const IsingProblem &problem, const SpinConfig &config) {
    require(config.size() == problem.size(), "spin config length " + std::to_string(config.size()) +
                                                 " does not match problem size " + std::to_string(problem.size()));
    return ising_energy(problem, std::span<const int>(config.spins));
}

/// J_ij = -w(e_ij) on edges, 0 elsewhere, h = 0.
inline IsingProblem maxcut_to_ising(const WeightedGraph &graph) {
    std::vector<Coupling> upper;
    upper.reserve(graph.edges().size());
    for (const Edge &e : graph.edges()) {
        const auto [i, j] = std::minmax(e.u, e.v);
        upper.push_back({i, j, -e.weight});
    }
    return IsingProblem(graph.n_vertices(), upper, {}, "maxcut");
}

/// C = -sum_{i,j} J_ij over ordered pairs (twice the total edge weight for a Max-Cut instance).
inline double maxcut_offset(const IsingProblem &problem) {
    double total = 0.0;
    for (const Coupling &c : problem.J().upper_triangle()) {
        total += c.value;
    }
    return -2.0 * total;
}

inline double cut_weight(const WeightedGraph &graph, const SpinConfig &config) {
    require(config.size() == graph.n_vertices(), "spin config length " + std::to_string(config.size()) +
                                                     " does not match vertex count " +
                                                     std::to_string(graph.n_vertices()));
    double total = 0.0;
    for (const Edge &e : graph.edges()) {
        if (config[e.u] != config[e.v]) {
            total += e.weight;
        }
    }
    return total;
}

/// Circular antiferromagnet: J_ij = -1 for |i-j| = 1 or n-1.
inline IsingProblem ring_afm(std::size_t n) {
    require(n >= 3, "ring needs n >= 3, got " + std::to_string(n));
    std::vector<Coupling> upper;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        upper.push_back({i, i + 1, -1.0});
    }
    upper.push_back({0, n - 1, -1.0});
    return IsingProblem(n, upper, {}, "ring_afm n=" + std::to_string(n));
}

/// Each unordered pair is nonzero with probability p; nonzero values are +-1 with equal odds.
/// Row i draws from its own counter stream, so the instance depends only on (n, p, seed).
inline IsingProblem random_graph_problem(std::size_t n, double p, std::uint64_t seed) {
    require(n >= 1, "random graph needs n >= 1");
    require(p >= 0.0 && p <= 1.0, "edge probability must lie in [0, 1], got " + format_double(p));
    std::vector<Coupling> upper;
    for (std::size_t i = 0; i < n; ++i) {
        RandomStream stream(seed, static_cast<std::uint32_t>(i), 0, Substream::kProblem);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double u_edge = stream.uniform();
            const double u_sign = stream.uniform();
            if (u_edge < p) {
                upper.push_back({i, j, u_sign < 0.5 ? 1.0 : -1.0});
            }
        }
    }
    std::ostringstream label;
    label << "random n=" << n << " p=" << format_double(p) << " seed=" << seed;
    return IsingProblem(n, upper, {}, label.str());
}

struct GroundStates {
    std::vector<SpinConfig> configs;
    double energy;
};

inline constexpr std::size_t kBruteForceLimit = 24;

/// Exhaustive minimization over all 2^n configurations (Gray-code order, O(n) per flip).
/// Returns every minimizer, sorted.
inline GroundStates brute_force_ground_state(const IsingProblem &problem) {
    const std::size_t n = problem.size();
    if (n > kBruteForceLimit) {
        throw CapacityError("exhaustive ground-state search limited to n <= " + std::to_string(kBruteForceLimit) +
                            ", got n=" + std::to_string(n));
    }
    const auto &J = problem.J();
    const auto &h = problem.h();

    std::vector<int> s(n, 1);
    std::vector<double> local(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        J.for_each_in_row(i, [&](std::size_t j, double v) { local[i] += v * s[j]; });
    }
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        energy -= s[i] * local[i] + h[i] * s[i];
    }

    double scale = 1.0;
    for (const Coupling &c : J.upper_triangle()) {
        scale += 2.0 * std::abs(c.value);
    }
    for (double v : h) {
        scale += std::abs(v);
    }
    const double tol = 1e-9 * scale;

    double best = energy;
    std::vector<std::uint32_t> minima{0};
    std::uint32_t mask = 0;
    const std::uint64_t total = std::uint64_t{1} << n;
    for (std::uint64_t step = 1; step < total; ++step) {
        const auto k = static_cast<std::size_t>(std::countr_zero(step));
        const int old = s[k];
        energy += 4.0 * old * local[k] + 2.0 * h[k] * old;
        s[k] = -old;
        mask ^= (1u << k);
        J.for_each_in_row(k, [&](std::size_t j, double v) { local[j] -= 2.0 * v * old; });
        if (energy < best - tol) {
            best = energy;
            minima.assign(1, mask);
        } else if (energy <= best + tol) {
            minima.push_back(mask);
        }
    }

    GroundStates out;
    std::sort(minima.begin(), minima.end());
    for (std::uint32_t m : minima) {
        std::vector<int> spins(n);
        for (std::size_t i = 0; i < n; ++i) {
            spins[i] = ((m >> i) & 1u) ? -1 : 1;
        }
        out.configs.emplace_back(std::move(spins));
    }
    // Recompute exactly; incremental updates can drift for non-integer couplings.
    out.energy = ising_energy(problem, out.configs.front());
    std::sort(out.configs.begin(), out.configs.end());
    return out;
}

// Text format:
//   ising <n>
//   label <free text>            (optional)
//   h <h_0> <h_1> ... <h_{n-1}>
//   <i> <j> <J_ij>               (one line per nonzero upper-triangle coupling, i < j)
// Blank lines and lines starting with '#' are ignored. Numbers use shortest round-trip decimals.

inline void write_problem(std::ostream &os, const IsingProblem &problem) {
    os << "ising " << problem.size() << '\n';
    if (!problem.label().empty()) {
        os << "label " << problem.label() << '\n';
    }
    os << 'h';
    for (double v : problem.h()) {
        os << ' ' << format_double(v);
    }
    os << '\n';
    for (const Coupling &c : problem.J().upper_triangle()) {
        os << c.i << ' ' << c.j << ' ' << format_double(c.value) << '\n';
    }
}

inline IsingProblem read_problem(std::istream &is) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t n = 0;
    bool have_header = false;
    bool have_field = false;
    std::string label;
    std::vector<double> h;
    std::vector<Coupling> upper;

    auto fail = [&](const std::string &message) -> void {
        throw InputError("problem file line " + std::to_string(line_no) + ": " + message);
    };

    while (std::getline(is, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty() || view.front() == '#') {
            continue;
        }
        std::istringstream fields{std::string(view)};
        std::string head;
        fields >> head;
        if (!have_header) {
            if (head != "ising") {
                fail("expected header 'ising <n>'");
            }
            std::string count;
            fields >> count;
            if (!parse_integer(count, n) || n == 0) {
                fail("invalid spin count '" + count + "'");
            }
            have_header = true;
            continue;
        }
        if (head == "label") {
            const auto pos = view.find_first_not_of(" \t", 5);
            label = pos == std::string_view::npos ? std::string() : std::string(view.substr(pos));
            continue;
        }
        if (head == "h") {
            if (have_field) {
                fail("duplicate field line");
            }
            std::string tok;
            while (fields >> tok) {
                double v;
                if (!parse_double(tok, v)) {
                    fail("invalid field value '" + tok + "'");
                }
                h.push_back(v);
            }
            if (h.size() != n) {
                fail("expected " + std::to_string(n) + " field values, got " + std::to_string(h.size()));
            }
            have_field = true;
            continue;
        }
        std::string sj, sv, extra;
        fields >> sj >> sv;
        std::size_t i, j;
        double v;
        if (!parse_integer(head, i) || !parse_integer(sj, j) || !parse_double(sv, v) || (fields >> extra)) {
            fail("expected '<i> <j> <J_ij>'");
        }
        if (!(i < j)) {
            fail("couplings must be listed with i < j");
        }
        if (j >= n) {
            fail("coupling index " + std::to_string(j) + " out of range");
        }
        upper.push_back({i, j, v});
    }
    if (!have_header) {
        throw InputError("problem file: missing 'ising <n>' header");
    }
    try {
        return IsingProblem(n, upper, std::move(h), std::move(label));
    } catch (const InputError &e) {
        throw InputError(std::string("problem file: ") + e.what());
    }
}

}  // namespace cim
