#pragma once

// Counter-based random streams.
//
// Every random draw in the library is a pure function of
//   (master seed, trajectory, step, substream, block index),
// so results do not depend on how trajectories are scheduled across threads.
// The generator is Philox4x32-10 (Salmon et al., SC'11); the 128-bit counter
// holds {block, substream, trajectory, step} and the 64-bit key holds the seed.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace cim {

class Philox4x32 {
  public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter generate(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

  private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Disjoint purposes for random draws. The value is stored verbatim in a counter word,
/// so two substreams can never produce overlapping sequences.
enum class Substream : std::uint32_t {
    kTotalNoise = 1,
    kFictitiousNoise = 2,
    kRealNoise = 3,
    kInitialState = 4,
    kProblem = 5,
    kOraclePath = 6,
    kTest = 7,
};

/// Trajectory slot used for draws that are shared by the whole ensemble.
inline constexpr std::uint32_t kSharedTrajectory = 0xFFFFFFFFu;

/// SplitMix64 finalizer; used to derive per-run seeds from a master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return splitmix64(master ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

/// Sequential view of one (seed, trajectory, step, substream) stream.
class RandomStream {
  public:
    RandomStream(std::uint64_t seed, std::uint32_t trajectory, std::uint32_t step, Substream substream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          trajectory_(trajectory),
          step_(step),
          substream_(static_cast<std::uint32_t>(substream)) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept {
        if (lane_ == 2) {
            refill();
        }
        const std::uint64_t bits = words_[lane_];
        ++lane_;
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    /// Standard normal draw (Box-Muller; pairs are consumed in order).
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phase = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(phase);
        has_spare_ = true;
        return r * std::cos(phase);
    }

    void fill_normal(std::span<double> out) noexcept {
        for (double &v : out) {
            v = normal();
        }
    }

  private:
    void refill() noexcept {
        const auto out = Philox4x32::generate({block_, substream_, trajectory_, step_}, key_);
        ++block_;
        words_[0] = (std::uint64_t{out[0]} << 32) | out[1];
        words_[1] = (std::uint64_t{out[2]} << 32) | out[3];
        lane_ = 0;
    }

    Philox4x32::Key key_;
    std::uint32_t trajectory_;
    std::uint32_t step_;
    std::uint32_t substream_;
    std::uint32_t block_ = 0;
    std::array<std::uint64_t, 2> words_{};
    int lane_ = 2;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Stream for one (master_seed, trajectory, step, substream) tuple.
inline RandomStream seed_streams(std::uint64_t master_seed, std::uint32_t trajectory, std::uint32_t step,
                                 Substream substream) noexcept {
    return RandomStream(master_seed, trajectory, step, substream);
}

}  // namespace cim
