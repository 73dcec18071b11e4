#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cim {

/// Process exit statuses used by the command-line driver.
enum class ExitCode : int {
    kOk = 0,
    kConfig = 2,
    kDivergence = 3,
    kCapacity = 4,
};

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string &what) : std::runtime_error(what) {}
    virtual ExitCode exit_code() const noexcept = 0;
};

/// Malformed or physically inconsistent input (dimension mismatch, bad config, invalid rates).
class InputError : public Error {
  public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

/// A trajectory left the finite numbers, or an integrator lost its trace/weight normalization.
class NumericalError : public Error {
  public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kDivergence; }
};

class DivergenceError : public NumericalError {
  public:
    DivergenceError(std::size_t trajectory, double t)
        : NumericalError("trajectory " + std::to_string(trajectory) + " diverged (non-finite coordinate) at t=" +
                         std::to_string(t)),
          trajectory_(trajectory),
          t_(t) {}

    std::size_t trajectory() const noexcept { return trajectory_; }
    double time() const noexcept { return t_; }

  private:
    std::size_t trajectory_;
    double t_;
};

/// Request exceeds a hard size limit (e.g. exhaustive enumeration).
class CapacityError : public Error {
  public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kCapacity; }
};

inline void require(bool condition, const std::string &message) {
    if (!condition) {
        throw InputError(message);
    }
}

}  // namespace cim
