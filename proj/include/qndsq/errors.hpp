// errors.hpp: exception types shared by every qndsq module

#pragma once

#include <stdexcept>
#include <string>

namespace qndsq {

/// Input violates a documented invariant (normalization, Hermiticity, ranges).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A resource guard tripped: atom number or photon count beyond the configured cutoff.
struct CapacityError : std::length_error {
    using std::length_error::length_error;
};

/// The requested detection outcome has zero probability for the given state.
struct ImpossibleOutcome : std::domain_error {
    using std::domain_error::domain_error;
};

/// Asymptotic formulas were asked for outside their domain (arcsin argument, gt = 0, ...).
struct AsymptoticDomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Time integration left the physical manifold (trace drift, Hermiticity, populations).
struct IntegrationError : std::runtime_error {
    IntegrationError(const std::string& what, double time, double drift)
        : std::runtime_error(what), time_(time), drift_(drift) {}

    double time() const noexcept { return time_; }
    double drift() const noexcept { return drift_; }

private:
    double time_;
    double drift_;
};

/// Malformed or inconsistent experiment configuration.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

} // namespace qndsq
