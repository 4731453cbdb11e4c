// log_math.hpp: log-magnitude/phase arithmetic for amplitudes that overflow doubles

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qndsq {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// A complex number stored as log|z| and arg z. Zero is log_mag = -inf.
struct LogAmp {
    double log_mag{kNegInf};
    double phase{0.0};

    static LogAmp from(cplx z) {
        const double m = std::abs(z);
        if (m == 0.0) return {};
        return {std::log(m), std::arg(z)};
    }

    /// z^n, with the convention 0^0 = 1.
    LogAmp pow(long n) const {
        if (n == 0) return {0.0, 0.0};
        if (log_mag == kNegInf) return {};
        const double dn = static_cast<double>(n);
        return {dn * log_mag, dn * phase};
    }

    LogAmp operator*(const LogAmp& o) const {
        if (log_mag == kNegInf || o.log_mag == kNegInf) return {};
        return {log_mag + o.log_mag, phase + o.phase};
    }

    LogAmp conj() const { return {log_mag, -phase}; }

    bool is_zero() const { return log_mag == kNegInf; }

    /// exp(log_mag - shift) * e^{i phase}
    cplx value(double shift = 0.0) const {
        if (is_zero()) return {0.0, 0.0};
        return std::polar(std::exp(log_mag - shift), phase);
    }
};

inline double log_factorial(long n) { return std::lgamma(static_cast<double>(n) + 1.0); }

inline double log_binomial(long n, long k) {
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

/// log(sum exp(x_i)); returns -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> xs) {
    double mx = kNegInf;
    for (double x : xs) mx = std::max(mx, x);
    if (mx == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - mx);
    return mx + std::log(s);
}

/// Exponentiate after subtracting the max log magnitude, then scale to unit 2-norm.
/// Returns an all-zero vector when every entry is zero.
inline Eigen::VectorXcd normalize_log_amplitudes(std::span<const LogAmp> amps, double* log_norm_sq = nullptr) {
    double mx = kNegInf;
    for (const auto& a : amps) mx = std::max(mx, a.log_mag);
    Eigen::VectorXcd v(static_cast<Eigen::Index>(amps.size()));
    if (mx == kNegInf) {
        v.setZero();
        if (log_norm_sq) *log_norm_sq = kNegInf;
        return v;
    }
    for (std::size_t i = 0; i < amps.size(); ++i) v[static_cast<Eigen::Index>(i)] = amps[i].value(mx);
    const double nrm = v.norm();
    v /= nrm;
    if (log_norm_sq) *log_norm_sq = 2.0 * (mx + std::log(nrm));
    return v;
}

} // namespace qndsq
