// pure_measure.hpp: zero-tunneling measurement model: port amplitudes, photon-count
// detection amplitudes and probabilities, conditional states, and the large-count
// Gaussian approximations of the conditional distribution.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qndsq/errors.hpp"
#include "qndsq/log_math.hpp"
#include "qndsq/spin_core.hpp"

namespace qndsq {

inline constexpr long kMaxPhotonCount = 1'000'000;

/// Coherent probe amplitudes in the left and right interferometer arms.
struct LightPair {
    cplx alpha_l{0.0, 0.0};
    cplx alpha_r{0.0, 0.0};

    double rel_phase() const { return std::arg(alpha_l) - std::arg(alpha_r); }
    double intensity() const { return std::norm(alpha_l) + std::norm(alpha_r); }
    /// Mean photon number per output port.
    double port_mean() const { return 0.5 * intensity(); }
};

struct DetectionOutcome {
    long n_c{0};
    long n_d{0};

    friend bool operator==(const DetectionOutcome&, const DetectionOutcome&) = default;
};

struct InteractionSetting {
    double g{0.0};
    double t{0.0};

    double gt() const { return g * t; }
};

/// Peak offset x0 (from N/2) and inverse width X0 of the measurement weighting |A(k)|.
struct GaussianWindow {
    double x0{0.0};
    double big_x0{0.0};
};

/// Gaussian approximation of the conditional pmf of k.
struct ConditionalGaussian {
    GaussianWindow window;
    double sigma{0.0};  // variance
    double k0{0.0};     // peak

    double pdf(double k) const {
        return std::exp(-(k - k0) * (k - k0) / (2.0 * sigma)) / std::sqrt(2.0 * kPi * sigma);
    }
};

namespace detail {

inline void check_outcome(const DetectionOutcome& o) {
    if (o.n_c < 0 || o.n_d < 0) throw ValidationError("photon counts must be nonnegative");
    if (o.n_c > kMaxPhotonCount || o.n_d > kMaxPhotonCount)
        throw CapacityError("photon count exceeds log-domain capacity");
}

inline void check_index(int k, int n_atoms) {
    if (k < 0 || k > n_atoms)
        throw std::out_of_range("Fock index " + std::to_string(k) + " outside [0, " + std::to_string(n_atoms) + "]");
}

} // namespace detail

/// Output-port amplitudes (alpha_c(k), alpha_d(k)) after the beamsplitter, given
/// that the arms picked up phases -/+ gt(k - N/2).
inline std::pair<cplx, cplx> port_amplitudes(const LightPair& light, const InteractionSetting& setting, int k,
                                             int n_atoms) {
    detail::check_index(k, n_atoms);
    const double angle = setting.gt() * (static_cast<double>(k) - 0.5 * n_atoms);
    const double c = std::cos(angle), s = std::sin(angle);
    const cplx i(0.0, 1.0);
    const cplx u = light.alpha_l + i * light.alpha_r;
    const cplx v = i * light.alpha_l + light.alpha_r;
    return {u * c - v * s, v * c + u * s};
}

inline LogAmp log_detection_amplitude(const LightPair& light, const InteractionSetting& setting,
                                      const DetectionOutcome& outcome, int k, int n_atoms) {
    detail::check_outcome(outcome);
    const auto [ac, ad] = port_amplitudes(light, setting, k, n_atoms);
    const double r = 1.0 / std::sqrt(2.0);
    LogAmp a = LogAmp::from(ac * r).pow(outcome.n_c) * LogAmp::from(ad * r).pow(outcome.n_d);
    if (!a.is_zero())
        a.log_mag += -0.5 * light.intensity() - 0.5 * log_factorial(outcome.n_c) - 0.5 * log_factorial(outcome.n_d);
    return a;
}

/// A_{n_c,n_d}(k): overlap of the port coherent states with |n_c, n_d>.
inline cplx detection_amplitude(const LightPair& light, const InteractionSetting& setting,
                                const DetectionOutcome& outcome, int k, int n_atoms) {
    return log_detection_amplitude(light, setting, outcome, k, n_atoms).value();
}

/// log of |C_k A(k)|^2 per k, with the combined phase kept alongside.
inline std::vector<LogAmp> conditional_log_amplitudes(const AtomState& state, const LightPair& light,
                                                      const InteractionSetting& setting,
                                                      const DetectionOutcome& outcome) {
    std::vector<LogAmp> out(static_cast<std::size_t>(state.n_atoms) + 1);
    for (int k = 0; k <= state.n_atoms; ++k) {
        const LogAmp c = LogAmp::from(state.amplitudes[k]);
        out[static_cast<std::size_t>(k)] = c * log_detection_amplitude(light, setting, outcome, k, state.n_atoms);
    }
    return out;
}

inline double log_detection_probability(const AtomState& state, const LightPair& light,
                                        const InteractionSetting& setting, const DetectionOutcome& outcome) {
    const auto amps = conditional_log_amplitudes(state, light, setting, outcome);
    std::vector<double> logs(amps.size());
    std::transform(amps.begin(), amps.end(), logs.begin(), [](const LogAmp& a) { return 2.0 * a.log_mag; });
    return log_sum_exp(logs);
}

/// P(n_c, n_d) = sum_k |C_k|^2 |A_{n_c,n_d}(k)|^2
inline double detection_probability(const AtomState& state, const LightPair& light,
                                    const InteractionSetting& setting, const DetectionOutcome& outcome) {
    return std::clamp(std::exp(log_detection_probability(state, light, setting, outcome)), 0.0, 1.0);
}

/// Atomic state after detecting `outcome`; phases of A(k) are retained.
inline AtomState conditional_state(const AtomState& state, const LightPair& light,
                                   const InteractionSetting& setting, const DetectionOutcome& outcome) {
    const auto amps = conditional_log_amplitudes(state, light, setting, outcome);
    double log_p = kNegInf;
    Eigen::VectorXcd v = normalize_log_amplitudes(amps, &log_p);
    if (!std::isfinite(log_p))
        throw ImpossibleOutcome("unreachable outcome (" + std::to_string(outcome.n_c) + ", " +
                                std::to_string(outcome.n_d) + "): zero detection probability");
    return AtomState::make(state.n_atoms, std::move(v));
}

/// Per-detector cutoff ceil(mu + 10 sqrt(mu)), at least 20.
inline long outcome_cutoff(const LightPair& light) {
    const double mu = light.port_mean();
    return std::max<long>(20, static_cast<long>(std::ceil(mu + 10.0 * std::sqrt(mu))));
}

/// P(n_c, n_d) for all 0 <= n_c, n_d <= n_max; entry (n_c, n_d).
inline Eigen::MatrixXd detection_grid(const AtomState& state, const LightPair& light,
                                      const InteractionSetting& setting, long n_max) {
    if (n_max < 0 || n_max > kMaxPhotonCount) throw CapacityError("outcome grid cutoff out of range");
    const Eigen::Index m = n_max + 1;
    Eigen::MatrixXd grid = Eigen::MatrixXd::Zero(m, m);
    std::vector<double> lf(static_cast<std::size_t>(m));
    for (Eigen::Index n = 0; n < m; ++n) lf[static_cast<std::size_t>(n)] = log_factorial(n);
    const double r = 1.0 / std::sqrt(2.0);
    // For each k the counts are independent Poissonians with means |alpha_c/sqrt2|^2, |alpha_d/sqrt2|^2.
    Eigen::VectorXd pc(m), pd(m);
    for (int k = 0; k <= state.n_atoms; ++k) {
        const double w = std::norm(state.amplitudes[k]);
        if (w == 0.0) continue;
        const auto [ac, ad] = port_amplitudes(light, setting, k, state.n_atoms);
        const double lc = std::norm(ac * r), ld = std::norm(ad * r);
        auto fill = [&](double lambda, Eigen::VectorXd& p) {
            for (Eigen::Index n = 0; n < m; ++n) {
                if (lambda == 0.0) {
                    p[n] = n == 0 ? 1.0 : 0.0;
                } else {
                    p[n] = std::exp(static_cast<double>(n) * std::log(lambda) - lambda - lf[static_cast<std::size_t>(n)]);
                }
            }
        };
        fill(lc, pc);
        fill(ld, pd);
        grid.noalias() += w * pc * pd.transpose();
    }
    return grid;
}

/// Rounded Poisson mean per port (n, n); exact halves round down.
inline DetectionOutcome most_probable_outcome(const LightPair& light) {
    const long n = static_cast<long>(std::ceil(light.port_mean() - 0.5 - 1e-9));
    return {std::max<long>(n, 0), std::max<long>(n, 0)};
}

/// x0 and X0 of the Gaussian that |A(k)| approaches for n_c, n_d >> 1.
inline GaussianWindow gaussian_window(const LightPair& light, const InteractionSetting& setting,
                                      const DetectionOutcome& outcome) {
    detail::check_outcome(outcome);
    const double gt = setting.gt();
    if (!(gt > 0.0)) throw AsymptoticDomainError("Gaussian window requires gt > 0");
    if (outcome.n_c == 0 || outcome.n_d == 0)
        throw AsymptoticDomainError("Gaussian window requires nonzero counts on both detectors");
    const double ab = std::abs(light.alpha_l) * std::abs(light.alpha_r);
    if (ab == 0.0) throw AsymptoticDomainError("Gaussian window requires both probe arms to be lit");
    const double s = light.intensity();
    const double nc = static_cast<double>(outcome.n_c), nd = static_cast<double>(outcome.n_d);
    const double arg = s / (2.0 * ab) * (nc - nd) / (nc + nd);
    if (std::abs(arg) > 1.0) throw AsymptoticDomainError("outcome inconsistent with asymptotics (|arcsin arg| > 1)");
    GaussianWindow w;
    w.x0 = (light.rel_phase() - std::asin(arg)) / (2.0 * gt);
    const double ratio = 2.0 * ab / s;
    w.big_x0 = gt * gt * ((nc + nd) / (nc * nd)) * ((nc + nd) * (nc + nd) * ratio * ratio - (nd - nc) * (nd - nc));
    return w;
}

/// Conditional Gaussian of k: width sigma and peak k0. At gt = 0 this is the
/// spin-coherent prior. Valid for n_c, n_d >> 1; the caller owns that judgement.
inline ConditionalGaussian conditional_gaussian(const GroundExcitedAmplitudes& ge, int n_atoms,
                                                const LightPair& light, const InteractionSetting& setting,
                                                const DetectionOutcome& outcome) {
    const auto [eta_l, eta_r] = ge_to_lr_amplitudes(ge);
    const double n = n_atoms;
    const double prior_var = n * std::norm(eta_l) * std::norm(eta_r);
    ConditionalGaussian cg;
    if (setting.gt() != 0.0) cg.window = gaussian_window(light, setting, outcome);
    const double x = prior_var * cg.window.big_x0;
    cg.sigma = prior_var / (1.0 + x);
    cg.k0 = (n * std::norm(eta_l) + x * (n / 2.0 + cg.window.x0)) / (1.0 + x);
    return cg;
}

/// Closed-form P(n_c, n_d) from Stirling-approximated amplitudes.
inline double approx_detection_probability(const GroundExcitedAmplitudes& ge, int n_atoms, const LightPair& light,
                                           const InteractionSetting& setting, const DetectionOutcome& outcome) {
    detail::check_outcome(outcome);
    const auto [eta_l, eta_r] = ge_to_lr_amplitudes(ge);
    const double n = n_atoms;
    const double prior_var = n * std::norm(eta_l) * std::norm(eta_r);
    GaussianWindow w;
    if (setting.gt() != 0.0) w = gaussian_window(light, setting, outcome);
    const double s = light.intensity();
    const double nc = static_cast<double>(outcome.n_c), nd = static_cast<double>(outcome.n_d);
    const double tot = nc + nd;
    const double denom = 1.0 + prior_var * w.big_x0;
    const double offset = w.x0 - n * (std::norm(eta_l) - std::norm(eta_r)) / 2.0;
    const double log_p = -0.5 * std::log(4.0 * kPi * kPi * nc * nd * denom) + tot * std::log(s / tot) + tot - s -
                         w.big_x0 * offset * offset / (2.0 * denom);
    return std::exp(log_p);
}

/// Stirling/Gaussian form of |C_k| for a spin coherent state.
inline double stirling_coherent_magnitude(const GroundExcitedAmplitudes& ge, int n_atoms, double k) {
    const auto [eta_l, eta_r] = ge_to_lr_amplitudes(ge);
    const double v = n_atoms * std::norm(eta_l) * std::norm(eta_r);
    const double d = k - n_atoms * std::norm(eta_l);
    return std::pow(1.0 / (2.0 * kPi * v), 0.25) * std::exp(-d * d / (4.0 * v));
}

/// Stirling/Gaussian form of |A_{n_c,n_d}(k)| around its peak.
inline double stirling_detection_magnitude(const LightPair& light, const InteractionSetting& setting,
                                           const DetectionOutcome& outcome, int n_atoms, double k) {
    const GaussianWindow w = gaussian_window(light, setting, outcome);
    const double s = light.intensity();
    const double nc = static_cast<double>(outcome.n_c), nd = static_cast<double>(outcome.n_d);
    const double tot = nc + nd;
    const double d = k - n_atoms / 2.0 - w.x0;
    const double log_a = 0.5 * tot * std::log(s / tot) + 0.5 * (tot - s) - 0.25 * std::log(4.0 * kPi * kPi * nc * nd) -
                         w.big_x0 / 4.0 * d * d;
    return std::exp(log_a);
}

/// Local maxima of `pmf` after a 3-point moving average: indices strictly greater
/// than both neighbours. End points are not counted.
inline int count_local_maxima(const Eigen::VectorXd& pmf) {
    const Eigen::Index n = pmf.size();
    if (n < 3) return 0;
    Eigen::VectorXd sm(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, i - 1), hi = std::min<Eigen::Index>(n - 1, i + 1);
        sm[i] = pmf.segment(lo, hi - lo + 1).mean();
    }
    int count = 0;
    for (Eigen::Index i = 1; i + 1 < n; ++i)
        if (sm[i] > sm[i - 1] && sm[i] > sm[i + 1]) ++count;
    return count;
}

/// Mean and variance of k under a pmf over 0..N.
inline std::pair<double, double> pmf_mean_variance(const Eigen::VectorXd& pmf) {
    double mean = 0.0, second = 0.0;
    for (Eigen::Index k = 0; k < pmf.size(); ++k) {
        mean += static_cast<double>(k) * pmf[k];
        second += static_cast<double>(k) * static_cast<double>(k) * pmf[k];
    }
    return {mean, std::max(0.0, second - mean * mean)};
}

} // namespace qndsq
