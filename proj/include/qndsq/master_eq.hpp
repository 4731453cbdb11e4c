// master_eq.hpp: hybrid coherent-state master equation with tunneling and dephasing
//
// The atom-light density operator is carried as rho_{kk'} over the J_x Fock basis,
// each index tagged with coherent probe amplitudes alpha_{k,l}(t), alpha_{k,r}(t)
// that are known in closed form. Only rho_{kk'} is integrated.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qndsq/errors.hpp"
#include "qndsq/log_math.hpp"
#include "qndsq/pure_measure.hpp"
#include "qndsq/spin_core.hpp"

namespace qndsq {

/// `lindblad`: -(gamma/2)(m-m')^2 rho, from a J_x collapse operator.
/// `literal`: -gamma (m-m') rho, kept for comparison; does not preserve Hermiticity.
enum class DephasingForm { lindblad, literal };

inline std::string to_string(DephasingForm f) { return f == DephasingForm::lindblad ? "lindblad" : "literal"; }

inline DephasingForm parse_dephasing_form(const std::string& s) {
    if (s == "lindblad") return DephasingForm::lindblad;
    if (s == "literal") return DephasingForm::literal;
    throw ValidationError("unknown dephasing form '" + s + "' (expected lindblad|literal)");
}

struct ModelParams {
    int n_atoms{1};
    double omega{0.0};
    double g{0.0};
    double gamma{0.0};
    DephasingForm dephasing{DephasingForm::lindblad};
    LightPair light;

    void validate() const {
        if (n_atoms < 1) throw ValidationError("master equation needs N >= 1");
        if (n_atoms > kDefaultMaxAtoms) throw CapacityError("atom number exceeds cutoff");
        if (!(gamma >= 0.0)) throw ValidationError("dephasing rate must be >= 0");
        if (!std::isfinite(omega) || !std::isfinite(g)) throw ValidationError("non-finite model parameter");
    }
};

struct HybridState {
    Eigen::MatrixXcd rho;
    double t{0.0};
};

struct TimeGrid {
    double t_max{0.0};
    double dt{0.01};
    int sample_stride{1};

    /// Largest rate the step has to resolve.
    static double stiffness(const ModelParams& p) {
        const double n = p.n_atoms;
        return std::max({std::abs(p.omega), std::abs(p.g) * n, p.gamma * n * n});
    }

    void validate(const ModelParams& p) const {
        if (!(dt > 0.0)) throw ValidationError("time step must be positive");
        if (!(t_max >= 0.0)) throw ValidationError("t_max must be >= 0");
        if (sample_stride < 1) throw ValidationError("sample stride must be >= 1");
        if (dt * stiffness(p) > 0.05)
            throw ValidationError("time step too large: dt*max(Omega, gN, gamma N^2) = " +
                                  std::to_string(dt * stiffness(p)) + " > 0.05");
    }

    long steps() const {
        if (t_max == 0.0) return 0;
        return std::max<long>(1, static_cast<long>(std::ceil(t_max / dt - 1e-9)));
    }
};

/// (alpha_{k,l}(t), alpha_{k,r}(t)) = (alpha_l e^{-i(2k-N)gt/2}, alpha_r e^{+i(2k-N)gt/2})
inline std::pair<cplx, cplx> light_amplitudes(const ModelParams& p, int k, double t) {
    if (k < 0 || k > p.n_atoms) throw std::out_of_range("Fock index out of range");
    const double phase = (2.0 * k - p.n_atoms) * p.g * t / 2.0;
    return {p.light.alpha_l * std::polar(1.0, -phase), p.light.alpha_r * std::polar(1.0, phase)};
}

/// (<alpha_m|alpha_{m+1}>, <alpha_m|alpha_{m-1}>); independent of m.
inline std::pair<cplx, cplx> coherent_overlaps(const ModelParams& p, double t) {
    const double il = std::norm(p.light.alpha_l), ir = std::norm(p.light.alpha_r);
    const double gt = p.g * t;
    const cplx plus = std::exp(-(il + ir) + il * std::polar(1.0, -gt) + ir * std::polar(1.0, gt));
    const cplx minus = std::exp(-(il + ir) + il * std::polar(1.0, gt) + ir * std::polar(1.0, -gt));
    return {plus, minus};
}

namespace detail {

/// sqrt(m (N - m + 1)) / 2: tunneling ladder factor between m-1 and m.
inline std::vector<double> ladder_factors(int n_atoms) {
    std::vector<double> s(static_cast<std::size_t>(n_atoms) + 2, 0.0);
    for (int m = 1; m <= n_atoms; ++m) s[static_cast<std::size_t>(m)] = 0.5 * std::sqrt(double(m) * (n_atoms - m + 1));
    return s;
}

} // namespace detail

/// d rho / dt at time t.
inline Eigen::MatrixXcd rhs(const ModelParams& p, const Eigen::MatrixXcd& rho, double t) {
    const int n = p.n_atoms;
    const Eigen::Index d = n + 1;
    if (rho.rows() != d || rho.cols() != d) throw ValidationError("rho has wrong dimension");
    const auto [ov_plus, ov_minus] = coherent_overlaps(p, t);
    const auto s = detail::ladder_factors(n);
    const cplx iw(0.0, p.omega);
    Eigen::MatrixXcd out(d, d);
    for (Eigen::Index mp = 0; mp < d; ++mp) {
        for (Eigen::Index m = 0; m < d; ++m) {
            cplx acc(0.0, 0.0);
            if (m >= 1) acc += s[m] * ov_minus * rho(m - 1, mp);
            if (m + 1 < d) acc += s[m + 1] * ov_plus * rho(m + 1, mp);
            if (mp >= 1) acc -= s[mp] * ov_plus * rho(m, mp - 1);
            if (mp + 1 < d) acc -= s[mp + 1] * ov_minus * rho(m, mp + 1);
            acc *= iw;
            const double diff = static_cast<double>(m - mp);
            if (p.dephasing == DephasingForm::lindblad)
                acc -= 0.5 * p.gamma * diff * diff * rho(m, mp);
            else
                acc -= p.gamma * diff * rho(m, mp);
            out(m, mp) = acc;
        }
    }
    return out;
}

struct IntegrationTolerances {
    double trace{1e-8};
    double hermiticity{1e-9};
    double population{1e-10};
};

/// Maximum |rho - rho^+| entry.
inline double hermiticity_error(const Eigen::MatrixXcd& rho) { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }

inline double trace_error(const Eigen::MatrixXcd& rho) { return std::abs(rho.trace() - cplx(1.0, 0.0)); }

namespace detail {

inline void check_state(const ModelParams& p, const HybridState& s, const IntegrationTolerances& tol) {
    const double tr = trace_error(s.rho);
    auto fail = [&](const std::string& what, double drift) {
        std::ostringstream os;
        os.precision(6);
        os << "integration invariant violated at t=" << s.t << ": " << what << " (drift " << drift << ")";
        throw IntegrationError(os.str(), s.t, drift);
    };
    if (!(tr <= tol.trace)) fail("trace drift", tr);
    for (Eigen::Index k = 0; k < s.rho.rows(); ++k) {
        const double pk = s.rho(k, k).real();
        if (!(pk >= -tol.population && pk <= 1.0 + tol.population)) fail("population out of [0,1]", pk);
    }
    if (p.dephasing == DephasingForm::lindblad) {
        const double h = hermiticity_error(s.rho);
        if (!(h <= tol.hermiticity)) fail("Hermiticity", h);
    }
}

} // namespace detail

/// Fixed-step RK4. Calls `on_sample` at t = 0, every `sample_stride` steps and at
/// t_max. The step is shrunk so that an integer number of steps lands on t_max.
/// Throws IntegrationError if a sample leaves the physical manifold.
inline void integrate(const ModelParams& p, const Eigen::MatrixXcd& rho0, const TimeGrid& grid,
                      const std::function<void(const HybridState&)>& on_sample,
                      const IntegrationTolerances& tol = {}, bool enforce_step_bound = true) {
    p.validate();
    if (enforce_step_bound) grid.validate(p);
    else if (!(grid.dt > 0.0) || grid.sample_stride < 1) throw ValidationError("invalid time grid");
    HybridState st{rho0, 0.0};
    detail::check_state(p, st, tol);
    on_sample(st);
    const long steps = grid.steps();
    if (steps == 0) return;
    const double h = grid.t_max / static_cast<double>(steps);
    for (long i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * h;
        const Eigen::MatrixXcd k1 = rhs(p, st.rho, t);
        const Eigen::MatrixXcd k2 = rhs(p, st.rho + 0.5 * h * k1, t + 0.5 * h);
        const Eigen::MatrixXcd k3 = rhs(p, st.rho + 0.5 * h * k2, t + 0.5 * h);
        const Eigen::MatrixXcd k4 = rhs(p, st.rho + h * k3, t + h);
        st.rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        st.t = static_cast<double>(i + 1) * h;
        if ((i + 1) % grid.sample_stride == 0 || i + 1 == steps) {
            detail::check_state(p, st, tol);
            on_sample(st);
        }
    }
}

inline std::vector<HybridState> integrate(const ModelParams& p, const Eigen::MatrixXcd& rho0, const TimeGrid& grid,
                                          const IntegrationTolerances& tol = {}, bool enforce_step_bound = true) {
    std::vector<HybridState> out;
    integrate(p, rho0, grid, [&](const HybridState& s) { out.push_back(s); }, tol, enforce_step_bound);
    return out;
}

namespace detail {

/// Port amplitude combinations (alpha_{k,l} + i alpha_{k,r})/sqrt2 and (i alpha_{k,l} + alpha_{k,r})/sqrt2
/// in the form that appears inside the detection brackets.
struct PortFactors {
    std::vector<cplx> c, d;
};

inline PortFactors port_factors(const ModelParams& p, double t) {
    PortFactors f;
    const cplx i(0.0, 1.0);
    const double r = 1.0 / std::sqrt(2.0);
    for (int k = 0; k <= p.n_atoms; ++k) {
        const auto [al, ar] = light_amplitudes(p, k, t);
        f.c.push_back((al + i * ar) * r);
        f.d.push_back((i * al + ar) * r);
    }
    return f;
}

/// Detection brackets for the (k, k') block:
///   c: (a_kl a*_k'l + i a_kr a*_k'l - i a_kl a*_k'r + a_kr a*_k'r) / 2
///   d: (a_kl a*_k'l - i a_kr a*_k'l + i a_kl a*_k'r + a_kr a*_k'r) / 2
inline std::pair<cplx, cplx> detection_brackets(const ModelParams& p, int k, int kp, double t) {
    const cplx i(0.0, 1.0);
    const auto [akl, akr] = light_amplitudes(p, k, t);
    const auto [bl, br] = light_amplitudes(p, kp, t);
    const cplx c = (akl * std::conj(bl) + i * akr * std::conj(bl) - i * akl * std::conj(br) + akr * std::conj(br)) / 2.0;
    const cplx d = (akl * std::conj(bl) - i * akr * std::conj(bl) + i * akl * std::conj(br) + akr * std::conj(br)) / 2.0;
    return {c, d};
}

inline double detection_log_prefactor(const ModelParams& p, const DetectionOutcome& o) {
    return -p.light.intensity() - log_factorial(o.n_c) - log_factorial(o.n_d);
}

} // namespace detail

/// P(n_c, n_d) = Tr[rho_BS |n_c n_d><n_c n_d|].
inline double detection_probability_me(const ModelParams& p, const HybridState& state,
                                       const DetectionOutcome& outcome) {
    detail::check_outcome(outcome);
    const double pref = detail::detection_log_prefactor(p, outcome);
    std::vector<double> logs;
    for (int k = 0; k <= p.n_atoms; ++k) {
        const auto [bc, bd] = detail::detection_brackets(p, k, k, state.t);
        const double scale = std::max(1.0, p.light.intensity());
        if (std::abs(bc.imag()) > 1e-10 * scale || std::abs(bd.imag()) > 1e-10 * scale)
            throw ValidationError("diagonal detection bracket not real");
        const double pk = state.rho(k, k).real();
        if (pk <= 0.0) continue;
        const LogAmp term = LogAmp::from(bc.real()).pow(outcome.n_c) * LogAmp::from(bd.real()).pow(outcome.n_d);
        if (term.is_zero()) continue;
        logs.push_back(std::log(pk) + term.log_mag + pref);
    }
    return std::clamp(std::exp(log_sum_exp(logs)), 0.0, 1.0);
}

/// Atomic density matrix conditioned on detecting `outcome`, normalized to unit trace.
inline Eigen::MatrixXcd conditional_density(const ModelParams& p, const HybridState& state,
                                            const DetectionOutcome& outcome) {
    detail::check_outcome(outcome);
    const Eigen::Index dim = p.n_atoms + 1;
    std::vector<LogAmp> w(static_cast<std::size_t>(dim * dim));
    double mx = kNegInf;
    for (int kp = 0; kp < dim; ++kp) {
        for (int k = 0; k < dim; ++k) {
            const auto [bc, bd] = detail::detection_brackets(p, k, kp, state.t);
            const LogAmp a = LogAmp::from(state.rho(k, kp)) * LogAmp::from(bc).pow(outcome.n_c) *
                             LogAmp::from(bd).pow(outcome.n_d);
            w[static_cast<std::size_t>(kp * dim + k)] = a;
            if (k == kp) mx = std::max(mx, a.log_mag);
        }
    }
    if (mx == kNegInf)
        throw ImpossibleOutcome("unreachable outcome (" + std::to_string(outcome.n_c) + ", " +
                                std::to_string(outcome.n_d) + "): zero detection probability");
    Eigen::MatrixXcd out(dim, dim);
    for (Eigen::Index kp = 0; kp < dim; ++kp)
        for (Eigen::Index k = 0; k < dim; ++k) out(k, kp) = w[static_cast<std::size_t>(kp * dim + k)].value(mx);
    const double tr = out.trace().real();
    if (!(tr > 0.0) || !std::isfinite(tr)) throw ImpossibleOutcome("unreachable outcome: non-positive trace");
    return out / tr;
}

/// Initial rho = |psi><psi| for the spin coherent state (alpha, beta).
inline Eigen::MatrixXcd initial_density(const GroundExcitedAmplitudes& ge, int n_atoms) {
    return build_spin_coherent(ge, n_atoms).projector();
}

} // namespace qndsq
