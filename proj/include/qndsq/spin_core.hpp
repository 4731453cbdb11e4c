// spin_core.hpp: collective-spin basis, spin coherent states, moments, analytic precession
//
// Basis convention: |k> = |k, N-k> holds k atoms in the left well and is the
// J_x eigenstate with eigenvalue k - N/2. Ground/excited modes are
// b_g = (b_l + b_r)/sqrt2 and b_e = (b_l - b_r)/sqrt2, and
//   J_x = (e^+g + g^+e)/2, J_y = (e^+g - g^+e)/(2i), J_z = (e^+e - g^+g)/2,
// so that [J_x, J_y] = i J_z. In the left/right basis this makes
// J_z = -(b_l^+ b_r + b_r^+ b_l)/2.

#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qndsq/errors.hpp"
#include "qndsq/log_math.hpp"

namespace qndsq {

inline constexpr int kDefaultMaxAtoms = 20000;

inline constexpr double kStateNormTol = 1e-10;
inline constexpr double kDensityTraceTol = 1e-8;
inline constexpr double kHermiticityTol = 1e-9;
inline constexpr double kNegativeVarianceFlag = -1e-8;

/// Single-particle amplitudes on the excited (alpha) and ground (beta) modes.
struct GroundExcitedAmplitudes {
    cplx alpha{0.0, 0.0};
    cplx beta{1.0, 0.0};

    /// Validates |alpha|^2 + |beta|^2 = 1 within 1e-12.
    static GroundExcitedAmplitudes make(cplx alpha, cplx beta) {
        const double n = std::norm(alpha) + std::norm(beta);
        if (!(std::abs(n - 1.0) <= 1e-12))
            throw ValidationError("ground/excited amplitudes not normalized: |alpha|^2+|beta|^2 = " +
                                  std::to_string(n));
        return {alpha, beta};
    }

    /// arg(alpha) - arg(beta)
    double relative_phase() const { return std::arg(alpha) - std::arg(beta); }
};

struct BlochAngles {
    double theta{0.0};
    double phi{0.0};

    static BlochAngles make(double theta, double phi) {
        if (!(theta >= 0.0 && theta <= kPi) || !(phi >= 0.0 && phi < 2.0 * kPi))
            throw ValidationError("Bloch angles out of range");
        return {theta, phi};
    }
};

/// Pure atomic state over the J_x Fock basis, k = 0..N.
struct AtomState {
    int n_atoms{0};
    Eigen::VectorXcd amplitudes;

    static AtomState make(int n_atoms, Eigen::VectorXcd amplitudes) {
        if (n_atoms < 0) throw ValidationError("negative atom number");
        if (amplitudes.size() != n_atoms + 1) throw ValidationError("amplitude vector length != N+1");
        const double n = amplitudes.squaredNorm();
        if (!(std::abs(n - 1.0) <= kStateNormTol))
            throw ValidationError("atom state not normalized: norm^2 = " + std::to_string(n));
        return {n_atoms, std::move(amplitudes)};
    }

    Eigen::VectorXd populations() const { return amplitudes.cwiseAbs2(); }
    Eigen::MatrixXcd projector() const { return amplitudes * amplitudes.adjoint(); }
};

struct SpinMoments {
    double jx_mean{0}, jy_mean{0}, jz_mean{0};
    double jx_var{0}, jy_var{0}, jz_var{0};
    bool negative_variance_flag{false};  // a raw variance fell below -1e-8 before clamping
};

struct SpinOperators {
    Eigen::MatrixXcd jx, jy, jz;
};

/// (eta_l, eta_r) = ((alpha + beta)/sqrt2, (beta - alpha)/sqrt2)
inline std::pair<cplx, cplx> ge_to_lr_amplitudes(const GroundExcitedAmplitudes& ge) {
    const double s = 1.0 / std::sqrt(2.0);
    return {(ge.alpha + ge.beta) * s, (ge.beta - ge.alpha) * s};
}

inline GroundExcitedAmplitudes bloch_to_ge(const BlochAngles& a) {
    return {std::polar(std::sin(a.theta / 2.0), -a.phi / 2.0), std::polar(std::cos(a.theta / 2.0), a.phi / 2.0)};
}

/// Inverse of bloch_to_ge up to a global phase; phi is wrapped into [0, 2pi).
inline BlochAngles ge_to_bloch(const GroundExcitedAmplitudes& ge) {
    const double theta = 2.0 * std::atan2(std::abs(ge.alpha), std::abs(ge.beta));
    double phi = 0.0;
    if (std::abs(ge.alpha) > 0.0 && std::abs(ge.beta) > 0.0) {
        phi = std::arg(ge.beta) - std::arg(ge.alpha);
        phi = std::fmod(phi, 2.0 * kPi);
        if (phi < 0.0) phi += 2.0 * kPi;
        if (phi >= 2.0 * kPi) phi = 0.0;
    }
    return {theta, phi};
}

/// Log-domain amplitudes sqrt(C(N,k)) eta_l^k eta_r^(N-k), unnormalized.
inline std::vector<LogAmp> spin_coherent_log_amplitudes(cplx eta_l, cplx eta_r, int n_atoms) {
    const LogAmp ll = LogAmp::from(eta_l);
    const LogAmp lr = LogAmp::from(eta_r);
    std::vector<LogAmp> out(static_cast<std::size_t>(n_atoms) + 1);
    for (int k = 0; k <= n_atoms; ++k) {
        LogAmp a = ll.pow(k) * lr.pow(n_atoms - k);
        if (!a.is_zero()) a.log_mag += 0.5 * log_binomial(n_atoms, k);
        out[static_cast<std::size_t>(k)] = a;
    }
    return out;
}

inline AtomState build_spin_coherent(const GroundExcitedAmplitudes& ge, int n_atoms,
                                     int max_atoms = kDefaultMaxAtoms) {
    if (n_atoms < 0) throw ValidationError("negative atom number");
    if (n_atoms > max_atoms)
        throw CapacityError("atom number " + std::to_string(n_atoms) + " exceeds cutoff " +
                            std::to_string(max_atoms));
    const auto [eta_l, eta_r] = ge_to_lr_amplitudes(ge);
    const auto logs = spin_coherent_log_amplitudes(eta_l, eta_r, n_atoms);
    return AtomState::make(n_atoms, normalize_log_amplitudes(logs));
}

inline SpinOperators spin_operator_matrices(int n_atoms) {
    if (n_atoms < 0) throw ValidationError("negative atom number");
    const Eigen::Index d = n_atoms + 1;
    SpinOperators ops{Eigen::MatrixXcd::Zero(d, d), Eigen::MatrixXcd::Zero(d, d), Eigen::MatrixXcd::Zero(d, d)};
    const double half_n = 0.5 * n_atoms;
    for (Eigen::Index k = 0; k < d; ++k) ops.jx(k, k) = static_cast<double>(k) - half_n;
    for (Eigen::Index k = 0; k + 1 < d; ++k) {
        const double ladder = 0.5 * std::sqrt(static_cast<double>((k + 1) * (n_atoms - k)));
        ops.jz(k + 1, k) = -ladder;
        ops.jz(k, k + 1) = -ladder;
        ops.jy(k + 1, k) = cplx(0.0, -ladder);
        ops.jy(k, k + 1) = cplx(0.0, ladder);
    }
    return ops;
}

namespace detail {

inline double clamp_variance(double v, bool& flag) {
    if (v < kNegativeVarianceFlag) flag = true;
    return v < 0.0 ? 0.0 : v;
}

inline SpinMoments moments_with(const SpinOperators& ops, const Eigen::MatrixXcd& rho) {
    SpinMoments m;
    auto mean_var = [&](const Eigen::MatrixXcd& j, double& mean, double& var) {
        const Eigen::MatrixXcd jr = j * rho;
        mean = jr.trace().real();
        const double second = (j * jr).trace().real();
        var = clamp_variance(second - mean * mean, m.negative_variance_flag);
    };
    mean_var(ops.jx, m.jx_mean, m.jx_var);
    mean_var(ops.jy, m.jy_mean, m.jy_var);
    mean_var(ops.jz, m.jz_mean, m.jz_var);
    return m;
}

} // namespace detail

inline SpinMoments moments_from_state(const AtomState& state) {
    if (state.amplitudes.size() != state.n_atoms + 1) throw ValidationError("amplitude vector length != N+1");
    const double n = state.amplitudes.squaredNorm();
    if (!(std::abs(n - 1.0) <= kStateNormTol))
        throw ValidationError("atom state not normalized: norm^2 = " + std::to_string(n));
    return detail::moments_with(spin_operator_matrices(state.n_atoms), state.projector());
}

/// Hermiticity is checked to `herm_tol`; pass +inf to accept non-Hermitian input
/// (the Hermitian part then determines the moments).
inline SpinMoments moments_from_density(const Eigen::MatrixXcd& rho, double herm_tol = kHermiticityTol) {
    if (rho.rows() != rho.cols() || rho.rows() < 1) throw ValidationError("density matrix must be square");
    const double tr_err = std::abs(rho.trace() - cplx(1.0, 0.0));
    if (!(tr_err <= kDensityTraceTol))
        throw ValidationError("density matrix trace != 1 (error " + std::to_string(tr_err) + ")");
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (!(herm <= herm_tol)) throw ValidationError("density matrix not Hermitian (error " + std::to_string(herm) + ")");
    return detail::moments_with(spin_operator_matrices(static_cast<int>(rho.rows()) - 1), rho);
}

/// Closed-form moments of a spin coherent state precessing under H = Omega J_z.
inline SpinMoments analytic_precession(const GroundExcitedAmplitudes& ge, int n_atoms, double omega, double t) {
    const double n = n_atoms;
    const double ab = std::abs(ge.alpha) * std::abs(ge.beta);
    const double angle = omega * t - ge.relative_phase();
    const double c = std::cos(angle), s = std::sin(angle);
    SpinMoments m;
    m.jx_mean = n * ab * c;
    m.jy_mean = n * ab * s;
    m.jz_mean = n * (std::norm(ge.alpha) - std::norm(ge.beta)) / 2.0;
    m.jx_var = n / 4.0 * (1.0 - 4.0 * ab * ab * c * c);
    m.jy_var = n / 4.0 * (1.0 - 4.0 * ab * ab * s * s);
    m.jz_var = n * ab * ab;
    return m;
}

} // namespace qndsq
