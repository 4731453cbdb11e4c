// husimi.hpp: Husimi Q function over the Bloch sphere
//
// Q(theta, phi) = (N+1)/(4 pi) <theta,phi| rho |theta,phi>, where |theta,phi> is the
// spin coherent state with alpha = sin(theta/2) e^{-i phi/2}, beta = cos(theta/2) e^{i phi/2}.
// Emitted data keeps +z (excited mode) at theta = pi; no axis flip is applied.

#pragma once

#include <cmath>
#include <complex>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "qndsq/errors.hpp"
#include "qndsq/log_math.hpp"
#include "qndsq/spin_core.hpp"

namespace qndsq {

/// <theta,phi | k, N-k> for k = 0..N.
inline Eigen::VectorXcd coherent_overlap_row(const BlochAngles& angles, int n_atoms) {
    return build_spin_coherent(bloch_to_ge(angles), n_atoms).amplitudes.conjugate();
}

inline double husimi_prefactor(int n_atoms) { return (n_atoms + 1) / (4.0 * kPi); }

inline double q_pure(const AtomState& state, const BlochAngles& angles) {
    const cplx ov = (coherent_overlap_row(angles, state.n_atoms).transpose() * state.amplitudes)(0, 0);
    return husimi_prefactor(state.n_atoms) * std::norm(ov);
}

inline double q_mixed(const Eigen::MatrixXcd& rho, const BlochAngles& angles) {
    const int n = static_cast<int>(rho.rows()) - 1;
    const Eigen::VectorXcd row = coherent_overlap_row(angles, n);
    // <theta,phi|rho|theta,phi> = row^T rho conj(row)
    const double v = (row.transpose() * rho * row.conjugate())(0, 0).real();
    return std::max(0.0, husimi_prefactor(n) * v);
}

struct QGrid {
    int n_theta{0};
    int n_phi{0};
    Eigen::VectorXd theta;   // cell centres (i + 1/2) pi / n_theta
    Eigen::VectorXd phi;     // 2 pi j / n_phi
    Eigen::MatrixXd values;  // (i, j) -> Q(theta_i, phi_j)
    Eigen::MatrixXd weights; // sin(theta_i) dtheta dphi

    double normalization() const { return values.cwiseProduct(weights).sum(); }

    /// Grid cell holding the largest Q value.
    std::pair<Eigen::Index, Eigen::Index> argmax() const {
        Eigen::Index i = 0, j = 0;
        values.maxCoeff(&i, &j);
        return {i, j};
    }
};

using QSource = std::variant<AtomState, Eigen::MatrixXcd>;

inline QGrid q_grid(const QSource& source, int n_theta, int n_phi) {
    if (n_theta < 16 || n_phi < 16) throw ValidationError("Q grid needs at least 16 points per axis");
    QGrid g;
    g.n_theta = n_theta;
    g.n_phi = n_phi;
    g.theta.resize(n_theta);
    g.phi.resize(n_phi);
    g.values.resize(n_theta, n_phi);
    g.weights.resize(n_theta, n_phi);
    const double dth = kPi / n_theta, dph = 2.0 * kPi / n_phi;
    for (int i = 0; i < n_theta; ++i) g.theta[i] = (i + 0.5) * dth;
    for (int j = 0; j < n_phi; ++j) g.phi[j] = j * dph;

    const bool pure = std::holds_alternative<AtomState>(source);
    const int n = pure ? std::get<AtomState>(source).n_atoms : static_cast<int>(std::get<Eigen::MatrixXcd>(source).rows()) - 1;
    const double pref = husimi_prefactor(n);
    for (int i = 0; i < n_theta; ++i) {
        for (int j = 0; j < n_phi; ++j) {
            g.weights(i, j) = std::sin(g.theta[i]) * dth * dph;
            const Eigen::VectorXcd row = coherent_overlap_row({g.theta[i], g.phi[j]}, n);
            double v = 0.0;
            if (pure) {
                v = std::norm((row.transpose() * std::get<AtomState>(source).amplitudes)(0, 0));
            } else {
                v = (row.transpose() * std::get<Eigen::MatrixXcd>(source) * row.conjugate())(0, 0).real();
            }
            g.values(i, j) = std::max(0.0, pref * v);
        }
    }
    return g;
}

/// Q-weighted mean and variance of one Bloch-vector component.
/// axis: 0 -> x = sin th cos ph, 1 -> y = sin th sin ph, 2 -> z = -cos th.
inline std::pair<double, double> q_axis_mean_variance(const QGrid& g, int axis) {
    double w = 0.0, m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < g.n_theta; ++i) {
        for (int j = 0; j < g.n_phi; ++j) {
            const double th = g.theta[i], ph = g.phi[j];
            const double c = axis == 0 ? std::sin(th) * std::cos(ph) : axis == 1 ? std::sin(th) * std::sin(ph) : -std::cos(th);
            const double q = g.values(i, j) * g.weights(i, j);
            w += q;
            m1 += q * c;
            m2 += q * c * c;
        }
    }
    m1 /= w;
    m2 /= w;
    return {m1, m2 - m1 * m1};
}

} // namespace qndsq
