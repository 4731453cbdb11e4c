#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qndsq/master_eq.hpp"

using namespace qndsq;

namespace {

const LightPair kTwo{cplx(2.0, 0.0), cplx(2.0, 0.0)};

GroundExcitedAmplitudes near_ground() { return GroundExcitedAmplitudes::make(std::sqrt(0.001), std::sqrt(0.999)); }

Eigen::MatrixXcd random_density(int n, std::mt19937& rng) {
    std::normal_distribution<double> n01;
    Eigen::MatrixXcd a(n + 1, n + 1);
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) a(i, j) = cplx(n01(rng), n01(rng));
    Eigen::MatrixXcd rho = a * a.adjoint();
    return rho / rho.trace().real();
}

} // namespace

TEST(DephasingForm, Parsing) {
    EXPECT_EQ(parse_dephasing_form("lindblad"), DephasingForm::lindblad);
    EXPECT_EQ(parse_dephasing_form("literal"), DephasingForm::literal);
    EXPECT_THROW(parse_dephasing_form("other"), ValidationError);
}

TEST(ModelParams, Validation) {
    EXPECT_THROW((ModelParams{0, 1.0, 0.0, 0.0, DephasingForm::lindblad, kTwo}.validate()), ValidationError);
    EXPECT_THROW((ModelParams{3, 1.0, 0.0, -0.1, DephasingForm::lindblad, kTwo}.validate()), ValidationError);
}

TEST(TimeGrid, StepBound) {
    const ModelParams p{30, kPi / 4, 0.1 * kPi / 4 / 30, 0.3 * kPi / 4 / 30, DephasingForm::lindblad, kTwo};
    EXPECT_THROW((TimeGrid{1.0, 0.1, 1}.validate(p)), ValidationError);
    EXPECT_NO_THROW((TimeGrid{1.0, 0.05 / TimeGrid::stiffness(p), 1}.validate(p)));
    EXPECT_EQ((TimeGrid{1.0, 0.3, 1}.steps()), 4);
    EXPECT_EQ((TimeGrid{0.0, 0.3, 1}.steps()), 0);
}

TEST(LightAmplitudes, Examples) {
    const ModelParams p{6, 1.0, 0.25, 0.0, DephasingForm::lindblad, {cplx(1.0, 0.5), cplx(-0.3, 2.0)}};
    const auto [l0, r0] = light_amplitudes(p, 2, 0.0);
    EXPECT_NEAR(std::abs(l0 - p.light.alpha_l), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(r0 - p.light.alpha_r), 0.0, 1e-15);
    const auto [lm, rm] = light_amplitudes(p, 3, 7.7);
    EXPECT_NEAR(std::abs(lm - p.light.alpha_l), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(rm - p.light.alpha_r), 0.0, 1e-15);
    // (2k - N) g t / 2 = pi at k = 6, t = pi / (3 g)
    const auto [lp, rp] = light_amplitudes(p, 6, kPi / (3 * 0.25));
    EXPECT_NEAR(std::abs(lp + p.light.alpha_l), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(rp + p.light.alpha_r), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(light_amplitudes(p, 1, 3.3).first), std::abs(p.light.alpha_l), 1e-15);
    EXPECT_THROW(light_amplitudes(p, 7, 0.0), std::out_of_range);
}

TEST(CoherentOverlaps, Examples) {
    ModelParams p{4, 1.0, 1.0, 0.0, DephasingForm::lindblad, kTwo};
    const auto [a, b] = coherent_overlaps(p, 0.0);
    EXPECT_NEAR(std::abs(a - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(b - 1.0), 0.0, 1e-15);
    const auto [c, d] = coherent_overlaps(p, kPi);
    EXPECT_NEAR(std::abs(c - std::exp(-16.0)), 0.0, 1e-20);
    for (double t : {0.3, 1.1, 2.9}) {
        const auto [op, om] = coherent_overlaps(p, t);
        EXPECT_NEAR(std::abs(op), std::exp(-8.0 * (1.0 - std::cos(t))), 1e-14);
        EXPECT_NEAR(std::abs(om - std::conj(op)), 0.0, 1e-14);
        EXPECT_LE(std::abs(op), 1.0);
    }
}

TEST(Rhs, ReducesToPrecessionWithoutCoupling) {
    std::mt19937 rng(5);
    const int n = 7;
    const ModelParams p{n, 0.9, 0.0, 0.0, DephasingForm::lindblad, kTwo};
    const SpinOperators j = spin_operator_matrices(n);
    const Eigen::MatrixXcd rho = random_density(n, rng);
    const Eigen::MatrixXcd want = cplx(0.0, -p.omega) * (j.jz * rho - rho * j.jz);
    EXPECT_LT((rhs(p, rho, 1.3) - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Rhs, VanishesWithoutTunnelingOrDephasing) {
    std::mt19937 rng(6);
    const ModelParams p{5, 0.0, 0.4, 0.0, DephasingForm::lindblad, kTwo};
    EXPECT_EQ(rhs(p, random_density(5, rng), 0.7).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Rhs, TracelessAndHermitianInLindbladMode) {
    std::mt19937 rng(8);
    for (int n : {1, 4, 12}) {
        const ModelParams p{n, 0.8, 0.05, 0.02, DephasingForm::lindblad, kTwo};
        const Eigen::MatrixXcd d = rhs(p, random_density(n, rng), 2.1);
        EXPECT_LT(std::abs(d.trace()), 1e-12);
        EXPECT_LT((d - d.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_TRUE(d.allFinite());
    }
}

TEST(Integrate, PureDephasingClosedForm) {
    std::mt19937 rng(9);
    const int n = 6;
    const ModelParams p{n, 0.0, 0.0, 0.2, DephasingForm::lindblad, kTwo};
    const Eigen::MatrixXcd rho0 = random_density(n, rng);
    const TimeGrid grid{3.0, 0.001, 500};
    const auto samples = integrate(p, rho0, grid);
    ASSERT_EQ(samples.size(), 7u);
    Eigen::MatrixXd prev = rho0.cwiseAbs();
    for (const auto& s : samples) {
        for (int a = 0; a <= n; ++a) {
            for (int b = 0; b <= n; ++b) {
                const cplx want = rho0(a, b) * std::exp(-0.5 * p.gamma * (a - b) * (a - b) * s.t);
                EXPECT_NEAR(std::abs(s.rho(a, b) - want), 0.0, 1e-10);
                if (a != b) EXPECT_LE(std::abs(s.rho(a, b)), prev(a, b) + 1e-15);
                else EXPECT_NEAR(std::abs(s.rho(a, a) - rho0(a, a)), 0.0, 1e-12);
            }
        }
        prev = s.rho.cwiseAbs();
    }
}

TEST(Integrate, MatchesAnalyticPrecession) {
    const int n = 30;
    const ModelParams p{n, kPi / 4, 0.0, 0.0, DephasingForm::lindblad, kTwo};
    const TimeGrid grid{60.0 / p.omega, 0.01, 100};
    for (const auto& s : integrate(p, initial_density(near_ground(), n), grid)) {
        const SpinMoments m = moments_from_density(s.rho);
        const SpinMoments a = analytic_precession(near_ground(), n, p.omega, s.t);
        const auto rel = [](double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1.0); };
        EXPECT_LT(rel(m.jx_mean, a.jx_mean), 1e-6);
        EXPECT_LT(rel(m.jy_mean, a.jy_mean), 1e-6);
        EXPECT_LT(rel(m.jz_mean, a.jz_mean), 1e-6);
        EXPECT_LT(rel(m.jx_var, a.jx_var), 1e-6);
        EXPECT_LT(rel(m.jy_var, a.jy_var), 1e-6);
        EXPECT_LT(rel(m.jz_var, a.jz_var), 1e-6);
        EXPECT_LT(trace_error(s.rho), 1e-8);
    }
}

TEST(Integrate, StepHalvingConverges) {
    const int n = 10;
    const ModelParams p{n, kPi / 4, 0.1 * kPi / 4 / n, 0.01, DephasingForm::lindblad, kTwo};
    const auto coarse = integrate(p, initial_density(near_ground(), n), TimeGrid{10.0, 0.02, 100});
    const auto fine = integrate(p, initial_density(near_ground(), n), TimeGrid{10.0, 0.01, 200});
    ASSERT_EQ(coarse.size(), fine.size());
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        EXPECT_NEAR(coarse[i].t, fine[i].t, 1e-12);
        const SpinMoments a = moments_from_density(coarse[i].rho), b = moments_from_density(fine[i].rho);
        EXPECT_LT(std::abs(a.jx_var - b.jx_var), 1e-8);
        EXPECT_LT(std::abs(a.jy_mean - b.jy_mean), 1e-8);
    }
}

TEST(Integrate, InvariantsAlongTrajectory) {
    const int n = 30;
    const double omega = kPi / 4, g = 0.1 * omega / n;
    for (double gamma : {0.0, 0.1 * g, 3.0 * g}) {
        const ModelParams p{n, omega, g, gamma, DephasingForm::lindblad, kTwo};
        const TimeGrid grid{60.0 / omega, std::min(0.01, 0.05 / TimeGrid::stiffness(p)), 200};
        const DetectionOutcome o{4, 4};
        integrate(p, initial_density(near_ground(), n), grid, [&](const HybridState& s) {
            EXPECT_LT(trace_error(s.rho), 1e-8);
            EXPECT_LT(hermiticity_error(s.rho), 1e-9);
            const Eigen::MatrixXcd rc = conditional_density(p, s, o);
            EXPECT_LT(std::abs(rc.trace() - 1.0), 1e-9);
            EXPECT_LT(hermiticity_error(rc), 1e-9);
            const Eigen::MatrixXcd herm = 0.5 * (rc + rc.adjoint());
            EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(herm).eigenvalues().minCoeff(), -1e-8);
            const SpinMoments m = moments_from_density(rc);
            EXPECT_LE(std::abs(m.jx_mean), n / 2.0 + 1e-9);
            EXPECT_LE(m.jz_var, n * n / 4.0);
            EXPECT_FALSE(m.negative_variance_flag);
        });
    }
}

TEST(Integrate, AbortsOnDrift) {
    const int n = 5;
    const ModelParams p{n, kPi / 4, 0.1 * kPi / 4 / n, 0.0, DephasingForm::lindblad, kTwo};
    const TimeGrid bad{60.0 / p.omega, 2.5 / TimeGrid::stiffness(p), 1};
    EXPECT_THROW(integrate(p, initial_density(near_ground(), n), bad), ValidationError);
    try {
        integrate(p, initial_density(near_ground(), n), bad, {}, false);
        FAIL() << "expected an integration error";
    } catch (const IntegrationError& e) {
        EXPECT_GT(e.time(), 0.0);
        EXPECT_GT(std::abs(e.drift()), 0.0);
    }
}

TEST(Integrate, LiteralModeRuns) {
    const int n = 6;
    const ModelParams p{n, kPi / 4, 0.1 * kPi / 4 / n, 0.01, DephasingForm::literal, kTwo};
    const auto s = integrate(p, initial_density(near_ground(), n), TimeGrid{5.0, 0.01, 100});
    EXPECT_LT(trace_error(s.back().rho), 1e-8);
    // printed term is not Hermiticity preserving
    EXPECT_GT(hermiticity_error(s.back().rho), 1e-6);
}

TEST(DetectionProbabilityMe, PoissonProductAtStart) {
    std::mt19937 rng(10);
    const ModelParams p{5, 0.5, 0.3, 0.0, DephasingForm::lindblad, kTwo};
    const HybridState s{random_density(5, rng), 0.0};
    auto poisson = [](double mu, long n) { return std::exp(n * std::log(mu) - mu - std::lgamma(n + 1.0)); };
    for (long nc : {0L, 3L, 4L, 8L})
        for (long nd : {1L, 4L}) EXPECT_NEAR(detection_probability_me(p, s, {nc, nd}), poisson(4, nc) * poisson(4, nd), 1e-14);
}

TEST(DetectionProbabilityMe, CompleteOverGrid) {
    const ModelParams p{8, 0.5, 0.3, 0.0, DephasingForm::lindblad, kTwo};
    const HybridState s{initial_density(near_ground(), 8), 1.7};
    double sum = 0.0;
    // at gt = 0.51 one port can carry up to twice the mean, hence the wider grid
    for (long nc = 0; nc <= 40; ++nc)
        for (long nd = 0; nd <= 40; ++nd) sum += detection_probability_me(p, s, {nc, nd});
    EXPECT_NEAR(sum, 1.0, 1e-6);
}

TEST(ConditionalDensity, NoCouplingLeavesStateUnchanged) {
    std::mt19937 rng(12);
    const ModelParams p{6, 0.5, 0.0, 0.0, DephasingForm::lindblad, kTwo};
    const HybridState s{random_density(6, rng), 4.0};
    EXPECT_LT((conditional_density(p, s, {3, 5}) - s.rho).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ConditionalDensity, UnreachableOutcome) {
    const ModelParams p{3, 0.5, 0.1, 0.0, DephasingForm::lindblad, LightPair{}};
    const HybridState s{initial_density(near_ground(), 3), 1.0};
    EXPECT_THROW(conditional_density(p, s, {2, 0}), ImpossibleOutcome);
}
