#include <cmath>

#include <gtest/gtest.h>

#include "qndsq/config.hpp"

using namespace qndsq;

TEST(Config, DefaultsAreValid) {
    const ExperimentConfig c = parse_config("");
    EXPECT_EQ(c.n_atoms, 30);
    EXPECT_NEAR(std::norm(c.initial.alpha), 0.001, 1e-15);
    EXPECT_EQ(c.dephasing, DephasingForm::lindblad);
    EXPECT_FALSE(c.outcome.has_value());
    EXPECT_EQ(c.resolved_outcome(), (DetectionOutcome{4, 4}));
}

TEST(Config, ParsesSectionsAndComplexValues) {
    const ExperimentConfig c = parse_config(R"(
# comment line
[system]
n_atoms = 12   # trailing comment
alpha = 0,0.6
beta = 0.8,0
g = 0.25
dephasing = literal
[light]
alpha_l = 1.5,-0.5
alpha_r = 2
[measurement]
outcome = 3,7
[qgrid]
enabled = yes
snapshot_times = 0.5, 1.5
)");
    EXPECT_EQ(c.n_atoms, 12);
    EXPECT_EQ(c.initial.alpha, cplx(0.0, 0.6));
    EXPECT_EQ(c.light.alpha_l, cplx(1.5, -0.5));
    EXPECT_EQ(c.light.alpha_r, cplx(2.0, 0.0));
    EXPECT_EQ(c.dephasing, DephasingForm::literal);
    EXPECT_EQ(c.resolved_outcome(), (DetectionOutcome{3, 7}));
    EXPECT_TRUE(c.qgrid_enabled);
    ASSERT_EQ(c.snapshot_times.size(), 2u);
    EXPECT_EQ(c.snapshot_times[1], 1.5);
}

TEST(Config, BlochAnglesForm) {
    const ExperimentConfig c = parse_config("[system]\ntheta = 1.5707963267948966\nphi = 0\n");
    EXPECT_NEAR(std::abs(c.initial.alpha), std::sqrt(0.5), 1e-15);
    EXPECT_THROW(parse_config("[system]\ntheta = 1\nalpha = 0\nbeta = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("[system]\ntheta = 4\n"), ConfigError);
}

TEST(Config, RejectsUnknownAndMalformed) {
    EXPECT_THROW(parse_config("[system]\nn_atom = 3\n"), ConfigError);
    EXPECT_THROW(parse_config("[sytem]\nn_atoms = 3\n"), ConfigError);
    EXPECT_THROW(parse_config("n_atoms = 3\n"), ConfigError);
    EXPECT_THROW(parse_config("[system]\nn_atoms 3\n"), ConfigError);
    EXPECT_THROW(parse_config("[system]\nn_atoms = 3x\n"), ConfigError);
    EXPECT_THROW(parse_config("[system]\nn_atoms = 2.5\n"), ConfigError);
    EXPECT_THROW(parse_config("[system]\nn_atoms = 3\nn_atoms = 4\n"), ConfigError);
    EXPECT_THROW(parse_config("[light]\nalpha_l = 1,2,3\n"), ConfigError);
    EXPECT_THROW(parse_config("[system\n"), ConfigError);
}

TEST(Config, RechecksInvariants) {
    EXPECT_THROW(parse_config("[system]\nalpha = 1\nbeta = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("[system]\nn_atoms = 0\n"), ConfigError);
    EXPECT_THROW(parse_config("[system]\ngamma = -1\n"), ConfigError);
    EXPECT_THROW(parse_config("[time]\ndt = 0\n"), ConfigError);
    EXPECT_THROW(parse_config("[measurement]\noutcome = -1,2\n"), ConfigError);
    EXPECT_THROW(parse_config("[qgrid]\nn_theta = 8\n"), ConfigError);
    EXPECT_THROW(parse_config("[sweep]\nparameter = omega\n"), ConfigError);
    EXPECT_THROW(parse_config("[system]\ndephasing = quadratic\n"), ConfigError);
}

TEST(Config, RenderRoundTrips) {
    const ExperimentConfig a = parse_config(R"(
[system]
n_atoms = 7
alpha = 0.6,0.1
beta = 0.7937253933193772,0
g = 0.123456789012345678
[light]
alpha_l = 1.1,0.3
[sweep]
values = 0.1, 0.2
[validate]
suites = fock
)");
    const ExperimentConfig b = parse_config(render_config(a));
    EXPECT_EQ(render_config(a), render_config(b));
    EXPECT_EQ(a.g, b.g);
    EXPECT_EQ(a.initial.alpha, b.initial.alpha);
    EXPECT_EQ(a.light.alpha_l, b.light.alpha_l);
    ASSERT_TRUE(b.validate_suites.has_value());
    EXPECT_EQ(b.validate_suites->size(), 1u);
}

TEST(Config, EmptySuiteList) {
    const ExperimentConfig c = parse_config("[validate]\nsuites =\n");
    ASSERT_TRUE(c.validate_suites.has_value());
    EXPECT_TRUE(c.validate_suites->empty());
}

TEST(Format, SeventeenSignificantDigits) {
    EXPECT_EQ(fmt_sci(0.1), "1.0000000000000001e-01");
    EXPECT_EQ(fmt_sci(-2.0), "-2.0000000000000000e+00");
    EXPECT_EQ(std::stod(fmt_sci(1.0 / 3.0)), 1.0 / 3.0);
}
