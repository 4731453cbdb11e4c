// experiment.hpp: runs configured experiments and writes CSV / report files
//
// Every CSV starts with '#' lines: artifact name, version, and the fully
// resolved configuration. Numbers use "%.16e"; rows come in a fixed order,
// so the same configuration always yields byte-identical files.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qndsq/config.hpp"
#include "qndsq/husimi.hpp"
#include "qndsq/master_eq.hpp"
#include "qndsq/pure_measure.hpp"
#include "qndsq/spin_core.hpp"
#include "qndsq/validation.hpp"

namespace qndsq {

struct RunResult {
    std::vector<std::string> files;
    std::vector<std::string> warnings;
    int exit_code{0};
};

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& artifact, const ExperimentConfig& cfg,
              const std::vector<std::string>& notes = {})
        : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
        out_ << "# artifact: " << artifact << "\n";
        out_ << "# version: qndsq " << kVersion << "\n";
        for (const auto& n : notes) out_ << "# note: " << n << "\n";
        out_ << "# config:\n";
        std::istringstream cfg_text(render_config(cfg));
        std::string line;
        while (std::getline(cfg_text, line)) out_ << "#   " << line << "\n";
    }

    void columns(const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i) out_ << (i ? "," : "") << names[i];
        out_ << "\n";
    }

    /// Integer-valued leading fields are written as integers, the rest with fmt_sci.
    void row(const std::vector<long>& ints, const std::vector<double>& reals) {
        bool first = true;
        for (long v : ints) {
            out_ << (first ? "" : ",") << v;
            first = false;
        }
        for (double v : reals) {
            out_ << (first ? "" : ",") << fmt_sci(v);
            first = false;
        }
        out_ << "\n";
    }

    std::string path() const { return path_.string(); }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

/// First downward crossing of `threshold`: the series must have been at or above
/// it before dropping below. Linear interpolation between samples; NaN if none.
inline double first_crossing(const std::vector<double>& x, const std::vector<double>& y, double threshold) {
    for (std::size_t i = 1; i < y.size(); ++i) {
        if (y[i - 1] >= threshold && y[i] < threshold) {
            const double f = (y[i - 1] - threshold) / (y[i - 1] - y[i]);
            return x[i - 1] + f * (x[i] - x[i - 1]);
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// Normalized variance threshold below which a spin coherent state precessing
/// about z can never reach: 1 - 4|alpha beta|^2.
inline double precession_floor(const GroundExcitedAmplitudes& ge) {
    const double ab = std::abs(ge.alpha) * std::abs(ge.beta);
    return 1.0 - 4.0 * ab * ab;
}

namespace experiment_detail {

inline std::filesystem::path prepare_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_qgrid(CsvWriter& w, const QGrid& g) {
    w.columns({"theta", "phi", "q"});
    for (int i = 0; i < g.n_theta; ++i)
        for (int j = 0; j < g.n_phi; ++j) w.row({}, {g.theta[i], g.phi[j], g.values(i, j)});
}

inline std::vector<std::string> qgrid_notes(const QGrid& g) {
    return {"theta at cell centres, phi = 2 pi j / n_phi; +z (excited mode) at theta = pi, no axis flip",
            "quadrature normalization = " + fmt_sci(g.normalization())};
}

} // namespace experiment_detail

// ---------------------------------------------------------------------------
// Pure-state model

struct PureRun {
    DetectionOutcome outcome;
    double probability{0.0};
    AtomState conditional;
    Eigen::VectorXd p_exact;
    Eigen::VectorXd p_gaussian;  // NaN where the Gaussian form is undefined
};

/// Conditional pmf of k for interaction gt = g * t_max.
inline PureRun pure_conditional(const ExperimentConfig& cfg, std::vector<std::string>* warnings = nullptr) {
    const AtomState psi = build_spin_coherent(cfg.initial, cfg.n_atoms);
    const InteractionSetting setting = cfg.pure_setting();
    const DetectionOutcome o = cfg.resolved_outcome();
    PureRun r{o, detection_probability(psi, cfg.light, setting, o), conditional_state(psi, cfg.light, setting, o), {}, {}};
    r.p_exact = r.conditional.populations();
    r.p_gaussian = Eigen::VectorXd::Constant(cfg.n_atoms + 1, std::numeric_limits<double>::quiet_NaN());
    try {
        const ConditionalGaussian cg = conditional_gaussian(cfg.initial, cfg.n_atoms, cfg.light, setting, o);
        if (cg.sigma > 0.0)
            for (int k = 0; k <= cfg.n_atoms; ++k) r.p_gaussian[k] = cg.pdf(k);
    } catch (const AsymptoticDomainError& e) {
        if (warnings) warnings->push_back(std::string("Gaussian column left empty: ") + e.what());
    }
    if (warnings) {
        if (o.n_c < 10 || o.n_d < 10)
            warnings->push_back("photon counts below 10: Gaussian approximation outside its regime");
        if (setting.gt() * std::sqrt(static_cast<double>(cfg.n_atoms)) > 0.5)
            warnings->push_back("gt*sqrt(N) > 0.5: Gaussian approximation outside its regime");
    }
    return r;
}

inline RunResult run_pure(const ExperimentConfig& cfg) {
    RunResult res;
    const auto dir = experiment_detail::prepare_dir(cfg.output_dir);
    const PureRun r = pure_conditional(cfg, &res.warnings);
    const std::string oc = std::to_string(r.outcome.n_c) + "," + std::to_string(r.outcome.n_d);
    {
        CsvWriter w(dir / "conditional_pmf.csv", "conditional_pmf", cfg,
                    {"outcome = " + oc, "detection probability = " + fmt_sci(r.probability)});
        w.columns({"k", "p_exact", "p_gaussian"});
        for (int k = 0; k <= cfg.n_atoms; ++k) w.row({k}, {r.p_exact[k], r.p_gaussian[k]});
        res.files.push_back(w.path());
    }
    {
        const AtomState psi = build_spin_coherent(cfg.initial, cfg.n_atoms);
        const long n_max = outcome_cutoff(cfg.light);
        const Eigen::MatrixXd grid = detection_grid(psi, cfg.light, cfg.pure_setting(), n_max);
        CsvWriter w(dir / "detection_grid.csv", "detection_grid", cfg,
                    {"cutoff = " + std::to_string(n_max), "grid sum = " + fmt_sci(grid.sum())});
        w.columns({"n_c", "n_d", "p"});
        for (long nc = 0; nc <= n_max; ++nc)
            for (long nd = 0; nd <= n_max; ++nd) w.row({nc, nd}, {grid(nc, nd)});
        res.files.push_back(w.path());
    }
    if (cfg.qgrid_enabled) {
        const QGrid g = q_grid(r.conditional, cfg.n_theta, cfg.n_phi);
        CsvWriter w(dir / "qgrid.csv", "qgrid", cfg, experiment_detail::qgrid_notes(g));
        experiment_detail::write_qgrid(w, g);
        res.files.push_back(w.path());
    }
    return res;
}

// ---------------------------------------------------------------------------
// Master equation

struct MasterSample {
    double t{0.0};
    SpinMoments conditional;
    double trace_err{0.0};
    double herm_err{0.0};
};

struct MasterRun {
    DetectionOutcome outcome;
    std::vector<MasterSample> samples;
    std::vector<std::pair<double, Eigen::MatrixXcd>> snapshots;  // (t, conditional density)
    Eigen::MatrixXcd final_conditional;

    std::vector<double> omega_t(double omega) const {
        std::vector<double> v;
        for (const auto& s : samples) v.push_back(omega * s.t);
        return v;
    }

    /// 4 (Delta J_axis)^2 / N over the samples.
    std::vector<double> var_norm(int axis, int n_atoms) const {
        std::vector<double> v;
        for (const auto& s : samples) {
            const double var = axis == 0 ? s.conditional.jx_var : axis == 1 ? s.conditional.jy_var : s.conditional.jz_var;
            v.push_back(4.0 * var / n_atoms);
        }
        return v;
    }
};

/// Integrates the master equation and conditions every sample on the configured
/// outcome. Snapshot times are physical times, taken at the nearest step.
inline MasterRun master_conditional(const ExperimentConfig& cfg, bool enforce_step_bound = true) {
    const ModelParams p = cfg.model_params();
    MasterRun run;
    run.outcome = cfg.resolved_outcome();
    const TimeGrid tg = cfg.time_grid();
    TimeGrid every_step = tg;
    every_step.sample_stride = 1;
    const long steps = tg.steps();
    const double h = steps > 0 ? tg.t_max / static_cast<double>(steps) : 0.0;
    std::vector<long> snap_steps;
    for (double ts : cfg.snapshot_times) {
        if (ts < 0.0 || ts > tg.t_max * (1.0 + 1e-12)) throw ConfigError("snapshot time outside [0, t_max]");
        snap_steps.push_back(h > 0.0 ? std::lround(ts / h) : 0);
    }
    const double herm_tol = cfg.dephasing == DephasingForm::lindblad ? cfg.hermiticity_tol
                                                                     : std::numeric_limits<double>::infinity();
    long step = 0;
    integrate(p, initial_density(cfg.initial, cfg.n_atoms), every_step,
              [&](const HybridState& s) {
                  const bool sample = step % tg.sample_stride == 0 || step == steps;
                  bool snap = false;
                  for (long ss : snap_steps) snap = snap || ss == step;
                  if (sample || snap || step == steps) {
                      const Eigen::MatrixXcd rc = conditional_density(p, s, run.outcome);
                      if (sample)
                          run.samples.push_back({s.t, moments_from_density(rc, herm_tol), trace_error(s.rho),
                                                 hermiticity_error(s.rho)});
                      for (long ss : snap_steps)
                          if (ss == step) run.snapshots.emplace_back(s.t, rc);
                      if (step == steps) run.final_conditional = rc;
                  }
                  ++step;
              },
              IntegrationTolerances{cfg.trace_tol, cfg.hermiticity_tol, 1e-10}, enforce_step_bound);
    return run;
}

inline RunResult run_master(const ExperimentConfig& cfg) {
    RunResult res;
    const auto dir = experiment_detail::prepare_dir(cfg.output_dir);
    const MasterRun run = master_conditional(cfg);
    const std::string oc = std::to_string(run.outcome.n_c) + "," + std::to_string(run.outcome.n_d);
    {
        CsvWriter w(dir / "timeseries.csv", "timeseries", cfg,
                    {"outcome = " + oc, "moments of the conditional density; var_norm = 4 var / N"});
        w.columns({"t", "omega_t", "jx_mean", "jy_mean", "jz_mean", "jx_var_norm", "jy_var_norm", "jz_var_norm",
                   "trace_err", "herm_err"});
        const double n = cfg.n_atoms;
        for (const auto& s : run.samples) {
            const auto& m = s.conditional;
            w.row({}, {s.t, cfg.omega * s.t, m.jx_mean, m.jy_mean, m.jz_mean, 4.0 * m.jx_var / n, 4.0 * m.jy_var / n,
                       4.0 * m.jz_var / n, s.trace_err, s.herm_err});
        }
        res.files.push_back(w.path());
    }
    if (cfg.qgrid_enabled) {
        for (std::size_t i = 0; i < run.snapshots.size(); ++i) {
            const auto& [t, rc] = run.snapshots[i];
            const QGrid g = q_grid(rc, cfg.n_theta, cfg.n_phi);
            auto notes = experiment_detail::qgrid_notes(g);
            notes.insert(notes.begin(), "snapshot t = " + fmt_sci(t) + ", omega_t = " + fmt_sci(cfg.omega * t));
            CsvWriter w(dir / ("qgrid_" + std::to_string(i) + ".csv"), "qgrid_snapshot", cfg, notes);
            experiment_detail::write_qgrid(w, g);
            res.files.push_back(w.path());
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Q function of the conditional state at t_max

inline RunResult run_qfunc(const ExperimentConfig& cfg) {
    RunResult res;
    const auto dir = experiment_detail::prepare_dir(cfg.output_dir);
    QGrid g;
    if (cfg.qgrid_source == "pure") {
        g = q_grid(pure_conditional(cfg).conditional, cfg.n_theta, cfg.n_phi);
    } else {
        ExperimentConfig c = cfg;
        c.snapshot_times.clear();
        g = q_grid(master_conditional(c).final_conditional, cfg.n_theta, cfg.n_phi);
    }
    auto notes = experiment_detail::qgrid_notes(g);
    notes.insert(notes.begin(), "source = " + cfg.qgrid_source + ", t = " + fmt_sci(cfg.t_max));
    CsvWriter w(dir / "qgrid.csv", "qgrid", cfg, notes);
    experiment_detail::write_qgrid(w, g);
    res.files.push_back(w.path());
    return res;
}

// ---------------------------------------------------------------------------
// Parameter sweeps

inline RunResult run_sweep(const ExperimentConfig& cfg) {
    RunResult res;
    const auto dir = experiment_detail::prepare_dir(cfg.output_dir);
    if (cfg.sweep_values.empty()) throw ConfigError("sweep needs at least one value");
    CsvWriter w(dir / "sweep.csv", "sweep", cfg, {"parameter = " + cfg.sweep_parameter});
    if (cfg.sweep_parameter == "gt") {
        w.columns({"gt", "p_outcome", "jx_var_norm", "jy_var_norm", "jz_var_norm", "local_maxima", "k_std"});
        for (double v : cfg.sweep_values) {
            ExperimentConfig c = cfg;
            c.t_max = 1.0;
            c.g = v;
            const PureRun r = pure_conditional(c);
            const SpinMoments m = moments_from_state(r.conditional);
            const double n = c.n_atoms;
            w.row({}, {v, r.probability, 4.0 * m.jx_var / n, 4.0 * m.jy_var / n, 4.0 * m.jz_var / n,
                       static_cast<double>(count_local_maxima(r.p_exact)), std::sqrt(pmf_mean_variance(r.p_exact).second)});
        }
    } else {
        w.columns({cfg.sweep_parameter, "min_jx_var_norm", "omega_t_at_min", "max_jy_var_norm", "first_crossing_omega_t"});
        for (double v : cfg.sweep_values) {
            ExperimentConfig c = cfg;
            (cfg.sweep_parameter == "g" ? c.g : c.gamma) = v;
            c.validate();
            const MasterRun run = master_conditional(c);
            const auto x = run.omega_t(c.omega);
            const auto vx = run.var_norm(0, c.n_atoms), vy = run.var_norm(1, c.n_atoms);
            const auto imin = static_cast<std::size_t>(std::min_element(vx.begin(), vx.end()) - vx.begin());
            w.row({}, {v, vx[imin], x[imin], *std::max_element(vy.begin(), vy.end()), first_crossing(x, vx, 1.0)});
        }
    }
    res.files.push_back(w.path());
    return res;
}

// ---------------------------------------------------------------------------
// Validation suites

inline const std::vector<std::string>& validation_suite_names() {
    static const std::vector<std::string> names{"fock", "crosscheck", "stirling", "normalization"};
    return names;
}

inline std::vector<OracleReport> run_suite(const std::string& suite, bool inject_dt_fault) {
    std::vector<OracleReport> out;
    const LightPair unit{cplx(1.0, 0.0), cplx(1.0, 0.0)};
    const GroundExcitedAmplitudes near_ground = GroundExcitedAmplitudes::make(std::sqrt(0.001), std::sqrt(0.999));
    if (suite == "fock") {
        const AtomState psi = build_spin_coherent(near_ground, 2);
        for (double gt : {0.0, 0.3}) out.push_back(fock_oracle_check(psi, unit, {gt, 1.0}));
        out.push_back(fock_oracle_check(psi, LightPair{}, {0.3, 1.0}));
    } else if (suite == "crosscheck") {
        const LightPair two{cplx(2.0, 0.0), cplx(2.0, 0.0)};
        out.push_back(me_vs_pure_crosscheck({30, 0.0, 0.1, 0.0, DephasingForm::lindblad, two},
                                            build_spin_coherent(near_ground, 30), {4, 4}, 1.0));
        const ModelParams p5{5, 0.0, 0.1, 0.0, DephasingForm::lindblad, two};
        const AtomState psi5 = build_spin_coherent(near_ground, 5);
        const long cut = outcome_cutoff(two);
        for (long nc = 0; nc <= cut; ++nc) {
            for (long nd = 0; nd <= cut; ++nd) {
                if (detection_probability(psi5, two, {0.1, 1.0}, {nc, nd}) <= 1e-8) continue;
                out.push_back(me_vs_pure_crosscheck(p5, psi5, {nc, nd}, 1.0));
            }
        }
    } else if (suite == "stirling") {
        const LightPair bright{cplx(std::sqrt(20.0), 0.0), cplx(std::sqrt(20.0), 0.0)};
        const auto r = stirling_regime_check(GroundExcitedAmplitudes::make(0.0, 1.0), 200, bright, {0.005, 1.0});
        out.insert(out.end(), r.begin(), r.end());
    } else if (suite == "normalization") {
        auto cases = default_normalization_cases();
        if (inject_dt_fault) cases.push_back(faulty_step_case());
        const auto r = normalization_sweep(cases);
        out.insert(out.end(), r.begin(), r.end());
    } else {
        throw ConfigError("unknown validation suite '" + suite + "'");
    }
    return out;
}

inline std::string report_line(const OracleReport& r) {
    std::string s = r.inconclusive ? "INCONCLUSIVE" : r.passed ? "PASS" : "FAIL";
    s += " " + r.name + " error=" + fmt_sci(r.max_abs_error) + " tol=" + fmt_sci(r.tolerance);
    for (const auto& [k, v] : r.context) s += " " + k + "=[" + v + "]";
    return s;
}

/// Runs the selected suites, writes validation_report.txt / .json and returns
/// exit code 0 iff no report failed. Inconclusive reports do not fail the run.
inline RunResult run_validate(const ExperimentConfig& cfg) {
    RunResult res;
    const auto dir = experiment_detail::prepare_dir(cfg.output_dir);
    const std::vector<std::string> suites = cfg.validate_suites ? *cfg.validate_suites : validation_suite_names();
    std::vector<std::pair<std::string, OracleReport>> reports;
    for (const auto& s : suites)
        for (auto& r : run_suite(s, cfg.inject_fault == "dt")) reports.emplace_back(s, std::move(r));

    std::ofstream txt(dir / "validation_report.txt", std::ios::binary | std::ios::trunc);
    nlohmann::ordered_json js;
    js["version"] = std::string("qndsq ") + kVersion;
    js["reports"] = nlohmann::ordered_json::array();
    int failed = 0, inconclusive = 0;
    for (const auto& [suite, r] : reports) {
        txt << suite << ": " << report_line(r) << "\n";
        if (r.inconclusive) ++inconclusive;
        else if (!r.passed) ++failed;
        nlohmann::ordered_json e;
        e["suite"] = suite;
        e["name"] = r.name;
        e["max_abs_error"] = std::isfinite(r.max_abs_error) ? nlohmann::ordered_json(r.max_abs_error) : nlohmann::ordered_json(fmt_sci(r.max_abs_error));
        e["tolerance"] = r.tolerance;
        e["passed"] = r.passed;
        e["inconclusive"] = r.inconclusive;
        e["context"] = r.context;
        js["reports"].push_back(e);
    }
    const std::string summary = std::to_string(reports.size()) + " reports, " + std::to_string(failed) + " failed, " +
                                std::to_string(inconclusive) + " inconclusive";
    txt << "summary: " << summary << "\n";
    js["summary"] = {{"total", reports.size()}, {"failed", failed}, {"inconclusive", inconclusive}};
    std::ofstream jf(dir / "validation_report.json", std::ios::binary | std::ios::trunc);
    jf << js.dump(2) << "\n";
    res.files = {(dir / "validation_report.txt").string(), (dir / "validation_report.json").string()};
    res.exit_code = failed == 0 ? 0 : 1;
    return res;
}

} // namespace qndsq
