// config.hpp: experiment configuration: `key = value` lines grouped in [sections]
//
// Complex values are written "re,im", lists comma separated, angles in radians.
// '#' starts a comment. Unknown sections or keys are rejected.

#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qndsq/errors.hpp"
#include "qndsq/master_eq.hpp"
#include "qndsq/pure_measure.hpp"
#include "qndsq/spin_core.hpp"

namespace qndsq {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
    // [system]
    int n_atoms{30};
    GroundExcitedAmplitudes initial{cplx(std::sqrt(0.001), 0.0), cplx(std::sqrt(0.999), 0.0)};
    double omega{kPi / 4};
    double g{0.0};
    double gamma{0.0};
    DephasingForm dephasing{DephasingForm::lindblad};
    // [light]
    LightPair light{cplx(2.0, 0.0), cplx(2.0, 0.0)};
    // [time]
    double t_max{60.0 / (kPi / 4)};
    double dt{0.005};
    int sample_stride{10};
    // [measurement]
    std::optional<DetectionOutcome> outcome;  // empty -> most probable
    // [qgrid]
    bool qgrid_enabled{false};
    int n_theta{128};
    int n_phi{128};
    std::string qgrid_source{"pure"};
    std::vector<double> snapshot_times;
    // [sweep]
    std::string sweep_parameter{"g"};
    std::vector<double> sweep_values;
    // [validate]
    std::optional<std::vector<std::string>> validate_suites;  // empty optional -> all suites
    std::string inject_fault{"none"};
    // [output]
    std::string output_dir{"out"};
    // [tolerance]
    double trace_tol{1e-8};
    double hermiticity_tol{1e-9};

    InteractionSetting pure_setting() const { return {g, t_max}; }

    DetectionOutcome resolved_outcome() const { return outcome ? *outcome : most_probable_outcome(light); }

    ModelParams model_params() const { return {n_atoms, omega, g, gamma, dephasing, light}; }

    TimeGrid time_grid() const { return {t_max, dt, sample_stride}; }

    /// Re-checks every module invariant reachable from the configuration.
    void validate() const {
        if (n_atoms < 1) throw ConfigError("n_atoms must be >= 1");
        if (n_atoms > kDefaultMaxAtoms) throw ConfigError("n_atoms exceeds cutoff");
        GroundExcitedAmplitudes::make(initial.alpha, initial.beta);
        if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
        if (!(t_max >= 0.0)) throw ConfigError("t_max must be >= 0");
        if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
        if (sample_stride < 1) throw ConfigError("sample_stride must be >= 1");
        if (outcome && (outcome->n_c < 0 || outcome->n_d < 0)) throw ConfigError("outcome counts must be >= 0");
        if (n_theta < 16 || n_phi < 16) throw ConfigError("q-grid sizes must be >= 16");
        if (qgrid_source != "pure" && qgrid_source != "master") throw ConfigError("qgrid source must be pure|master");
        if (sweep_parameter != "g" && sweep_parameter != "gamma" && sweep_parameter != "gt")
            throw ConfigError("sweep parameter must be g|gamma|gt");
        if (inject_fault != "none" && inject_fault != "dt") throw ConfigError("inject_fault must be none|dt");
        if (!(trace_tol > 0.0) || !(hermiticity_tol > 0.0)) throw ConfigError("tolerances must be > 0");
    }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': not a number: '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError("key '" + key + "': trailing characters in '" + v + "'");
    return d;
}

inline long to_long(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != std::floor(d)) throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
    return static_cast<long>(d);
}

inline cplx to_complex(const std::string& key, const std::string& v) {
    const auto parts = split(v, ',');
    if (parts.size() == 1) return {to_double(key, parts[0]), 0.0};
    if (parts.size() == 2) return {to_double(key, parts[0]), to_double(key, parts[1])};
    throw ConfigError("key '" + key + "': expected 're,im', got '" + v + "'");
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& p : split(v, ',')) out.push_back(to_double(key, p));
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

} // namespace config_detail

inline DetectionOutcome parse_outcome(const std::string& v) {
    const auto parts = config_detail::split(v, ',');
    if (parts.size() != 2) throw ConfigError("outcome must be 'n_c,n_d' or 'auto'");
    const long nc = config_detail::to_long("outcome", parts[0]);
    const long nd = config_detail::to_long("outcome", parts[1]);
    if (nc < 0 || nd < 0) throw ConfigError("outcome counts must be >= 0");
    return {nc, nd};
}

/// Parses configuration text. Keys not mentioned keep their defaults
/// (N = 30, near-ground initial state, Omega = pi/4, no coupling).
inline ExperimentConfig parse_config(const std::string& text) {
    using namespace config_detail;
    static const std::map<std::string, std::set<std::string>> kSchema{
        {"system", {"n_atoms", "alpha", "beta", "theta", "phi", "omega", "g", "gamma", "dephasing"}},
        {"light", {"alpha_l", "alpha_r"}},
        {"time", {"t_max", "dt", "sample_stride"}},
        {"measurement", {"outcome"}},
        {"qgrid", {"enabled", "n_theta", "n_phi", "source", "snapshot_times"}},
        {"sweep", {"parameter", "values"}},
        {"validate", {"suites", "inject_fault"}},
        {"output", {"dir"}},
        {"tolerance", {"trace", "hermiticity"}},
    };
    std::map<std::string, std::string> kv;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!kSchema.count(section)) throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
        const std::string key = trim(line.substr(0, eq));
        if (!kSchema.at(section).count(key))
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "' in [" + section + "]");
        const std::string full = section + "." + key;
        if (kv.count(full)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + full + "'");
        kv[full] = trim(line.substr(eq + 1));
    }

    ExperimentConfig c;
    auto has = [&](const char* k) { return kv.count(k) > 0; };
    auto get = [&](const char* k) { return kv.at(k); };

    if (has("system.n_atoms")) c.n_atoms = static_cast<int>(to_long("n_atoms", get("system.n_atoms")));
    const bool ab = has("system.alpha") || has("system.beta");
    const bool tp = has("system.theta") || has("system.phi");
    if (ab && tp) throw ConfigError("give the initial state as (alpha, beta) or (theta, phi), not both");
    if (ab) {
        if (!has("system.alpha") || !has("system.beta")) throw ConfigError("both alpha and beta are required");
        const cplx a = to_complex("alpha", get("system.alpha")), b = to_complex("beta", get("system.beta"));
        const double n = std::norm(a) + std::norm(b);
        if (!(std::abs(n - 1.0) <= 1e-12)) throw ConfigError("|alpha|^2 + |beta|^2 != 1");
        c.initial = {a, b};
    }
    if (tp) {
        const double th = has("system.theta") ? to_double("theta", get("system.theta")) : 0.0;
        const double ph = has("system.phi") ? to_double("phi", get("system.phi")) : 0.0;
        try {
            c.initial = bloch_to_ge(BlochAngles::make(th, ph));
        } catch (const ValidationError& e) {
            throw ConfigError(e.what());
        }
    }
    if (has("system.omega")) c.omega = to_double("omega", get("system.omega"));
    if (has("system.g")) c.g = to_double("g", get("system.g"));
    if (has("system.gamma")) c.gamma = to_double("gamma", get("system.gamma"));
    if (has("system.dephasing")) {
        try {
            c.dephasing = parse_dephasing_form(get("system.dephasing"));
        } catch (const ValidationError& e) {
            throw ConfigError(e.what());
        }
    }
    if (has("light.alpha_l")) c.light.alpha_l = to_complex("alpha_l", get("light.alpha_l"));
    if (has("light.alpha_r")) c.light.alpha_r = to_complex("alpha_r", get("light.alpha_r"));
    if (has("time.t_max")) c.t_max = to_double("t_max", get("time.t_max"));
    if (has("time.dt")) c.dt = to_double("dt", get("time.dt"));
    if (has("time.sample_stride")) c.sample_stride = static_cast<int>(to_long("sample_stride", get("time.sample_stride")));
    if (has("measurement.outcome")) {
        const std::string v = get("measurement.outcome");
        if (v != "auto" && v != "most-probable") c.outcome = parse_outcome(v);
    }
    if (has("qgrid.enabled")) c.qgrid_enabled = to_bool("enabled", get("qgrid.enabled"));
    if (has("qgrid.n_theta")) c.n_theta = static_cast<int>(to_long("n_theta", get("qgrid.n_theta")));
    if (has("qgrid.n_phi")) c.n_phi = static_cast<int>(to_long("n_phi", get("qgrid.n_phi")));
    if (has("qgrid.source")) c.qgrid_source = get("qgrid.source");
    if (has("qgrid.snapshot_times")) c.snapshot_times = to_list("snapshot_times", get("qgrid.snapshot_times"));
    if (has("sweep.parameter")) c.sweep_parameter = get("sweep.parameter");
    if (has("sweep.values")) c.sweep_values = to_list("values", get("sweep.values"));
    if (has("validate.suites")) c.validate_suites = split(get("validate.suites"), ',');
    if (has("validate.inject_fault")) c.inject_fault = get("validate.inject_fault");
    if (has("output.dir")) c.output_dir = get("output.dir");
    if (has("tolerance.trace")) c.trace_tol = to_double("trace", get("tolerance.trace"));
    if (has("tolerance.hermiticity")) c.hermiticity_tol = to_double("hermiticity", get("tolerance.hermiticity"));
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

/// 17 significant digits, scientific notation.
inline std::string fmt_sci(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

inline std::string fmt_complex(cplx z) { return fmt_sci(z.real()) + "," + fmt_sci(z.imag()); }

/// Fully resolved configuration in the input syntax; re-parsing it reproduces the config.
inline std::string render_config(const ExperimentConfig& c) {
    std::ostringstream os;
    auto list = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_sci(v[i]);
        return s;
    };
    os << "[system]\n"
       << "n_atoms = " << c.n_atoms << "\n"
       << "alpha = " << fmt_complex(c.initial.alpha) << "\n"
       << "beta = " << fmt_complex(c.initial.beta) << "\n"
       << "omega = " << fmt_sci(c.omega) << "\n"
       << "g = " << fmt_sci(c.g) << "\n"
       << "gamma = " << fmt_sci(c.gamma) << "\n"
       << "dephasing = " << to_string(c.dephasing) << "\n"
       << "[light]\n"
       << "alpha_l = " << fmt_complex(c.light.alpha_l) << "\n"
       << "alpha_r = " << fmt_complex(c.light.alpha_r) << "\n"
       << "[time]\n"
       << "t_max = " << fmt_sci(c.t_max) << "\n"
       << "dt = " << fmt_sci(c.dt) << "\n"
       << "sample_stride = " << c.sample_stride << "\n"
       << "[measurement]\n"
       << "outcome = " << (c.outcome ? std::to_string(c.outcome->n_c) + "," + std::to_string(c.outcome->n_d) : "auto") << "\n"
       << "[qgrid]\n"
       << "enabled = " << (c.qgrid_enabled ? "true" : "false") << "\n"
       << "n_theta = " << c.n_theta << "\n"
       << "n_phi = " << c.n_phi << "\n"
       << "source = " << c.qgrid_source << "\n"
       << "snapshot_times = " << list(c.snapshot_times) << "\n"
       << "[sweep]\n"
       << "parameter = " << c.sweep_parameter << "\n"
       << "values = " << list(c.sweep_values) << "\n"
       << "[validate]\n";
    if (c.validate_suites) {
        os << "suites = ";
        for (std::size_t i = 0; i < c.validate_suites->size(); ++i) os << (i ? "," : "") << (*c.validate_suites)[i];
        os << "\n";
    }
    os << "inject_fault = " << c.inject_fault << "\n"
       << "[output]\n"
       << "dir = " << c.output_dir << "\n"
       << "[tolerance]\n"
       << "trace = " << fmt_sci(c.trace_tol) << "\n"
       << "hermiticity = " << fmt_sci(c.hermiticity_tol) << "\n";
    return os.str();
}

} // namespace qndsq
