#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wigmc/lattice_algebra.hpp"
#include "wigmc/markov.hpp"
#include "wigmc/wigner.hpp"

namespace wigmc {

using Json = nlohmann::json;

/// Fully resolved run description. Matrices and vectors are stored by the
/// descending site-label ordering; exactly one of `state` / `wigner_init`
/// is set.
struct RunConfig {
    int dim = 0;
    ComplexMatrix hamiltonian;
    std::optional<Eigen::VectorXcd> state;
    std::optional<RealMatrix> wigner_init;
    double hbar = 1.0;
    EngineMode mode = EngineMode::EventDriven;
    double dt = 0.0;
    std::size_t particles = 100000;
    std::uint64_t seed = 1;
    int workers = 1;
    std::uint64_t population_cap = 0;  // 0 -> particles
    double vanish_tolerance = 1e-12;
    std::vector<double> observation_times;
    std::string output_dir = "out";

    EngineConfig engine_config() const {
        EngineConfig cfg;
        cfg.mode = mode;
        cfg.dt = dt;
        cfg.population_cap = population_cap;
        cfg.vanish_tolerance = vanish_tolerance;
        cfg.seed = seed;
        cfg.workers = workers;
        return cfg;
    }
};

struct ParseResult {
    std::optional<RunConfig> config;
    std::vector<std::string> errors;

    bool ok() const { return errors.empty() && config.has_value(); }
};

namespace detail {

inline bool preset_sz3(RunConfig& cfg, bool set_state) {
    cfg.dim = 3;
    cfg.hamiltonian = ComplexMatrix::Zero(3, 3);
    cfg.hamiltonian(0, 0) = 1.0;
    cfg.hamiltonian(2, 2) = -1.0;
    if (set_state) {
        Eigen::VectorXcd psi(3);
        psi << 0.5, std::sqrt(2.0) / 2.0, 0.5;
        cfg.state = psi;
        cfg.wigner_init.reset();
    }
    return true;
}

inline bool apply_preset(const std::string& name, RunConfig& cfg, bool set_state,
                         std::vector<std::string>& errors, const std::string& field) {
    if (name == "sz3") return preset_sz3(cfg, set_state);
    errors.push_back(field + ": unknown preset '" + name + "' (known: sz3)");
    return false;
}

inline std::optional<ComplexMatrix> parse_complex_matrix(const Json& j, int dim,
                                                         std::vector<std::string>& errors,
                                                         const std::string& field) {
    if (!j.is_array() || j.size() != static_cast<std::size_t>(dim) * dim) {
        errors.push_back(field + ": expected a row-major array of " +
                         std::to_string(dim * dim) + " [re, im] pairs");
        return std::nullopt;
    }
    ComplexMatrix m(dim, dim);
    for (int i = 0; i < dim * dim; ++i) {
        const Json& e = j[i];
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
            errors.push_back(field + "[" + std::to_string(i) + "]: expected [re, im]");
            return std::nullopt;
        }
        m(i / dim, i % dim) = Complex(e[0].get<double>(), e[1].get<double>());
    }
    return m;
}

inline Json complex_matrix_to_json(const ComplexMatrix& m) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out.push_back({m(i, j).real(), m(i, j).imag()});
    return out;
}

}  // namespace detail

/// Parses and validates a run configuration, collecting every error with
/// its field path rather than stopping at the first one.
inline ParseResult parse_config(const Json& root) {
    ParseResult result;
    std::vector<std::string>& errors = result.errors;
    if (!root.is_object()) {
        errors.push_back("config: expected a JSON object");
        return result;
    }
    RunConfig cfg;
    bool have_system = false;

    if (root.contains("preset")) {
        if (!root["preset"].is_string())
            errors.push_back("preset: expected a string");
        else
            have_system = detail::apply_preset(root["preset"].get<std::string>(), cfg,
                                               /*set_state=*/true, errors, "preset");
    }

    if (root.contains("N")) {
        if (!root["N"].is_number_integer()) {
            errors.push_back("N: expected an integer");
        } else {
            const int n = root["N"].get<int>();
            if (n < 3 || n % 2 == 0)
                errors.push_back("N: N must be odd and >= 3, got " + std::to_string(n));
            else
                cfg.dim = n;
        }
    } else if (cfg.dim == 0 && !root.contains("preset")) {
        errors.push_back("N: required (directly or through a preset)");
    }
    // dimension-dependent fields can only be checked with a valid N; the
    // dimension-free ones are still validated below so one pass reports
    // everything fixable
    if (cfg.dim > 0 && root.contains("hamiltonian")) {
        const Json& h = root["hamiltonian"];
        if (h.is_string()) {
            RunConfig tmp;
            if (detail::apply_preset(h.get<std::string>(), tmp, false, errors, "hamiltonian")) {
                if (tmp.dim != cfg.dim)
                    errors.push_back("hamiltonian: preset dimension " +
                                     std::to_string(tmp.dim) + " does not match N");
                else {
                    cfg.hamiltonian = tmp.hamiltonian;
                    have_system = true;
                }
            }
        } else if (auto m = detail::parse_complex_matrix(h, cfg.dim, errors, "hamiltonian")) {
            cfg.hamiltonian = *m;
            have_system = true;
        }
    }
    if (!have_system && cfg.hamiltonian.rows() == 0)
        errors.push_back("hamiltonian: required (matrix or preset)");
    if (cfg.dim > 0 && cfg.hamiltonian.rows() == cfg.dim &&
        hermiticity_deviation(cfg.hamiltonian) > 1e-10)
        errors.push_back("hamiltonian: not Hermitian to 1e-10");

    if (cfg.dim > 0 && root.contains("initial_state")) {
        const Json& s = root["initial_state"];
        if (s.is_string()) {
            RunConfig tmp;
            if (detail::apply_preset(s.get<std::string>(), tmp, true, errors,
                                     "initial_state")) {
                if (tmp.dim != cfg.dim)
                    errors.push_back("initial_state: preset dimension does not match N");
                else {
                    cfg.state = tmp.state;
                    cfg.wigner_init.reset();
                }
            }
        } else if (s.is_object() && s.contains("vector")) {
            const Json& v = s["vector"];
            if (!v.is_array() || v.size() != static_cast<std::size_t>(cfg.dim)) {
                errors.push_back("initial_state.vector: expected " + std::to_string(cfg.dim) +
                                 " [re, im] pairs");
            } else {
                Eigen::VectorXcd psi(cfg.dim);
                bool good = true;
                for (int i = 0; i < cfg.dim; ++i) {
                    const Json& e = v[i];
                    if (!e.is_array() || e.size() != 2 || !e[0].is_number() ||
                        !e[1].is_number()) {
                        errors.push_back("initial_state.vector[" + std::to_string(i) +
                                         "]: expected [re, im]");
                        good = false;
                        break;
                    }
                    psi(i) = Complex(e[0].get<double>(), e[1].get<double>());
                }
                if (good) {
                    if (std::abs(psi.norm() - 1.0) > 1e-8)
                        errors.push_back("initial_state.vector: norm deviates from 1 by " +
                                         std::to_string(std::abs(psi.norm() - 1.0)));
                    else {
                        cfg.state = psi / psi.norm();
                        cfg.wigner_init.reset();
                    }
                }
            }
        } else if (s.is_object() && s.contains("wigner")) {
            const Json& v = s["wigner"];
            if (!v.is_array() || v.size() != static_cast<std::size_t>(cfg.dim) * cfg.dim) {
                errors.push_back("initial_state.wigner: expected " +
                                 std::to_string(cfg.dim * cfg.dim) + " real values");
            } else {
                RealMatrix w(cfg.dim, cfg.dim);
                bool good = true;
                for (int i = 0; i < cfg.dim * cfg.dim; ++i) {
                    if (!v[i].is_number()) {
                        errors.push_back("initial_state.wigner[" + std::to_string(i) +
                                         "]: expected a number");
                        good = false;
                        break;
                    }
                    w(i / cfg.dim, i % cfg.dim) = v[i].get<double>();
                }
                if (good) {
                    cfg.wigner_init = w;
                    cfg.state.reset();
                }
            }
        } else {
            errors.push_back(
                "initial_state: expected a preset name, {\"vector\": ...} or "
                "{\"wigner\": ...}");
        }
    }
    if (!cfg.state && !cfg.wigner_init)
        errors.push_back("initial_state: required (directly or through a preset)");

    if (root.contains("hbar")) {
        if (!root["hbar"].is_number() || root["hbar"].get<double>() <= 0.0)
            errors.push_back("hbar: must be a positive number");
        else
            cfg.hbar = root["hbar"].get<double>();
    }

    if (root.contains("engine")) {
        const Json& e = root["engine"];
        if (!e.is_object()) {
            errors.push_back("engine: expected an object");
        } else {
            if (e.contains("mode")) {
                const std::string m = e["mode"].is_string() ? e["mode"].get<std::string>() : "";
                if (m == "event")
                    cfg.mode = EngineMode::EventDriven;
                else if (m == "fixed")
                    cfg.mode = EngineMode::FixedStep;
                else
                    errors.push_back("engine.mode: expected \"event\" or \"fixed\"");
            }
            if (e.contains("dt")) {
                if (!e["dt"].is_number() || e["dt"].get<double>() <= 0.0)
                    errors.push_back("engine.dt: must be a positive number");
                else
                    cfg.dt = e["dt"].get<double>();
            }
            if (e.contains("particles")) {
                if (!e["particles"].is_number_integer() || e["particles"].get<long>() < 2)
                    errors.push_back("engine.particles: must be an integer >= 2");
                else
                    cfg.particles = e["particles"].get<std::size_t>();
            }
            if (e.contains("seed")) {
                if (!e["seed"].is_number_unsigned() &&
                    !(e["seed"].is_number_integer() && e["seed"].get<long long>() >= 0))
                    errors.push_back("engine.seed: expected a non-negative integer");
                else
                    cfg.seed = e["seed"].get<std::uint64_t>();
            }
            if (e.contains("workers")) {
                if (!e["workers"].is_number_integer() || e["workers"].get<int>() < 1)
                    errors.push_back("engine.workers: must be an integer >= 1");
                else
                    cfg.workers = e["workers"].get<int>();
            }
            if (e.contains("population_cap")) {
                if (!e["population_cap"].is_number_integer() ||
                    e["population_cap"].get<long>() < 0)
                    errors.push_back("engine.population_cap: must be a non-negative integer");
                else
                    cfg.population_cap = e["population_cap"].get<std::uint64_t>();
            }
            if (e.contains("vanish_tolerance")) {
                if (!e["vanish_tolerance"].is_number() ||
                    e["vanish_tolerance"].get<double>() < 0.0)
                    errors.push_back("engine.vanish_tolerance: must be non-negative");
                else
                    cfg.vanish_tolerance = e["vanish_tolerance"].get<double>();
            }
        }
    }
    if (cfg.mode == EngineMode::FixedStep && cfg.dt <= 0.0)
        errors.push_back("engine.dt: required in fixed-step mode");

    if (root.contains("observation_times")) {
        const Json& t = root["observation_times"];
        if (!t.is_array() || t.empty()) {
            errors.push_back("observation_times: expected a non-empty array");
        } else {
            bool good = true;
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (!t[i].is_number()) {
                    errors.push_back("observation_times[" + std::to_string(i) +
                                     "]: expected a number");
                    good = false;
                    break;
                }
                cfg.observation_times.push_back(t[i].get<double>());
            }
            if (good) {
                if (!std::is_sorted(cfg.observation_times.begin(),
                                    cfg.observation_times.end()) ||
                    cfg.observation_times.front() < 0.0)
                    errors.push_back("observation_times: must be sorted and non-negative");
                if (cfg.mode == EngineMode::FixedStep && cfg.dt > 0.0) {
                    for (std::size_t i = 0; i < cfg.observation_times.size(); ++i) {
                        const double t_i = cfg.observation_times[i];
                        const double steps = std::round(t_i / cfg.dt);
                        if (std::abs(t_i - steps * cfg.dt) > 1e-9 * std::max(1.0, t_i))
                            errors.push_back("observation_times[" + std::to_string(i) +
                                             "]: not on the engine.dt grid");
                    }
                }
            }
        }
    } else {
        errors.push_back("observation_times: required");
    }

    if (root.contains("output_dir")) {
        if (!root["output_dir"].is_string())
            errors.push_back("output_dir: expected a string");
        else
            cfg.output_dir = root["output_dir"].get<std::string>();
    }

    if (errors.empty()) result.config = std::move(cfg);
    return result;
}

inline ParseResult parse_config_file(const std::string& path) {
    std::ifstream in(path);
    ParseResult result;
    if (!in) {
        result.errors.push_back("config: cannot open '" + path + "'");
        return result;
    }
    Json root;
    try {
        in >> root;
    } catch (const std::exception& e) {
        result.errors.push_back(std::string("config: JSON parse error: ") + e.what());
        return result;
    }
    return parse_config(root);
}

/// Complete echo of a resolved configuration; parsing it back reproduces
/// the identical run.
inline Json config_to_json(const RunConfig& cfg) {
    Json j;
    j["N"] = cfg.dim;
    j["hamiltonian"] = detail::complex_matrix_to_json(cfg.hamiltonian);
    if (cfg.state) {
        Json v = Json::array();
        for (Eigen::Index i = 0; i < cfg.state->size(); ++i)
            v.push_back({(*cfg.state)(i).real(), (*cfg.state)(i).imag()});
        j["initial_state"] = {{"vector", v}};
    } else if (cfg.wigner_init) {
        Json v = Json::array();
        for (Eigen::Index i = 0; i < cfg.wigner_init->rows(); ++i)
            for (Eigen::Index k = 0; k < cfg.wigner_init->cols(); ++k)
                v.push_back((*cfg.wigner_init)(i, k));
        j["initial_state"] = {{"wigner", v}};
    }
    j["hbar"] = cfg.hbar;
    j["engine"] = {{"mode", cfg.mode == EngineMode::EventDriven ? "event" : "fixed"},
                   {"particles", cfg.particles},
                   {"seed", cfg.seed},
                   {"workers", cfg.workers},
                   {"population_cap", cfg.population_cap},
                   {"vanish_tolerance", cfg.vanish_tolerance}};
    if (cfg.mode == EngineMode::FixedStep || cfg.dt > 0.0) j["engine"]["dt"] = cfg.dt;
    j["observation_times"] = cfg.observation_times;
    j["output_dir"] = cfg.output_dir;
    return j;
}

}  // namespace wigmc
