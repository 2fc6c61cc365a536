#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "wigmc/config.hpp"
#include "wigmc/output.hpp"
#include "wigmc/pipeline.hpp"

using namespace wigmc;

namespace {

Json sz3_config_json() {
    Json j;
    j["preset"] = "sz3";
    j["engine"] = {{"mode", "event"}, {"particles", 2000}, {"seed", 42}};
    j["observation_times"] = {0.0, 0.5};
    return j;
}

}  // namespace

TEST_CASE("preset expands to the worked example") {
    const ParseResult r = parse_config(sz3_config_json());
    REQUIRE(r.ok());
    const RunConfig& cfg = *r.config;
    CHECK(cfg.dim == 3);
    CHECK(cfg.hamiltonian(0, 0) == Complex(1.0, 0.0));
    CHECK(cfg.hamiltonian(1, 1) == Complex(0.0, 0.0));
    CHECK(cfg.hamiltonian(2, 2) == Complex(-1.0, 0.0));
    REQUIRE(cfg.state.has_value());
    CHECK(std::abs((*cfg.state)(0) - Complex(0.5, 0.0)) < 1e-15);
    CHECK(std::abs((*cfg.state)(1) - Complex(std::sqrt(2.0) / 2.0, 0.0)) < 1e-15);
    CHECK(cfg.particles == 2000);
    CHECK(cfg.seed == 42);
    CHECK(cfg.hbar == 1.0);
}

TEST_CASE("even dimensions are rejected with a clear message") {
    Json j = sz3_config_json();
    j["N"] = 4;
    const ParseResult r = parse_config(j);
    REQUIRE_FALSE(r.ok());
    bool found = false;
    for (const auto& e : r.errors)
        if (e.find("N must be odd") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("fixed-step mode requires dt, named in the error") {
    Json j = sz3_config_json();
    j["engine"]["mode"] = "fixed";
    const ParseResult r = parse_config(j);
    REQUIRE_FALSE(r.ok());
    bool found = false;
    for (const auto& e : r.errors)
        if (e.find("engine.dt") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("fixed-step observation times must sit on the step grid") {
    Json j = sz3_config_json();
    j["engine"]["mode"] = "fixed";
    j["engine"]["dt"] = 1e-3;
    j["observation_times"] = {0.0, 0.50037};
    const ParseResult r = parse_config(j);
    REQUIRE_FALSE(r.ok());
    bool found = false;
    for (const auto& e : r.errors)
        if (e.find("observation_times[1]") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("unknown presets and malformed states are reported together") {
    Json j;
    j["preset"] = "nosuch";
    j["N"] = 4;
    j["observation_times"] = Json::array();
    const ParseResult r = parse_config(j);
    REQUIRE_FALSE(r.ok());
    CHECK(r.errors.size() >= 3);  // preset, N, observation_times
}

TEST_CASE("unnormalized state vectors are rejected") {
    Json j = sz3_config_json();
    j["initial_state"] = {{"vector", {{1.0, 0.0}, {1.0, 0.0}, {0.0, 0.0}}}};
    const ParseResult r = parse_config(j);
    REQUIRE_FALSE(r.ok());
    bool found = false;
    for (const auto& e : r.errors)
        if (e.find("norm deviates") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("non-hermitian inline hamiltonians are rejected") {
    Json j = sz3_config_json();
    Json h = Json::array();
    for (int i = 0; i < 9; ++i) h.push_back({0.0, 0.0});
    h[1] = {0.0, 1.0};  // (0,1) entry has no conjugate partner
    j["hamiltonian"] = h;
    const ParseResult r = parse_config(j);
    REQUIRE_FALSE(r.ok());
    bool found = false;
    for (const auto& e : r.errors)
        if (e.find("not Hermitian") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("wigner-array initial states parse") {
    Json j = sz3_config_json();
    Json w = Json::array();
    for (int i = 0; i < 9; ++i) w.push_back(1.0 / 9.0);
    j["initial_state"] = {{"wigner", w}};
    const ParseResult r = parse_config(j);
    REQUIRE(r.ok());
    REQUIRE(r.config->wigner_init.has_value());
    CHECK((*r.config->wigner_init)(1, 1) == Catch::Approx(1.0 / 9.0));
    CHECK_FALSE(r.config->state.has_value());
}

TEST_CASE("config echo reproduces the identical run") {
    const ParseResult first = parse_config(sz3_config_json());
    REQUIRE(first.ok());
    const SimulationOutput run1 = run_simulation(*first.config);

    const Json echo = config_to_json(*first.config);
    const ParseResult second = parse_config(echo);
    REQUIRE(second.ok());
    const SimulationOutput run2 = run_simulation(*second.config);

    std::ostringstream csv1, csv2;
    write_csv(csv1, run1.rows);
    write_csv(csv2, run2.rows);
    CHECK(csv1.str() == csv2.str());
}

TEST_CASE("csv formatting round-trips doubles exactly") {
    for (double v : {1.0 / 3.0, -0.1234567890123456789, 1e-17, 0.0, 2.0 / 7.0}) {
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
    std::ostringstream out;
    write_csv(out, {CsvRow{0.5, 1, -1, 0.25, 0.001, 0.251, 0.001}});
    const std::string text = out.str();
    CHECK(text.rfind("t,m,n,rho_est,stderr,rho_exact,abs_err\n", 0) == 0);
    CHECK(text.find("0.5,1,-1,0.25,") != std::string::npos);
}

TEST_CASE("metadata carries the reproduction essentials") {
    const ParseResult parsed = parse_config(sz3_config_json());
    REQUIRE(parsed.ok());
    const SimulationOutput out = run_simulation(*parsed.config);
    CHECK(out.metadata.contains("version"));
    CHECK(out.metadata.contains("config"));
    CHECK(out.metadata["config"].contains("hamiltonian"));
    CHECK(out.metadata.contains("kernel"));
    CHECK(out.metadata["kernel"]["rate"].get<double>() ==
          Catch::Approx(4.0 / std::sqrt(3.0)).margin(1e-12));
    CHECK(out.metadata["phi0_mass"].get<double>() > 0.0);
    CHECK(out.metadata["counters"].contains("jumps"));
    CHECK(out.metadata["counters"].contains("branches"));
    CHECK(out.metadata["counters"].contains("vanishes"));
    CHECK(out.metadata["counters"].contains("resamples"));
}
