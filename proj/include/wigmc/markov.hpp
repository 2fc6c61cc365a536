#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "wigmc/hamiltonian.hpp"
#include "wigmc/lattice_algebra.hpp"
#include "wigmc/phase_lift.hpp"
#include "wigmc/rng.hpp"

namespace wigmc {

enum class EngineMode { EventDriven, FixedStep };

/// Engine knobs. The kernel itself (jump table, rate, branch targets) is
/// fixed at construction and never depends on time.
struct EngineConfig {
    EngineMode mode = EngineMode::EventDriven;
    double dt = 0.0;                   // fixed-step mode only
    std::uint64_t population_cap = 0;  // 0 means "initial particle count"
    double vanish_tolerance = 1e-12;   // cull when |cos alpha| falls at or below
    std::uint64_t seed = 1;
    int workers = 1;
    double branch_target_zero = kPi / 3.0;      // children of a stop at 0
    double branch_target_pi = 2.0 * kPi / 3.0;  // children of a stop at pi
};

/// One walker on U(1) x Z_N x Z_N. Each particle owns its random stream;
/// `root` is the initial lineage it descends from (variance grouping).
struct Particle {
    PhasePoint site;
    double alpha = 0.0;
    double weight = 0.0;
    SplitStream rng;
    std::uint32_t root = 0;
};

struct Counters {
    std::uint64_t jumps = 0;
    std::uint64_t branches = 0;
    std::uint64_t vanishes = 0;
    std::uint64_t resamples = 0;
    double vanished_weight = 0.0;

    void merge(const Counters& o) {
        jumps += o.jumps;
        branches += o.branches;
        vanishes += o.vanishes;
        resamples += o.resamples;
        vanished_weight += o.vanished_weight;
    }
};

inline double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    return a;
}

/// Recovers alpha from its cosine; `upper_half` keeps the sign of sin.
inline double alpha_from_cos(double c, bool upper_half) {
    const double a = std::acos(std::clamp(c, -1.0, 1.0));
    return upper_half ? a : kTwoPi - a;
}

/// Time until the free flow cos(alpha) * e^{rate t} reaches |cos| = 1.
inline double time_to_stop(double cos_alpha, double rate) {
    const double c = std::abs(cos_alpha);
    if (rate <= 0.0 || c == 0.0) return std::numeric_limits<double>::infinity();
    return std::max(0.0, -std::log(c) / rate);
}

struct DriftResult {
    bool reaches_stop = false;
    double alpha = 0.0;         // new phase when the stop is not reached
    double stop_alpha = 0.0;    // 0 or pi otherwise
    double time_to_branch = 0.0;
};

/// Exact no-jump flow over duration tau: cos alpha grows by e^{rate tau}
/// inside its half-circle. If |cos| would exceed 1 the particle reaches
/// the stopping point, reported with its arrival time.
inline DriftResult drift(double alpha, double tau, double rate) {
    if (tau < 0.0) throw std::invalid_argument("drift duration must be non-negative");
    const double a = wrap_angle(alpha);
    if (std::min(a, kTwoPi - a) < 1e-9 || std::abs(a - kPi) < 1e-9)
        throw std::invalid_argument("drift called within 1e-9 of a stopping point");
    const double c0 = std::cos(a);
    const double t_stop = time_to_stop(c0, rate);
    if (t_stop <= tau)
        return {true, 0.0, c0 > 0.0 ? 0.0 : kPi, t_stop};
    const double c = c0 * std::exp(rate * tau);
    return {false, alpha_from_cos(c, a < kPi), 0.0, 0.0};
}

struct FixedDriftResult {
    bool reaches_stop = false;
    double alpha = 0.0;
    double stop_alpha = 0.0;
};

/// One fixed-step drift: (1 - D dt) cos(new alpha) = cos(alpha), exactly.
inline FixedDriftResult fixed_step_drift(double alpha, double rate_dt) {
    if (rate_dt < 0.0 || rate_dt >= 1.0)
        throw std::invalid_argument("fixed-step drift requires 0 <= D*dt < 1");
    const double a = wrap_angle(alpha);
    const double c0 = std::cos(a);
    const double c = c0 / (1.0 - rate_dt);
    if (std::abs(c) > 1.0) return {true, 0.0, c0 > 0.0 ? 0.0 : kPi};
    return {false, alpha_from_cos(c, a < kPi), 0.0};
}

/// Phase increment of the positive branch for a jump out of `from` by
/// (dm, dn); the negative branch is its exact negative. The cross term
/// uses the destination site, so the increment depends on where the
/// particle sits, not only on the displacement.
inline double jump_phase_increment(int dim, int dm, int dn, double theta, PhasePoint from) {
    const PhasePoint to = add_points(dim, from, {dm, dn});
    const double cross =
        static_cast<double>(to.m) * from.n - static_cast<double>(to.n) * from.m;
    return (kTwoPi / dim) * (-2.0 * cross + theta - dim / 4.0);
}

inline const JumpEntry& sample_jump_entry(const JumpTable& table, double u) {
    for (const auto& e : table.entries)
        if (u < e.cumulative) return e;
    return table.entries.back();
}

/// Displacement + phase update of one jump; consumes two random draws
/// (entry, sign) from the particle's stream.
inline void apply_jump(Particle& p, const JumpTable& table) {
    const JumpEntry& e = sample_jump_entry(table, p.rng.uniform01());
    const double inc = jump_phase_increment(table.dim, e.dm, e.dn, e.theta, p.site);
    const bool plus = p.rng.uniform01() < 0.5;
    p.site = add_points(table.dim, p.site, {e.dm, e.dn});
    p.alpha = wrap_angle(p.alpha + (plus ? inc : -inc));
}

inline bool should_vanish(double alpha, double tolerance) {
    return std::abs(std::cos(alpha)) <= tolerance;
}

/// Replaces a particle that reached a stopping point by two children at
/// the mirror pair of the configured target. Each child inherits the full
/// parent weight: 2 cos(pi/3) = cos 0 and 2 cos(2pi/3) = cos pi, so the
/// ensemble estimator is unchanged.
inline std::pair<Particle, Particle> branch_particle(Particle parent, double stop_alpha,
                                                     const EngineConfig& cfg) {
    const double target =
        stop_alpha == 0.0 ? cfg.branch_target_zero : cfg.branch_target_pi;
    Particle a = parent;
    Particle b = parent;
    a.alpha = target;
    b.alpha = kTwoPi - target;
    a.rng = parent.rng.fork();
    b.rng = parent.rng.fork();
    return {a, b};
}

inline void validate_engine_config(const EngineConfig& cfg, double rate) {
    if (cfg.workers < 1) throw std::invalid_argument("worker count must be >= 1");
    if (std::abs(2.0 * std::cos(cfg.branch_target_zero) - 1.0) > 1e-12)
        throw std::invalid_argument("branch target at 0 must satisfy 2 cos(target) = 1");
    if (std::abs(2.0 * std::cos(cfg.branch_target_pi) + 1.0) > 1e-12)
        throw std::invalid_argument("branch target at pi must satisfy 2 cos(target) = -1");
    if (cfg.vanish_tolerance < 0.0)
        throw std::invalid_argument("vanish tolerance must be non-negative");
    if (cfg.mode == EngineMode::FixedStep) {
        if (cfg.dt <= 0.0) throw std::invalid_argument("fixed-step mode requires dt > 0");
        if (rate * cfg.dt >= 1.0)
            throw std::invalid_argument("fixed-step mode requires D*dt < 1");
    }
}

/// Deterministic one-step pushforward of a lifted distribution under the
/// transition kernel: the full stay/branch mass plus every jump branch.
/// This is the kernel itself, free of sampling noise; the generator
/// consistency checks are built on it.
struct KernelStepResult {
    LiftedDistribution phi;
    double vanished_weight = 0.0;
    std::uint64_t branches = 0;
};

inline KernelStepResult kernel_step(const LiftedDistribution& phi, const JumpTable& table,
                                    double dt, const EngineConfig& cfg = {}) {
    if (dt <= 0.0) throw std::invalid_argument("kernel step requires dt > 0");
    const double rate_dt = table.rate * dt;
    if (rate_dt >= 1.0) throw std::invalid_argument("kernel step requires D*dt < 1");
    KernelStepResult out;
    out.phi.dim = phi.dim;
    out.phi.atoms.reserve(phi.atoms.size() * (1 + 2 * table.entries.size()));
    for (const auto& atom : phi.atoms) {
        const double stay_weight = (1.0 - rate_dt) * atom.weight;
        const auto moved = fixed_step_drift(atom.alpha, rate_dt);
        if (moved.reaches_stop) {
            const double target = moved.stop_alpha == 0.0 ? cfg.branch_target_zero
                                                          : cfg.branch_target_pi;
            out.phi.atoms.push_back({atom.site, target, stay_weight});
            out.phi.atoms.push_back({atom.site, kTwoPi - target, stay_weight});
            ++out.branches;
        } else {
            out.phi.atoms.push_back({atom.site, moved.alpha, stay_weight});
        }
        for (const auto& e : table.entries) {
            const double w = rate_dt * atom.weight * e.probability * 0.5;
            const double inc = jump_phase_increment(table.dim, e.dm, e.dn, e.theta, atom.site);
            const PhasePoint to = add_points(table.dim, atom.site, {e.dm, e.dn});
            for (const double signed_inc : {inc, -inc}) {
                const double alpha = wrap_angle(atom.alpha + signed_inc);
                if (should_vanish(alpha, cfg.vanish_tolerance))
                    out.vanished_weight += w;
                else
                    out.phi.atoms.push_back({to, alpha, w});
            }
        }
    }
    return out;
}

/// Initial ensemble of `count` equal-weight particles drawn from phi0 by
/// systematic (stratified) allocation over the atom list.
inline std::vector<Particle> sample_initial_ensemble(const LiftedDistribution& phi0,
                                                     std::size_t count, std::uint64_t seed) {
    if (count == 0) throw std::invalid_argument("particle count must be positive");
    if (phi0.atoms.empty())
        throw std::invalid_argument("cannot sample from an empty lifted distribution");
    for (const auto& a : phi0.atoms) {
        const double alpha = wrap_angle(a.alpha);
        if (std::min(alpha, kTwoPi - alpha) < 1e-9 || std::abs(alpha - kPi) < 1e-9)
            throw std::invalid_argument("initial distribution has an atom at a stopping point");
        if (a.weight < 0.0)
            throw std::invalid_argument("initial distribution has a negative weight");
    }
    const double total = phi0.total_mass();
    if (total <= 0.0) throw std::invalid_argument("initial distribution has zero mass");

    constexpr std::uint64_t kInitSalt = 0x696e69745f73616cULL;
    SplitStream alloc = derive_stream(seed, kInitSalt);
    const double offset = alloc.uniform01();

    std::vector<Particle> out;
    out.reserve(count);
    const double w = total / static_cast<double>(count);
    std::size_t atom_index = 0;
    double cdf = phi0.atoms[0].weight;
    for (std::size_t j = 0; j < count; ++j) {
        const double pos = (static_cast<double>(j) + offset) * w;
        while (pos >= cdf && atom_index + 1 < phi0.atoms.size())
            cdf += phi0.atoms[++atom_index].weight;
        const auto& a = phi0.atoms[atom_index];
        out.push_back({a.site, a.alpha, w, derive_stream(seed, j),
                       static_cast<std::uint32_t>(j)});
    }
    return out;
}

/// Systematic resampling to `target` particles of equal weight. Total
/// weight is conserved exactly and the estimator is preserved in
/// expectation; copies of a survivor receive forked random streams.
inline void resample_ensemble(std::vector<Particle>& particles, std::size_t target,
                              SplitStream& rng, Counters& counters) {
    if (target == 0) throw std::invalid_argument("resample target must be positive");
    double total = 0.0;
    for (const auto& p : particles) total += p.weight;
    if (total <= 0.0) throw std::runtime_error("resample on an ensemble with no weight");

    const double stride = total / static_cast<double>(target);
    const double offset = rng.uniform01() * stride;
    std::vector<Particle> out;
    out.reserve(target);
    double cdf = 0.0;
    std::size_t j = 0;
    for (auto& p : particles) {
        cdf += p.weight;
        while (j < target && offset + static_cast<double>(j) * stride < cdf) {
            Particle copy = p;
            copy.weight = stride;
            copy.rng = p.rng.fork();
            out.push_back(copy);
            ++j;
        }
    }
    while (j < target) {  // guard against terminal rounding
        Particle copy = particles.back();
        copy.weight = stride;
        copy.rng = particles.back().rng.fork();
        out.push_back(copy);
        ++j;
    }
    particles = std::move(out);
    ++counters.resamples;
}

/// Ensemble statistics at one observation barrier. Standard errors group
/// contributions by root lineage: branch siblings are perfectly correlated
/// (equal cosine), so per-particle variance would undersell the noise.
struct Estimate {
    RealMatrix value;
    RealMatrix std_error;
    std::vector<double> observable_value;
    std::vector<double> observable_error;
    double sine_component = 0.0;
    double sine_error = 0.0;
    std::uint64_t population = 0;
    double total_weight = 0.0;
};

inline Estimate estimate_ensemble(const std::vector<Particle>& particles, int dim,
                                  std::size_t root_count,
                                  const std::vector<RealMatrix>& observables = {}) {
    check_dimension(dim);
    if (root_count < 2) throw std::invalid_argument("need at least two root lineages");
    const std::size_t n_obs = observables.size();
    Estimate est;
    est.value = RealMatrix::Zero(dim, dim);
    est.std_error = RealMatrix::Zero(dim, dim);
    est.observable_value.assign(n_obs, 0.0);
    est.observable_error.assign(n_obs, 0.0);
    est.population = particles.size();

    RealMatrix s1 = RealMatrix::Zero(dim, dim), s2 = RealMatrix::Zero(dim, dim);
    std::vector<double> s1o(n_obs, 0.0), s2o(n_obs, 0.0);
    double s1s = 0.0, s2s = 0.0;

    RealMatrix x = RealMatrix::Zero(dim, dim);
    std::vector<double> xo(n_obs, 0.0);
    double xs = 0.0;
    bool open = false;
    std::uint32_t current_root = 0;

    const auto flush = [&] {
        if (!open) return;
        s1 += x;
        s2 += x.cwiseProduct(x);
        for (std::size_t k = 0; k < n_obs; ++k) {
            s1o[k] += xo[k];
            s2o[k] += xo[k] * xo[k];
        }
        s1s += xs;
        s2s += xs * xs;
        x.setZero();
        std::fill(xo.begin(), xo.end(), 0.0);
        xs = 0.0;
    };

    for (const auto& p : particles) {
        if (!open || p.root != current_root) {
            flush();
            current_root = p.root;
            open = true;
        }
        const int i = site_to_index(dim, p.site.m);
        const int j = site_to_index(dim, p.site.n);
        const double contrib = p.weight * std::cos(p.alpha);
        x(i, j) += contrib;
        xs += p.weight * std::sin(p.alpha);
        for (std::size_t k = 0; k < n_obs; ++k) xo[k] += contrib * observables[k](i, j);
        est.total_weight += p.weight;
    }
    flush();

    const double r = static_cast<double>(root_count);
    const auto stderr_of = [r](double sum, double sumsq) {
        const double var = (r / (r - 1.0)) * (sumsq - sum * sum / r);
        return std::sqrt(std::max(var, 0.0));
    };
    est.value = s1;
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) est.std_error(i, j) = stderr_of(s1(i, j), s2(i, j));
    for (std::size_t k = 0; k < n_obs; ++k) {
        est.observable_value[k] = s1o[k];
        est.observable_error[k] = stderr_of(s1o[k], s2o[k]);
    }
    est.sine_component = s1s;
    est.sine_error = stderr_of(s1s, s2s);
    return est;
}

struct Snapshot {
    double time = 0.0;
    Estimate stats;
};

struct RunResult {
    std::vector<Snapshot> snapshots;
    Counters counters;
    double initial_mass = 0.0;
    std::size_t initial_population = 0;
    std::size_t final_population = 0;
    double elapsed_time = 0.0;
};

/// Stationary-kernel particle engine. The kernel data is fixed at
/// construction; particles evolve independently between barriers, and all
/// reductions happen at barriers in canonical order, so results are
/// bitwise independent of the worker count.
class MarkovEngine {
public:
    MarkovEngine(JumpTable table, EngineConfig cfg)
        : table_(std::move(table)), cfg_(cfg) {
        check_dimension(table_.dim);
        validate_engine_config(cfg_, table_.rate);
    }

    const JumpTable& table() const { return table_; }
    const EngineConfig& config() const { return cfg_; }

    /// Advances every particle by `span`, in place. Barrier-free: no
    /// estimation, no resampling. Exposed for the stationarity tests.
    void advance(std::vector<Particle>& particles, double span, Counters& counters) const {
        if (span < 0.0) throw std::invalid_argument("advance span must be non-negative");
        if (span == 0.0) return;
        long steps = 0;
        if (cfg_.mode == EngineMode::FixedStep) {
            steps = std::lround(span / cfg_.dt);
            if (steps < 1 || std::abs(span - static_cast<double>(steps) * cfg_.dt) >
                                 1e-9 * std::max(1.0, span))
                throw std::invalid_argument(
                    "span does not align with the fixed-step grid");
        }
        const int workers = std::max(1, cfg_.workers);
        if (workers == 1 || particles.size() < 2 * static_cast<std::size_t>(workers)) {
            std::vector<Particle> out;
            out.reserve(particles.size() + particles.size() / 4);
            for (const auto& p : particles) evolve_one(p, span, steps, out, counters);
            particles = std::move(out);
            return;
        }
        std::vector<std::vector<Particle>> outs(workers);
        std::vector<Counters> local(workers);
        std::vector<std::thread> pool;
        const std::size_t chunk = (particles.size() + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const std::size_t lo = std::min(particles.size(), w * chunk);
            const std::size_t hi = std::min(particles.size(), lo + chunk);
            pool.emplace_back([&, w, lo, hi] {
                outs[w].reserve(hi - lo + (hi - lo) / 4);
                for (std::size_t i = lo; i < hi; ++i)
                    evolve_one(particles[i], span, steps, outs[w], local[w]);
            });
        }
        for (auto& t : pool) t.join();
        std::vector<Particle> merged;
        std::size_t total = 0;
        for (const auto& o : outs) total += o.size();
        merged.reserve(total);
        for (int w = 0; w < workers; ++w) {
            merged.insert(merged.end(), outs[w].begin(), outs[w].end());
            counters.merge(local[w]);
        }
        particles = std::move(merged);
    }

    RunResult run(const LiftedDistribution& phi0, std::size_t particle_count,
                  const std::vector<double>& observation_times,
                  const std::vector<RealMatrix>& observables = {}) const {
        if (particle_count < 2)
            throw std::invalid_argument("need at least two particles for error estimation");
        if (observation_times.empty())
            throw std::invalid_argument("at least one observation time is required");
        if (!std::is_sorted(observation_times.begin(), observation_times.end()) ||
            observation_times.front() < 0.0)
            throw std::invalid_argument("observation times must be sorted and non-negative");
        if (phi0.dim != table_.dim)
            throw std::invalid_argument("distribution dimension does not match jump table");

        RunResult result;
        result.initial_mass = phi0.total_mass();
        std::vector<Particle> particles =
            sample_initial_ensemble(phi0, particle_count, cfg_.seed);
        result.initial_population = particles.size();
        const std::size_t cap =
            cfg_.population_cap > 0 ? cfg_.population_cap : particle_count;

        constexpr std::uint64_t kResampleSalt = 0x7265736d706c5f73ULL;
        SplitStream resample_rng = derive_stream(cfg_.seed, kResampleSalt);

        // Deterministic sub-barrier schedule for population control; the
        // spacing depends only on the rate, never on the realized
        // population, so runs stay reproducible.
        const double max_sub =
            table_.rate > 0.0 ? 0.35 / table_.rate : std::numeric_limits<double>::infinity();

        double now = 0.0;
        for (double target : observation_times) {
            double span = target - now;
            if (span > 0.0) {
                const long pieces = std::isfinite(max_sub)
                                        ? std::max<long>(1, static_cast<long>(
                                                                std::ceil(span / max_sub)))
                                        : 1;
                const double sub = span / static_cast<double>(pieces);
                for (long k = 0; k < pieces; ++k) {
                    advance(particles, sub, result.counters);
                    if (particles.size() > 2 * cap)
                        resample_ensemble(particles, cap, resample_rng, result.counters);
                }
                now = target;
            }
            Snapshot snap;
            snap.time = target;
            snap.stats =
                estimate_ensemble(particles, table_.dim, particle_count, observables);
            result.snapshots.push_back(std::move(snap));
        }
        result.final_population = particles.size();
        result.elapsed_time = now;
        return result;
    }

private:
    /// Evolves one particle (and every descendant it spawns) to the end of
    /// the segment, appending survivors to `out` in deterministic order.
    void evolve_one(Particle start, double span, long steps, std::vector<Particle>& out,
                    Counters& counters) const {
        if (cfg_.mode == EngineMode::EventDriven)
            evolve_event(std::move(start), span, out, counters);
        else
            evolve_fixed(std::move(start), steps, out, counters);
    }

    void evolve_event(Particle start, double span, std::vector<Particle>& out,
                      Counters& counters) const {
        const double rate = table_.rate;
        std::vector<std::pair<Particle, double>> stack;
        stack.emplace_back(std::move(start), span);
        while (!stack.empty()) {
            auto [p, remaining] = std::move(stack.back());
            stack.pop_back();
            bool alive = true;
            while (alive) {
                const double c0 = std::cos(p.alpha);
                const double t_stop = time_to_stop(c0, rate);
                const double tau = rate > 0.0 ? p.rng.exponential(rate)
                                              : std::numeric_limits<double>::infinity();
                if (t_stop <= tau && t_stop <= remaining) {
                    remaining -= t_stop;
                    auto [first, second] =
                        branch_particle(std::move(p), c0 > 0.0 ? 0.0 : kPi, cfg_);
                    ++counters.branches;
                    stack.emplace_back(std::move(second), remaining);
                    p = std::move(first);
                    continue;  // fresh holding time: memoryless
                }
                if (tau <= remaining) {
                    p.alpha = alpha_from_cos(c0 * std::exp(rate * tau), p.alpha < kPi);
                    remaining -= tau;
                    apply_jump(p, table_);
                    ++counters.jumps;
                    if (should_vanish(p.alpha, cfg_.vanish_tolerance)) {
                        ++counters.vanishes;
                        counters.vanished_weight += p.weight;
                        alive = false;
                    }
                    continue;
                }
                if (rate > 0.0 && remaining > 0.0)
                    p.alpha =
                        alpha_from_cos(c0 * std::exp(rate * remaining), p.alpha < kPi);
                out.push_back(std::move(p));
                alive = false;
            }
        }
    }

    // A jump in the final step can park a particle exactly on a stopping
    // point until the next step's drift branches it; the estimator is
    // well-defined there, so barriers tolerate it.
    void evolve_fixed(Particle start, long steps, std::vector<Particle>& out,
                      Counters& counters) const {
        const double rate_dt = table_.rate * cfg_.dt;
        std::vector<std::pair<Particle, long>> stack;
        stack.emplace_back(std::move(start), steps);
        while (!stack.empty()) {
            auto [p, remaining] = std::move(stack.back());
            stack.pop_back();
            bool alive = true;
            while (alive && remaining > 0) {
                --remaining;
                if (rate_dt > 0.0 && p.rng.uniform01() < rate_dt) {
                    apply_jump(p, table_);
                    ++counters.jumps;
                    if (should_vanish(p.alpha, cfg_.vanish_tolerance)) {
                        ++counters.vanishes;
                        counters.vanished_weight += p.weight;
                        alive = false;
                    }
                    continue;
                }
                const auto moved = fixed_step_drift(p.alpha, rate_dt);
                if (moved.reaches_stop) {
                    auto [first, second] =
                        branch_particle(std::move(p), moved.stop_alpha, cfg_);
                    ++counters.branches;
                    stack.emplace_back(std::move(second), remaining);
                    p = std::move(first);
                } else {
                    p.alpha = moved.alpha;
                }
            }
            if (alive) out.push_back(std::move(p));
        }
    }

    JumpTable table_;
    EngineConfig cfg_;
};

}  // namespace wigmc
