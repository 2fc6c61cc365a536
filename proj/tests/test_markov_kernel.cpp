#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "wigmc/hamiltonian.hpp"
#include "wigmc/liouville.hpp"
#include "wigmc/markov.hpp"
#include "wigmc/phase_lift.hpp"
#include "wigmc/wigner.hpp"

using namespace wigmc;

namespace {

ComplexMatrix sz3_hamiltonian() {
    ComplexMatrix h = ComplexMatrix::Zero(3, 3);
    h(0, 0) = 1.0;
    h(2, 2) = -1.0;
    return h;
}

JumpTable sz3_table(double hbar = 1.0) {
    const WeylBasis basis(3);
    return jump_table(polar_decompose(weyl_coefficients(basis, sz3_hamiltonian())), hbar);
}

WignerFunction sz3_wigner() {
    const WeylBasis basis(3);
    Eigen::VectorXcd psi(3);
    psi << 0.5, std::sqrt(2.0) / 2.0, 0.5;
    return wigner_from_density(basis, density_from_state(psi));
}

double contribution(const LiftedDistribution& phi) {
    double s = 0.0;
    for (const auto& a : phi.atoms) s += a.weight * std::cos(a.alpha);
    return s;
}

}  // namespace

TEST_CASE("drift: cos = 0 is a fixed point") {
    for (double tau : {0.1, 5.0}) {
        const DriftResult r = drift(kPi / 2.0, tau, 2.0);
        CHECK_FALSE(r.reaches_stop);
        CHECK(r.alpha == Catch::Approx(kPi / 2.0).margin(1e-15));
    }
}

TEST_CASE("drift: closed form of the flow") {
    // e^{D tau} = 1/0.9 grows cos(pi/3) to 0.5/0.9
    const double rate = 1.0;
    const double tau = std::log(1.0 / 0.9);
    const DriftResult r = drift(kPi / 3.0, tau, rate);
    REQUIRE_FALSE(r.reaches_stop);
    CHECK(std::cos(r.alpha) * 0.9 == Catch::Approx(0.5).margin(1e-15));
    CHECK(r.alpha == Catch::Approx(0.9817653565786227).margin(1e-12));

    // lower half-circle mirrors the flow
    const DriftResult rl = drift(kTwoPi - kPi / 3.0, tau, rate);
    REQUIRE_FALSE(rl.reaches_stop);
    CHECK(rl.alpha == Catch::Approx(kTwoPi - r.alpha).margin(1e-12));
}

TEST_CASE("drift: branch detection and timing") {
    const DriftResult r = drift(kPi / 3.0, 1.0, 1.0);
    REQUIRE(r.reaches_stop);
    CHECK(r.stop_alpha == 0.0);
    CHECK(r.time_to_branch == Catch::Approx(std::log(2.0)).margin(1e-14));

    const DriftResult rp = drift(2.0 * kPi / 3.0, 1.0, 1.0);
    REQUIRE(rp.reaches_stop);
    CHECK(rp.stop_alpha == Catch::Approx(kPi));
    CHECK(rp.time_to_branch == Catch::Approx(std::log(2.0)).margin(1e-14));
}

TEST_CASE("drift: rejects inputs at the stopping points") {
    CHECK_THROWS_AS(drift(0.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(drift(1e-10, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(drift(kPi - 1e-10, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(drift(kPi / 3.0, -0.1, 1.0), std::invalid_argument);
}

TEST_CASE("fixed-step drift satisfies its defining identity") {
    for (double rate_dt : {0.05, 0.1, 0.5}) {
        for (int k = 1; k < 48; ++k) {
            const double alpha = kTwoPi * k / 48.0;
            if (std::abs(alpha - kPi) < 1e-9) continue;
            const auto r = fixed_step_drift(alpha, rate_dt);
            if (r.reaches_stop) {
                CHECK(std::abs(std::cos(alpha)) > 1.0 - rate_dt);
            } else {
                CHECK((1.0 - rate_dt) * std::cos(r.alpha) ==
                      Catch::Approx(std::cos(alpha)).margin(2e-16));
                // half circle is preserved
                CHECK((alpha < kPi) == (r.alpha < kPi));
            }
        }
    }
    CHECK_THROWS_AS(fixed_step_drift(kPi / 3.0, 1.0), std::invalid_argument);
}

TEST_CASE("jump phase increments of the spin-1 example") {
    const JumpTable t = sz3_table();
    // displacement (0,1) out of the origin: theta = N/4 makes both
    // branches phase-neutral
    CHECK(jump_phase_increment(3, 0, 1, 0.75, {0, 0}) == Catch::Approx(0.0).margin(1e-14));
    // displacement (0,1) out of (1,0): cross term -1 gives 4*pi/3
    CHECK(jump_phase_increment(3, 0, 1, 0.75, {1, 0}) ==
          Catch::Approx(4.0 * kPi / 3.0).margin(1e-13));
}

TEST_CASE("applied jump lands on an enumerated (site, phase) outcome") {
    const JumpTable t = sz3_table();
    const PhasePoint from{1, 0};
    const double alpha0 = kPi / 3.0;

    // enumerate every (entry, sign) outcome analytically
    struct Outcome {
        PhasePoint site;
        double alpha;
        bool seen = false;
    };
    std::vector<Outcome> outcomes;
    for (const auto& e : t.entries) {
        const double inc = jump_phase_increment(3, e.dm, e.dn, e.theta, from);
        const PhasePoint to = add_points(3, from, {e.dm, e.dn});
        outcomes.push_back({to, wrap_angle(alpha0 + inc)});
        outcomes.push_back({to, wrap_angle(alpha0 - inc)});
    }
    REQUIRE(outcomes.size() == 4);

    for (std::uint64_t s = 0; s < 256; ++s) {
        Particle p{from, alpha0, 1.0, SplitStream(detail::mix64(s)), 0};
        apply_jump(p, t);
        CHECK(p.site.m == 1);  // sz3 only displaces the second coordinate
        bool matched = false;
        for (auto& o : outcomes)
            if (o.site == p.site && std::abs(o.alpha - p.alpha) < 1e-12) {
                o.seen = true;
                matched = true;
            }
        CHECK(matched);
    }
    for (const auto& o : outcomes) CHECK(o.seen);  // all four outcomes occur
}

TEST_CASE("branching preserves the estimator contribution exactly") {
    EngineConfig cfg;
    Particle parent{{1, -1}, 0.0, 0.7, SplitStream(123), 4};

    auto [a, b] = branch_particle(parent, 0.0, cfg);
    CHECK(a.alpha == Catch::Approx(kPi / 3.0));
    CHECK(b.alpha == Catch::Approx(kTwoPi - kPi / 3.0));
    CHECK(a.weight == 0.7);
    CHECK(b.weight == 0.7);
    CHECK(a.root == 4);
    const double before = parent.weight * std::cos(parent.alpha);
    const double after = a.weight * std::cos(a.alpha) + b.weight * std::cos(b.alpha);
    CHECK(std::abs(after - before) < 1e-15);

    Particle at_pi{{0, 0}, kPi, 0.3, SplitStream(99), 1};
    auto [c, d] = branch_particle(at_pi, kPi, cfg);
    CHECK(c.alpha == Catch::Approx(2.0 * kPi / 3.0));
    CHECK(d.alpha == Catch::Approx(4.0 * kPi / 3.0));
    CHECK(std::abs(c.weight * std::cos(c.alpha) + d.weight * std::cos(d.alpha) - (-0.3)) <
          1e-15);

    // children streams are distinct and deterministic
    CHECK(a.rng.state() != b.rng.state());
}

TEST_CASE("vanish rule") {
    CHECK(should_vanish(kPi / 2.0, 1e-12));
    CHECK(should_vanish(3.0 * kPi / 2.0, 1e-12));
    CHECK_FALSE(should_vanish(kPi / 2.0 + 0.1, 1e-12));

    // landing at +-pi/2: the two sign branches of any jump sum to a zero
    // cosine contribution, which is what makes removal unbiased
    const JumpTable t = sz3_table();
    for (const auto& e : t.entries)
        for (int m = -1; m <= 1; ++m)
            for (int n = -1; n <= 1; ++n) {
                const double inc = jump_phase_increment(3, e.dm, e.dn, e.theta, {m, n});
                CHECK(std::abs(std::cos(kPi / 2.0 + inc) + std::cos(kPi / 2.0 - inc)) <
                      1e-15);
            }
}

TEST_CASE("one deterministic kernel step reproduces the evolution equation exactly") {
    // away from the branch region the pushforward is algebraically exact:
    // stay mass contributes cos(alpha) unchanged and the jump mass adds
    // dt * (right-hand side); no O(dt^2) remainder at all
    const WeylBasis basis(3);
    const JumpTable table = sz3_table();
    const PolarTable polar = polar_decompose(weyl_coefficients(basis, sz3_hamiltonian()));
    const RealMatrix op = liouville_operator(polar, 1.0);

    const WignerFunction w0 = sz3_wigner();
    const LiftedDistribution phi0 = lift_two_atom(w0);
    const double dt = 1e-3;
    const KernelStepResult step = kernel_step(phi0, table, dt);
    CHECK(step.branches == 0);
    CHECK(step.vanished_weight == 0.0);

    const WignerFunction w1 = contract(step.phi);
    const Eigen::VectorXd rhs = op * Eigen::Map<const Eigen::VectorXd>(w0.values().data(), 9);
    const Eigen::VectorXd change =
        (Eigen::Map<const Eigen::VectorXd>(w1.values().data(), 9) -
         Eigen::Map<const Eigen::VectorXd>(w0.values().data(), 9)) /
        dt;
    CHECK((change - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kernel step branches atoms that would overshoot") {
    JumpTable table = sz3_table();
    LiftedDistribution phi;
    phi.dim = 3;
    const double dt = 0.5 / table.rate;  // D*dt = 0.5
    phi.atoms.push_back({{0, 0}, 0.1, 1.0});           // |cos| near 1: branches
    phi.atoms.push_back({{0, 0}, kTwoPi - 0.1, 1.0});  // mirror branches too
    const KernelStepResult step = kernel_step(phi, table, dt);
    CHECK(step.branches == 2);
    // the branched stay-mass sits at the configured targets
    int at_targets = 0;
    for (const auto& a : step.phi.atoms)
        if (std::abs(a.alpha - kPi / 3.0) < 1e-12 ||
            std::abs(a.alpha - (kTwoPi - kPi / 3.0)) < 1e-12)
            ++at_targets;
    CHECK(at_targets >= 4);
}

TEST_CASE("kernel step conserves probability mass flow") {
    const JumpTable table = sz3_table();
    const LiftedDistribution phi0 = lift_two_atom(sz3_wigner());
    const double dt = 1e-2;
    const KernelStepResult step = kernel_step(phi0, table, dt);
    // no branch, no vanish: stay mass (1 - D dt) + jump mass D dt = total
    CHECK(step.phi.total_mass() ==
          Catch::Approx(phi0.total_mass() + step.vanished_weight * 0.0).margin(1e-12));
}

TEST_CASE("ensemble sampling hits the target distribution at t = 0") {
    const LiftedDistribution phi0 = lift_two_atom(sz3_wigner());
    const std::size_t count = 20000;
    const auto particles = sample_initial_ensemble(phi0, count, 7);
    CHECK(particles.size() == count);

    const Estimate est = estimate_ensemble(particles, 3, count);
    const WignerFunction w0 = sz3_wigner();
    // systematic allocation: per-site error is bounded by a few strides
    const double bound = 4.0 * phi0.total_mass() / static_cast<double>(count) + 1e-12;
    CHECK((est.value - w0.values()).cwiseAbs().maxCoeff() < bound);
    CHECK(est.total_weight == Catch::Approx(phi0.total_mass()).margin(1e-9));

    LiftedDistribution bad;
    bad.dim = 3;
    bad.atoms.push_back({{0, 0}, 0.0, 1.0});
    CHECK_THROWS_AS(sample_initial_ensemble(bad, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_initial_ensemble(phi0, 0, 1), std::invalid_argument);
}

TEST_CASE("systematic resampling: identity case and weight conservation") {
    const LiftedDistribution phi0 = lift_two_atom(sz3_wigner());
    auto particles = sample_initial_ensemble(phi0, 1000, 3);
    const Estimate before = estimate_ensemble(particles, 3, 1000);

    SplitStream rng(55);
    Counters counters;
    auto copy = particles;
    resample_ensemble(copy, 1000, rng, counters);
    CHECK(copy.size() == 1000);
    CHECK(counters.resamples == 1);
    const Estimate after = estimate_ensemble(copy, 3, 1000);
    // equal weights resampled to the same size: every particle survives once
    CHECK((after.value - before.value).cwiseAbs().maxCoeff() < 1e-12);

    double total_before = 0.0, total_after = 0.0;
    for (const auto& p : particles) total_before += p.weight;
    for (const auto& p : copy) total_after += p.weight;
    CHECK(total_after == Catch::Approx(total_before).margin(1e-12));
}

TEST_CASE("resampling is unbiased") {
    // skewed weights; mean of the resampled estimator over many draws must
    // sit within a few standard errors of the original
    std::vector<Particle> particles;
    std::mt19937 gen(17);
    std::uniform_real_distribution<double> wdist(0.01, 1.0), adist(0.2, kTwoPi - 0.2);
    for (std::uint32_t i = 0; i < 40; ++i)
        particles.push_back({{static_cast<int>(i % 3) - 1, 0}, adist(gen), wdist(gen),
                             SplitStream(i), i});
    const Estimate before = estimate_ensemble(particles, 3, 40);

    const int reps = 4000;
    RealMatrix mean = RealMatrix::Zero(3, 3);
    RealMatrix sumsq = RealMatrix::Zero(3, 3);
    SplitStream rng(2024);
    for (int r = 0; r < reps; ++r) {
        auto copy = particles;
        Counters counters;
        resample_ensemble(copy, 25, rng, counters);
        const Estimate e = estimate_ensemble(copy, 3, 40);
        mean += e.value;
        sumsq += e.value.cwiseProduct(e.value);
    }
    mean /= reps;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double var = sumsq(i, j) / reps - mean(i, j) * mean(i, j);
            const double se = std::sqrt(std::max(var, 1e-30) / reps);
            CHECK(std::abs(mean(i, j) - before.value(i, j)) < 4.0 * se + 1e-9);
        }
}

TEST_CASE("estimator grouping treats a lineage as one unit") {
    // two particles of the same root with identical contributions must not
    // halve the variance the way two independent particles would
    std::vector<Particle> siblings = {
        {{0, 0}, kPi / 3.0, 1.0, SplitStream(1), 0},
        {{0, 0}, kPi / 3.0, 1.0, SplitStream(2), 0},
    };
    std::vector<Particle> independent = {
        {{0, 0}, kPi / 3.0, 1.0, SplitStream(1), 0},
        {{0, 0}, kPi / 3.0, 1.0, SplitStream(2), 1},
    };
    const Estimate es = estimate_ensemble(siblings, 3, 2);
    const Estimate ei = estimate_ensemble(independent, 3, 2);
    CHECK(es.value(1, 1) == Catch::Approx(ei.value(1, 1)).margin(1e-15));
    // one occupied unit out of two: nonzero spread; two equal units: zero
    CHECK(es.std_error(1, 1) > 0.5);
    CHECK(ei.std_error(1, 1) < 1e-12);
}
