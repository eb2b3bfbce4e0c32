#include <doctest.h>

#include <cmath>
#include <vector>

#include "oubridge/bridge_sim.hpp"
#include "oubridge/ou_model.hpp"
#include "test_util.hpp"

using namespace oubridge;
using testutil::make_params;

namespace {

// Column-wise sample mean / variance helpers over row-major paths.
double col_mean(const std::vector<std::vector<double>>& paths, std::size_t j) {
    double s = 0.0;
    for (const auto& p : paths) s += p[j];
    return s / static_cast<double>(paths.size());
}

double col_var(const std::vector<std::vector<double>>& paths, std::size_t j) {
    const double m = col_mean(paths, j);
    double s = 0.0;
    for (const auto& p : paths) s += (p[j] - m) * (p[j] - m);
    return s / static_cast<double>(paths.size() - 1);
}

}  // namespace

TEST_CASE("TimeGrid construction and validation") {
    const TimeGrid g = TimeGrid::uniform(2.0, 5);
    CHECK(g.points.front() == 0.0);
    CHECK(g.points.back() == 2.0);
    CHECK(g.points[2] == doctest::Approx(1.0));
    CHECK_NOTHROW(g.validate(2.0));
    CHECK_THROWS_AS(g.validate(1.0), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid::uniform(1.0, 1), std::invalid_argument);
    TimeGrid bad = g;
    bad.points[1] = bad.points[2];
    CHECK_THROWS_AS(bad.validate(2.0), std::invalid_argument);
}

TEST_CASE("bridge drift closed forms") {
    // theta -> 0 limit is the Brownian-bridge drift (z - x)/(T - t)
    const BridgeSpec bb{make_params(0, 0), 1.0};
    CHECK(bridge_drift(bb, 0.3, 0.5) == doctest::Approx((1.0 - 0.3) / 0.5).epsilon(1e-14));

    // tiny theta agrees with the limit
    const BridgeSpec tiny{make_params(1e-9, 0), 1.0};
    CHECK(bridge_drift(tiny, 0.3, 0.5) ==
          doctest::Approx(bridge_drift(bb, 0.3, 0.5)).epsilon(1e-7));

    // theta = 1, x = 0.2, t = 0.5, z = 1: -coth(0.5) x + z / sinh(0.5)
    const BridgeSpec spec{make_params(1, 0), 1.0};
    const double expected = -0.2 / std::tanh(0.5) + 1.0 / std::sinh(0.5);
    CHECK(bridge_drift(spec, 0.2, 0.5) == doctest::Approx(expected).epsilon(1e-13));

    // theta coth(theta tau) and theta / sinh(theta tau) are even in theta,
    // so the centered drift coincides for +-theta
    const BridgeSpec neg{make_params(-1, 0), 1.0};
    CHECK(bridge_drift(neg, 0.2, 0.5) == doctest::Approx(expected).epsilon(1e-13));

    // large |theta|(T - t) stays finite
    BridgeSpec big{make_params(500, 0), 1.0};
    CHECK(std::isfinite(bridge_drift(big, 0.1, 0.2)));
    big.params.theta = -500;
    CHECK(std::isfinite(bridge_drift(big, 0.1, 0.2)));

    CHECK_THROWS_AS(bridge_drift(spec, 0.0, 1.0), std::domain_error);
    BridgeSpec general{make_params(1, 0.5), 1.0};
    CHECK_THROWS_AS(bridge_drift(general, 0.0, 0.5), std::invalid_argument);
}

TEST_CASE("Euler paths start at 0 and are pinned at z exactly") {
    const BridgeSpec spec{make_params(1, 0), 0.7};
    const TimeGrid grid = TimeGrid::uniform(1.0, 64);
    NormalStream noise(42, 0);
    const BridgePath path = simulate_euler(spec, grid, noise);
    REQUIRE(path.values.size() == 64);
    CHECK(path.values.front() == 0.0);
    CHECK(path.values.back() == 0.7);
}

TEST_CASE("stability guard rejects a grid too coarse for the drift") {
    // theta coth(theta T) ~ theta for large theta; dt = 1/3 with theta = 10
    // makes theta dt > 1 on the first step.
    const BridgeSpec spec{make_params(10, 0), 0.0};
    const TimeGrid grid = TimeGrid::uniform(1.0, 4);
    NormalStream noise(1, 0);
    CHECK_THROWS_AS(simulate_euler(spec, grid, noise), StabilityError);
}

TEST_CASE("random-start reduction: degenerate and Gaussian cases") {
    // sigma0 = 0: the start is deterministic and z~ subtracts the flow of x0
    const BridgeSpec det{make_params(1, 0, 1, 1, 0.5, 0.3), 1.0};
    const StartReduction r = reduce_random_start(det, 1.7);
    CHECK(r.x0_draw == 0.3);
    const double e = std::exp(-1.0);
    CHECK(r.z_centered == doctest::Approx(1.0 - 0.3 * e - 0.5 * (1 - e)).epsilon(1e-14));

    // theta = 0, sigma0^2 = 1, T = 1: Var(X_0 | X_T = z) = 1 - 1/(1+1) = 1/2
    const BridgeSpec bm{make_params(0, 1), 0.0};
    CHECK(bridge_cov(bm.params, 0.0, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
    // the draw is mean + sqrt(var) * u
    const StartReduction g = reduce_random_start(bm, 2.0);
    CHECK(g.x0_draw == doctest::Approx(bridge_mean(bm, 0.0) + std::sqrt(0.5) * 2.0));
    CHECK(g.z_centered == doctest::Approx(0.0 - g.x0_draw).epsilon(1e-14));

    // start_component reproduces the deterministic flow
    CHECK(start_component(det.params, 0.3, 0.0) == doctest::Approx(0.3));
    CHECK(start_component(det.params, 0.3, 1.0) ==
          doctest::Approx(0.3 * e + 0.5 * (1 - e)).epsilon(1e-14));
}

TEST_CASE("exact sampler marginals match the bridge law") {
    const BridgeSpec spec{make_params(1, 0.5, 1, 1, 0.0, 0.2), 1.0};
    const TimeGrid grid = TimeGrid::uniform(1.0, 9);
    const int n = 40000;
    const auto paths = simulate_paths(spec, grid, n, 99, Scheme::Exact);
    for (std::size_t j : {std::size_t{0}, std::size_t{4}, std::size_t{8}}) {
        const double t = grid.points[j];
        const double var = bridge_cov(spec.params, t, t);
        const double mean = bridge_mean(spec, t);
        const double se_mean = std::sqrt(var / n) + 1e-15;
        CAPTURE(t);
        CHECK(std::abs(col_mean(paths, j) - mean) < 3 * se_mean);
        // Var of the sample variance of a Gaussian: 2 var^2 / (n - 1)
        const double se_var = std::sqrt(2.0 * var * var / (n - 1)) + 1e-15;
        CHECK(std::abs(col_var(paths, j) - var) < 3 * se_var);
    }
    for (const auto& p : paths) CHECK(p.back() == spec.z);
}

TEST_CASE("Euler scheme converges to the same law as the exact sampler") {
    // Moment check at the midpoint with a fine grid; the Euler bias at
    // 513 steps is well below the Monte-Carlo tolerance.
    const BridgeSpec spec{make_params(1, 0), 1.0};
    const TimeGrid grid = TimeGrid::uniform(1.0, 513);
    const int n = 40000;
    const auto paths = simulate_paths(spec, grid, n, 7, Scheme::Euler);
    const std::size_t j = 256;
    const double t = grid.points[j];
    const double var = bridge_cov(spec.params, t, t);
    const double mean = bridge_mean(spec, t);
    CHECK(std::abs(col_mean(paths, j) - mean) < 3 * std::sqrt(var / n) + 2e-3);
    CHECK(std::abs(col_var(paths, j) - var) <
          3 * std::sqrt(2.0 * var * var / (n - 1)) + 2e-3);
    for (const auto& p : paths) CHECK(p.back() == spec.z);
}

TEST_CASE("random-start regime reproduces the conditional start variance") {
    // the general-regime Euler driver draws X_0 | X_T and recomposes
    BridgeSpec spec{make_params(1, 0.5, 1, 10, -1.0, 0.0), 1.0};
    const TimeGrid grid = TimeGrid::uniform(10.0, 801);
    const int n = 20000;
    const auto paths = simulate_paths(spec, grid, n, 11, Scheme::Euler);
    const double var0 = bridge_cov(spec.params, 0.0, 0.0);
    const double mean0 = bridge_mean(spec, 0.0);
    CHECK(std::abs(col_mean(paths, 0) - mean0) < 3 * std::sqrt(var0 / n));
    CHECK(std::abs(col_var(paths, 0) - var0) < 3 * std::sqrt(2.0 * var0 * var0 / (n - 1)));
}

TEST_CASE("same seed gives bit-identical paths; serial_ref matches parallel") {
    const BridgeSpec spec{make_params(-0.5, 1), 0.3};
    const TimeGrid grid = TimeGrid::uniform(1.0, 33);
    for (Scheme scheme : {Scheme::Euler, Scheme::Exact}) {
        const auto a = simulate_paths(spec, grid, 50, 123, scheme);
        const auto b = simulate_paths(spec, grid, 50, 123, scheme);
        const auto c = serial_ref::simulate_paths(spec, grid, 50, 123, scheme);
        CHECK(a == b);
        CHECK(a == c);
        const auto d = simulate_paths(spec, grid, 50, 124, scheme);
        CHECK(a != d);
    }
}

TEST_CASE("simulate_paths argument validation") {
    const BridgeSpec spec{make_params(1, 0), 0.0};
    const TimeGrid grid = TimeGrid::uniform(1.0, 8);
    CHECK_THROWS_AS(simulate_paths(spec, grid, 0, 1, Scheme::Euler), std::invalid_argument);
    const TimeGrid huge = TimeGrid::uniform(1.0, 2001);
    CHECK_THROWS_AS(simulate_paths(spec, huge, 1, 1, Scheme::Exact), std::invalid_argument);
    NormalStream noise(1, 0);
    CHECK_THROWS_AS(simulate_exact(spec, huge, noise), std::invalid_argument);
}
