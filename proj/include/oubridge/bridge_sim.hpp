#pragma once

#include <cstdint>
#include <vector>

#include "oubridge/ou_model.hpp"
#include "oubridge/rng.hpp"

namespace oubridge {

struct TimeGrid {
    std::vector<double> points;  // strictly increasing, points.front() = 0, back() = T

    static TimeGrid uniform(double T, int n_points);
    void validate(double T) const;
    std::size_t size() const { return points.size(); }
};

struct BridgePath {
    const TimeGrid* grid = nullptr;
    std::vector<double> values;
};

struct StabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Drift of the bridge SDE in the centered zero-start regime
// (sigma0 = x0 = mu = 0): -theta coth(theta(T-t)) x + theta z / sinh(theta(T-t)),
// reducing to (z - x)/(T - t) as theta -> 0.
double bridge_drift(const BridgeSpec& spec, double x, double t);

// Euler-Maruyama on the grid, diffusion sigma, last value pinned to z exactly.
// Requires the centered regime; general parameters go through
// reduce_random_start. Deterministic given the noise stream.
BridgePath simulate_euler(const BridgeSpec& spec, const TimeGrid& grid, NormalStream& noise);

struct StartReduction {
    double x0_draw = 0.0;      // sample of X_0 | X_T = z
    double z_centered = 0.0;   // endpoint for the centered bridge
};

// Draws X_0 from its conditional law and returns the centered effective
// endpoint; the full path is x0 e^{-theta t} + mu (1 - e^{-theta t}) plus the
// centered bridge to z_centered.
StartReduction reduce_random_start(const BridgeSpec& spec, double u);

// Deterministic part added back after the centered simulation.
double start_component(const OuParams& p, double x0_draw, double t);

// Exact joint-Gaussian sampler on the grid (dense factorization of the bridge
// covariance). Grid count <= 2000.
BridgePath simulate_exact(const BridgeSpec& spec, const TimeGrid& grid, NormalStream& noise);

enum class Scheme { Euler, Exact };

// Batch driver handling the general regime: reduce_random_start per path, the
// centered simulation, then the deterministic component. Paths are row-major,
// one row per path. Parallelized over paths; path i always consumes noise
// stream (seed, i), so the result is independent of thread count.
std::vector<std::vector<double>> simulate_paths(const BridgeSpec& spec, const TimeGrid& grid,
                                                int n_paths, std::uint64_t seed, Scheme scheme);

namespace serial_ref {
// Same contract as simulate_paths, single-threaded; kept as the reference for
// the parallel kernel.
std::vector<std::vector<double>> simulate_paths(const BridgeSpec& spec, const TimeGrid& grid,
                                                int n_paths, std::uint64_t seed, Scheme scheme);
}  // namespace serial_ref

}  // namespace oubridge
