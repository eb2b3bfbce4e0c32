#include "oubridge/bridge_sim.hpp"

#include <Eigen/Dense>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace oubridge {

TimeGrid TimeGrid::uniform(double T, int n_points) {
    if (n_points < 2) throw std::invalid_argument("TimeGrid: need at least 2 points");
    TimeGrid g;
    g.points.resize(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i)
        g.points[static_cast<std::size_t>(i)] = T * i / (n_points - 1);
    g.points.back() = T;
    return g;
}

void TimeGrid::validate(double T) const {
    if (points.size() < 2) throw std::invalid_argument("TimeGrid: need at least 2 points");
    if (points.front() != 0.0 || points.back() != T)
        throw std::invalid_argument("TimeGrid: must span [0, T]");
    for (std::size_t i = 1; i < points.size(); ++i)
        if (!(points[i] > points[i - 1]))
            throw std::invalid_argument("TimeGrid: points must be strictly increasing");
}

namespace {

// theta * coth(theta * tau) and theta / sinh(theta * tau), tau > 0. Both are
// even in theta, so they are evaluated at |theta| through expm1 of a
// non-positive argument; large |theta| tau cannot overflow.
double theta_coth(double theta, double tau) {
    const double x = std::abs(theta) * tau;
    if (x < 1e-8) return 1.0 / tau;
    const double em = -std::expm1(-2.0 * x);  // 1 - e^{-2x}
    return std::abs(theta) * (2.0 - em) / em;
}

double theta_over_sinh(double theta, double tau) {
    const double x = std::abs(theta) * tau;
    if (x < 1e-8) return 1.0 / tau;
    const double em = -std::expm1(-2.0 * x);
    return std::abs(theta) * 2.0 * std::exp(-x) / em;
}

void require_centered(const BridgeSpec& spec, const char* who) {
    const OuParams& p = spec.params;
    if (p.sigma0 != 0.0 || p.x0 != 0.0 || p.mu != 0.0)
        throw std::invalid_argument(std::string(who) +
                                    ": requires the centered zero-start regime "
                                    "(sigma0 = x0 = mu = 0); use reduce_random_start");
}

// Square root of the bridge covariance on the grid restricted to [0, T); the
// endpoint is deterministic. Small negative eigenvalues from roundoff are
// clipped, anything below -1e-9 * lambda_max is an error.
Eigen::MatrixXd covariance_factor(const BridgeSpec& spec, const TimeGrid& grid) {
    const OuParams& p = spec.params;
    const std::size_t k = grid.points.size() - 1;
    Eigen::MatrixXd cov(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j <= i; ++j)
            cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                    bridge_cov(p, grid.points[i], grid.points[j]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("covariance factorization: eigendecomposition failed");
    const double lmax = es.eigenvalues().maxCoeff();
    Eigen::VectorXd clipped = es.eigenvalues();
    for (Eigen::Index i = 0; i < clipped.size(); ++i) {
        if (clipped(i) < -1e-9 * lmax)
            throw std::runtime_error("covariance factorization: matrix indefinite, eigenvalue " +
                                     std::to_string(clipped(i)));
        clipped(i) = std::sqrt(std::max(clipped(i), 0.0));
    }
    return es.eigenvectors() * clipped.asDiagonal();
}

}  // namespace

double bridge_drift(const BridgeSpec& spec, double x, double t) {
    require_centered(spec, "bridge_drift");
    const OuParams& p = spec.params;
    if (!(t >= 0.0 && t < p.T))
        throw std::domain_error("bridge_drift: t must lie in [0, T) (singular at T)");
    const double tau = p.T - t;
    if (std::abs(p.theta) * tau < 1e-8) return (spec.z - x) / tau;
    return -theta_coth(p.theta, tau) * x + theta_over_sinh(p.theta, tau) * spec.z;
}

BridgePath simulate_euler(const BridgeSpec& spec, const TimeGrid& grid, NormalStream& noise) {
    require_centered(spec, "simulate_euler");
    const OuParams& p = spec.params;
    grid.validate(p.T);
    const std::size_t n = grid.points.size();
    BridgePath path;
    path.grid = &grid;
    path.values.resize(n);
    path.values[0] = 0.0;
    double x = 0.0;
    for (std::size_t i = 0; i + 2 < n; ++i) {
        const double t = grid.points[i];
        const double dt = grid.points[i + 1] - t;
        if (theta_coth(p.theta, p.T - t) * dt >= 1.0)
            throw StabilityError("simulate_euler: step " + std::to_string(i) + " at t = " +
                                 std::to_string(t) + " too coarse for the bridge drift");
        x += bridge_drift(spec, x, t) * dt + p.sigma * std::sqrt(dt) * noise.normal();
        path.values[i + 1] = x;
    }
    path.values[n - 1] = spec.z;  // drift is singular at T; the pinning is exact
    return path;
}

StartReduction reduce_random_start(const BridgeSpec& spec, double u) {
    const OuParams& p = spec.params;
    spec.validate();
    StartReduction r;
    if (p.sigma0 == 0.0) {
        r.x0_draw = p.x0;
    } else {
        r.x0_draw = bridge_mean(spec, 0.0) + std::sqrt(bridge_cov(p, 0.0, 0.0)) * u;
    }
    const double e = p.theta_is_zero() ? 1.0 : std::exp(-p.theta * p.T);
    r.z_centered = spec.z - r.x0_draw * e - p.mu * (1.0 - e);
    return r;
}

double start_component(const OuParams& p, double x0_draw, double t) {
    const double e = p.theta_is_zero() ? 1.0 : std::exp(-p.theta * t);
    return x0_draw * e + p.mu * (1.0 - e);
}

BridgePath simulate_exact(const BridgeSpec& spec, const TimeGrid& grid, NormalStream& noise) {
    const OuParams& p = spec.params;
    spec.validate();
    grid.validate(p.T);
    const std::size_t n = grid.points.size();
    if (n > 2000) throw std::invalid_argument("simulate_exact: grid count must be <= 2000");
    const std::size_t k = n - 1;  // the endpoint is deterministic
    const Eigen::MatrixXd factor = covariance_factor(spec, grid);
    Eigen::VectorXd g(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) g(static_cast<Eigen::Index>(i)) = noise.normal();
    const Eigen::VectorXd x = factor * g;

    BridgePath path;
    path.grid = &grid;
    path.values.resize(n);
    for (std::size_t i = 0; i < k; ++i)
        path.values[i] = bridge_mean(spec, grid.points[i]) + x(static_cast<Eigen::Index>(i));
    path.values[n - 1] = spec.z;
    return path;
}

namespace {

std::vector<double> one_path(const BridgeSpec& spec, const TimeGrid& grid,
                             const Eigen::MatrixXd* exact_factor, std::uint64_t seed,
                             int path_id, Scheme scheme) {
    NormalStream noise(seed, static_cast<std::uint64_t>(path_id));
    const OuParams& p = spec.params;
    const std::size_t n = grid.points.size();
    std::vector<double> out(n);

    if (scheme == Scheme::Exact) {
        const std::size_t k = n - 1;
        Eigen::VectorXd g(static_cast<Eigen::Index>(k));
        for (std::size_t i = 0; i < k; ++i) g(static_cast<Eigen::Index>(i)) = noise.normal();
        const Eigen::VectorXd x = (*exact_factor) * g;
        for (std::size_t i = 0; i < k; ++i)
            out[i] = bridge_mean(spec, grid.points[i]) + x(static_cast<Eigen::Index>(i));
        out[n - 1] = spec.z;
        return out;
    }

    const StartReduction red = reduce_random_start(spec, noise.normal());
    BridgeSpec centered;
    centered.params = p;
    centered.params.sigma0 = 0.0;
    centered.params.x0 = 0.0;
    centered.params.mu = 0.0;
    centered.z = red.z_centered;
    const BridgePath base = simulate_euler(centered, grid, noise);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = start_component(p, red.x0_draw, grid.points[i]) + base.values[i];
    out[n - 1] = spec.z;  // algebraic cancellation made exact
    return out;
}

}  // namespace

std::vector<std::vector<double>> simulate_paths(const BridgeSpec& spec, const TimeGrid& grid,
                                                int n_paths, std::uint64_t seed, Scheme scheme) {
    spec.validate();
    grid.validate(spec.params.T);
    if (n_paths < 1) throw std::invalid_argument("simulate_paths: n_paths must be >= 1");
    Eigen::MatrixXd factor;
    if (scheme == Scheme::Exact) {
        if (grid.size() > 2000)
            throw std::invalid_argument("simulate_paths: exact scheme needs grid <= 2000");
        factor = covariance_factor(spec, grid);
    }
    std::vector<std::vector<double>> paths(static_cast<std::size_t>(n_paths));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_paths; ++i)
        paths[static_cast<std::size_t>(i)] = one_path(spec, grid, &factor, seed, i, scheme);
    return paths;
}

namespace serial_ref {

std::vector<std::vector<double>> simulate_paths(const BridgeSpec& spec, const TimeGrid& grid,
                                                int n_paths, std::uint64_t seed, Scheme scheme) {
    spec.validate();
    grid.validate(spec.params.T);
    if (n_paths < 1) throw std::invalid_argument("simulate_paths: n_paths must be >= 1");
    Eigen::MatrixXd factor;
    if (scheme == Scheme::Exact) factor = covariance_factor(spec, grid);
    std::vector<std::vector<double>> paths(static_cast<std::size_t>(n_paths));
    for (int i = 0; i < n_paths; ++i)
        paths[static_cast<std::size_t>(i)] = one_path(spec, grid, &factor, seed, i, scheme);
    return paths;
}

}  // namespace serial_ref

}  // namespace oubridge
