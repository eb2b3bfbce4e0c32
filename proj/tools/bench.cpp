// Timing comparison of the OpenMP kernels against their serial references:
// batch path simulation, dense kernel assembly, and Monte-Carlo distortion.

#include <chrono>
#include <cstdio>
#include <functional>

#include "oubridge/bridge_sim.hpp"
#include "oubridge/oracle.hpp"
#include "oubridge/quantizer.hpp"

using namespace oubridge;

namespace {

double time_ms(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s serial %9.1f ms   parallel %9.1f ms   speedup %.2fx\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
    OuParams p;
    p.sigma0 = std::sqrt(0.5);
    BridgeSpec spec{p, 1.0};

    {
        const TimeGrid grid = TimeGrid::uniform(p.T, 257);
        const int n_paths = 20000;
        const double s = time_ms(
            [&] { (void)serial_ref::simulate_paths(spec, grid, n_paths, 1, Scheme::Euler); });
        const double par =
            time_ms([&] { (void)simulate_paths(spec, grid, n_paths, 1, Scheme::Euler); });
        report("simulate_paths (euler)", s, par);
    }
    {
        const TimeGrid grid = TimeGrid::uniform(p.T, 2000);
        const double s =
            time_ms([&] { (void)oracle::serial_ref::conditioned_kernel(p, grid); });
        const double par = time_ms([&] { (void)oracle::conditioned_kernel(p, grid); });
        report("conditioned_kernel (2000)", s, par);
    }
    {
        const Codebook cb = lloyd({0.2, 0.1, 0.05}, 32);
        const std::vector<double> v = {0.2, 0.1, 0.05};
        const double s =
            time_ms([&] { (void)serial_ref::distortion(cb, v, 4'000'000, 7); });
        const double par = time_ms([&] { (void)distortion(cb, v, 4'000'000, 7); });
        report("distortion (4e6 samples)", s, par);
    }
    return 0;
}
