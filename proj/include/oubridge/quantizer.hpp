#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "oubridge/bridge_sim.hpp"
#include "oubridge/kl_solver.hpp"
#include "oubridge/ou_model.hpp"

namespace oubridge {

// N points in R^m with cell masses; the solution object of the quantization
// problem for the product Gaussian of the leading KL coordinates.
struct Codebook {
    int dim = 0;
    std::vector<std::vector<double>> points;  // N x dim
    std::vector<double> probabilities;        // N, sums to 1
};

struct DistortionReport {
    int m = 0;
    double tail = 0.0;                 // sum of lambda_j for j > m
    double finite_dim_error_sq = 0.0;  // squared quantization error of the m leading coords
    double total_sq = 0.0;             // tail + finite_dim_error_sq, stored
};

struct FunctionalQuantizer {
    BridgeSpec spec;
    KlBasis basis;
    Codebook codebook;
    DistortionReport report;
};

struct QuantOptions {
    std::int64_t mc_budget = 0;  // 0: default 1e6 * min(1, 4/m)
    double tol = 1e-9;           // relative distortion decrease stopping rule
    int max_iters = 1000;
    std::int64_t eval_budget = 1'000'000;  // held-out distortion sample
    std::uint64_t seed = 0;
    // CLVQ learning schedule gamma_k = gamma0 * A / (A + k).
    double clvq_gamma0 = 0.5;
    double clvq_A = 1e4;
};

struct LloydStats {
    int iterations = 0;
    int reseeds = 0;  // dead-cell re-seeding events
    double train_distortion_sq = 0.0;
};

// Lloyd's algorithm for the product Gaussian with the given variances.
// m = 1 is fully deterministic (closed-form lobe means, Newton-polished);
// m >= 2 runs empirical Lloyd on a fixed Monte-Carlo sample, so distortion is
// non-increasing on the training sample.
Codebook lloyd(const std::vector<double>& variances, int N, const QuantOptions& opt = {},
               LloydStats* stats = nullptr);

// Online stochastic-gradient codebook optimization, refined by 10 Lloyd
// iterations at the end.
Codebook clvq(const std::vector<double>& variances, int N, std::int64_t steps,
              const QuantOptions& opt = {});

struct DistortionEstimate {
    double estimate = 0.0;   // E[min_a |G - a|^2]
    double std_error = 0.0;
    std::vector<double> cell_probabilities;
};

// Fresh-sample Monte-Carlo estimate, independent of any training sample.
// Chunked deterministic reduction, parallel over chunks.
DistortionEstimate distortion(const Codebook& codebook, const std::vector<double>& variances,
                              std::int64_t eval_budget, std::uint64_t seed);

namespace serial_ref {
DistortionEstimate distortion(const Codebook& codebook, const std::vector<double>& variances,
                              std::int64_t eval_budget, std::uint64_t seed);
}

// Closed-form squared distortion and cell masses for a 1-D Gaussian codebook.
double distortion_1d(const std::vector<double>& points, double variance);

// Exhaustive search of the truncation order: for each m <= m_max, tail + the
// optimized finite-dimensional error; returns the minimizing m (ties go to the
// smaller m) and all reports.
std::pair<int, std::vector<DistortionReport>> select_dimension(const OuParams& p, int N,
                                                               int m_max,
                                                               const QuantOptions& opt = {});

FunctionalQuantizer functional_quantizer(const BridgeSpec& spec, int N, int m_max,
                                         const QuantOptions& opt = {});

// One representative path per codepoint: bridge mean plus the KL modes scaled
// by the codepoint coordinates. Rows follow codebook order.
std::vector<std::vector<double>> quantizer_paths(const FunctionalQuantizer& fq,
                                                 const TimeGrid& grid);

struct RatePoint {
    int N = 0;
    double error = 0.0;  // E_N, not squared
    double std_error = 0.0;
};

struct RateResult {
    std::vector<RatePoint> points;
    double slope = 0.0;       // of log E_N against log log N
    double K_estimate = 0.0;  // E_N * sqrt(log N) at the largest N
};

RateResult rate_check(const BridgeSpec& spec, const std::vector<int>& N_values, int m_max,
                      const QuantOptions& opt = {});

}  // namespace oubridge
