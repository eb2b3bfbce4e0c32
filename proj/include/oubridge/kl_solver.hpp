#pragma once

#include <string>
#include <vector>

#include "oubridge/ou_model.hpp"

namespace oubridge {

// Regime of the frequency equation
//   (sigma^2 - theta sigma0^2) sin(wT) = -w sigma0^2 cos(wT).
enum class FrequencyCase {
    DeterministicStart,  // sigma0 = 0: w_n = n pi / T
    CriticalRatio,       // sigma^2 = theta sigma0^2: w_n = (n - 1/2) pi / T
    SubCritical,         // theta sigma0^2 < sigma^2
    SuperCritical,       // theta sigma0^2 > sigma^2
};

const char* to_string(FrequencyCase c);

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Bracket {
    double lo = 0.0;
    double hi = 0.0;
};

// One eigenmode of the bridge covariance operator:
//   lambda_n = sigma^2 / (w_n^2 + theta^2),
//   e_n(t)   = norm * sin(w_n (t - T)).
struct KlMode {
    int n = 0;
    double omega = 0.0;
    double lambda = 0.0;
    double norm = 0.0;
};

struct KlBasis {
    OuParams params;
    FrequencyCase freq_case = FrequencyCase::DeterministicStart;
    std::vector<KlMode> modes;

    int order() const { return static_cast<int>(modes.size()); }
};

FrequencyCase classify_case(const OuParams& p);

// Residual of the frequency equation, R(w) = (s^2 - th s0^2) sin(wT) + w s0^2 cos(wT),
// and its derivative. Roots of R are the eigenfrequencies.
double frequency_residual(const OuParams& p, double omega);
double frequency_residual_deriv(const OuParams& p, double omega);

// One bracket per root, disjoint and increasing. Closed-form cases return
// degenerate brackets (lo == hi == root). In the super-critical case an extra
// first root on ]0, pi/2T[ is included whenever the residual changes sign
// there.
std::vector<Bracket> frequency_brackets(const OuParams& p, int n_max);

std::vector<double> solve_frequencies(const OuParams& p, int n_max);

double eigenvalue(double omega, const OuParams& p);

double eigenfunction_norm(double omega, const OuParams& p);

double eigenfunction_eval(const KlMode& mode, const OuParams& p, double t);

KlBasis kl_basis(const OuParams& p, int m);

}  // namespace oubridge
