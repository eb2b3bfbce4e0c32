#include "oubridge/kl_solver.hpp"

#include <cmath>

namespace oubridge {

const char* to_string(FrequencyCase c) {
    switch (c) {
        case FrequencyCase::DeterministicStart: return "DeterministicStart";
        case FrequencyCase::CriticalRatio: return "CriticalRatio";
        case FrequencyCase::SubCritical: return "SubCritical";
        case FrequencyCase::SuperCritical: return "SuperCritical";
    }
    return "?";
}

FrequencyCase classify_case(const OuParams& p) {
    p.validate();
    if (p.sigma0 == 0.0) return FrequencyCase::DeterministicStart;
    const double s2 = p.sigma * p.sigma;
    const double ts02 = p.theta * p.sigma0 * p.sigma0;
    // Near-critical parameters route to the closed form; the tan equation is
    // ill-conditioned there.
    if (std::abs(s2 - ts02) <= 1e-14 * (s2 + std::abs(ts02)))
        return FrequencyCase::CriticalRatio;
    return ts02 < s2 ? FrequencyCase::SubCritical : FrequencyCase::SuperCritical;
}

double frequency_residual(const OuParams& p, double omega) {
    const double s02 = p.sigma0 * p.sigma0;
    return (p.sigma * p.sigma - p.theta * s02) * std::sin(omega * p.T) +
           omega * s02 * std::cos(omega * p.T);
}

double frequency_residual_deriv(const OuParams& p, double omega) {
    const double s02 = p.sigma0 * p.sigma0;
    const double wt = omega * p.T;
    return (p.sigma * p.sigma - p.theta * s02) * p.T * std::cos(wt) + s02 * std::cos(wt) -
           omega * s02 * p.T * std::sin(wt);
}

std::vector<Bracket> frequency_brackets(const OuParams& p, int n_max) {
    if (n_max < 1) throw std::invalid_argument("frequency_brackets: n_max must be >= 1");
    const FrequencyCase fc = classify_case(p);
    const double pi_T = M_PI / p.T;
    std::vector<Bracket> out;
    out.reserve(static_cast<std::size_t>(n_max));
    switch (fc) {
        case FrequencyCase::DeterministicStart:
            for (int n = 1; n <= n_max; ++n) out.push_back({n * pi_T, n * pi_T});
            break;
        case FrequencyCase::CriticalRatio:
            for (int n = 1; n <= n_max; ++n)
                out.push_back({(n - 0.5) * pi_T, (n - 0.5) * pi_T});
            break;
        case FrequencyCase::SubCritical:
            // w_n in ](n - 1/2) pi/T, n pi/T[; the residual has opposite signs
            // at the endpoints by construction.
            for (int n = 1; n <= n_max; ++n)
                out.push_back({(n - 0.5) * pi_T, n * pi_T});
            break;
        case FrequencyCase::SuperCritical: {
            // One root in each ]k pi/T, k pi/T + pi/2T[, plus possibly one on
            // ]0, pi/2T[. The extra root is detected by a sign check, not by
            // the closed-form inequality on the parameters. The lower endpoint
            // is nudged off the trivial root at 0; the upper endpoint stays at
            // pi/2T exactly, where the residual equals sigma^2 - theta
            // sigma0^2 up to roundoff, so a root arbitrarily close to pi/2T is
            // still seen (the exactly-critical case never reaches this branch).
            const double eps = 1e-9 * (0.5 * pi_T);
            if (frequency_residual(p, eps) * frequency_residual(p, 0.5 * pi_T) < 0.0)
                out.push_back({eps, 0.5 * pi_T});
            for (int k = 1; static_cast<int>(out.size()) < n_max; ++k)
                out.push_back({k * pi_T, (k + 0.5) * pi_T});
            break;
        }
    }
    return out;
}

namespace {

// Bisection to a coarse width, then Newton polished inside the bracket with a
// bisection fallback whenever a Newton step leaves it.
double refine_root(const OuParams& p, Bracket b) {
    double flo = frequency_residual(p, b.lo);
    double fhi = frequency_residual(p, b.hi);
    if (flo == 0.0) return b.lo;
    if (fhi == 0.0) return b.hi;
    if (flo * fhi > 0.0)
        throw SolverError("no sign change in bracket [" + std::to_string(b.lo) + ", " +
                          std::to_string(b.hi) + "]: R = " + std::to_string(flo) + ", " +
                          std::to_string(fhi));
    const double coarse = 1e-3 * M_PI / p.T;
    while (b.hi - b.lo > coarse) {
        const double mid = 0.5 * (b.lo + b.hi);
        const double fm = frequency_residual(p, mid);
        if (fm == 0.0) return mid;
        if (flo * fm < 0.0) {
            b.hi = mid;
            fhi = fm;
        } else {
            b.lo = mid;
            flo = fm;
        }
    }
    double w = 0.5 * (b.lo + b.hi);
    for (int it = 0; it < 100; ++it) {
        const double r = frequency_residual(p, w);
        if (r == 0.0) return w;
        if (r * flo < 0.0) b.hi = w; else b.lo = w;
        const double d = frequency_residual_deriv(p, w);
        double next = (d != 0.0) ? w - r / d : b.lo;
        if (!(next > b.lo && next < b.hi)) next = 0.5 * (b.lo + b.hi);
        if (std::abs(next - w) <= 1e-16 * w) return next;
        w = next;
    }
    return w;
}

}  // namespace

std::vector<double> solve_frequencies(const OuParams& p, int n_max) {
    const FrequencyCase fc = classify_case(p);
    const std::vector<Bracket> brackets = frequency_brackets(p, n_max);
    std::vector<double> roots;
    roots.reserve(brackets.size());
    for (const Bracket& b : brackets) {
        if (fc == FrequencyCase::DeterministicStart || fc == FrequencyCase::CriticalRatio) {
            roots.push_back(b.lo);  // closed form, bracket is degenerate
        } else {
            roots.push_back(refine_root(p, b));
        }
    }
    return roots;
}

double eigenvalue(double omega, const OuParams& p) {
    return p.sigma * p.sigma / (omega * omega + p.theta * p.theta);
}

double eigenfunction_norm(double omega, const OuParams& p) {
    const double bracket = 0.5 * p.T - std::sin(2.0 * omega * p.T) / (4.0 * omega);
    if (!(bracket > 0.0))
        throw SolverError("eigenfunction normalization bracket non-positive at w = " +
                          std::to_string(omega));
    return 1.0 / std::sqrt(bracket);
}

double eigenfunction_eval(const KlMode& mode, const OuParams& p, double t) {
    if (!(t >= 0.0 && t <= p.T))
        throw std::domain_error("eigenfunction_eval: t outside [0, T]");
    return mode.norm * std::sin(mode.omega * (t - p.T));
}

KlBasis kl_basis(const OuParams& p, int m) {
    if (m < 1) throw std::invalid_argument("kl_basis: m must be >= 1");
    KlBasis basis;
    basis.params = p;
    basis.freq_case = classify_case(p);
    const std::vector<double> omegas = solve_frequencies(p, m);
    basis.modes.reserve(omegas.size());
    for (int n = 1; n <= m; ++n) {
        const double w = omegas[static_cast<std::size_t>(n - 1)];
        // Boundary conditions of the covariance-operator ODE for g = lambda e_n:
        // g(T) = 0 holds identically; the condition at 0 is the frequency
        // residual up to the factor lambda * norm (= ||g||_inf up to sin bounds).
        const double scale = std::abs(p.sigma * p.sigma - p.theta * p.sigma0 * p.sigma0) +
                             w * p.sigma0 * p.sigma0;
        if (std::abs(frequency_residual(p, w)) >= 1e-10 * scale)
            throw SolverError("mode " + std::to_string(n) + ": boundary-condition residual " +
                              std::to_string(frequency_residual(p, w)) + " at w = " +
                              std::to_string(w));
        basis.modes.push_back({n, w, eigenvalue(w, p), eigenfunction_norm(w, p)});
    }
    return basis;
}

}  // namespace oubridge
