#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace oubridge {

struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Adaptive Simpson with interval bisection. Deterministic; abs_tol is an
// absolute tolerance on the whole interval, split proportionally on recursion.
// The first few levels always subdivide so oscillatory integrands whose nodes
// happen to align with the initial Simpson points are not mistaken for zero.
template <class F>
double integrate(F&& f, double a, double b, double abs_tol = 1e-12, int max_depth = 60) {
    static constexpr int kMinDepth = 6;
    auto simpson = [&](double lo, double hi, double flo, double fmid, double fhi) {
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    };
    struct Rec {
        F& f;
        int max_depth;
        double operator()(double lo, double hi, double flo, double fmid, double fhi,
                          double whole, double tol, int depth) {
            const double m = 0.5 * (lo + hi);
            const double fl = f(0.5 * (lo + m));
            const double fr = f(0.5 * (m + hi));
            const double left = (m - lo) / 6.0 * (flo + 4.0 * fl + fmid);
            const double right = (hi - m) / 6.0 * (fmid + 4.0 * fr + fhi);
            const double delta = left + right - whole;
            if (depth >= kMinDepth && std::abs(delta) <= 15.0 * tol)
                return left + right + delta / 15.0;
            if (depth >= max_depth)
                throw QuadratureError("adaptive quadrature: max depth " +
                                      std::to_string(max_depth) + " reached on [" +
                                      std::to_string(lo) + ", " + std::to_string(hi) +
                                      "], residual " + std::to_string(delta));
            return (*this)(lo, m, flo, fl, fmid, left, 0.5 * tol, depth + 1) +
                   (*this)(m, hi, fmid, fr, fhi, right, 0.5 * tol, depth + 1);
        }
    };
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    Rec rec{f, max_depth};
    return rec(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), abs_tol, 0);
}

}  // namespace oubridge
