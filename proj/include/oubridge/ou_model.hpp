#pragma once

#include <cmath>
#include <stdexcept>

namespace oubridge {

// Parameters of the SDE dX = theta*(mu - X) dt + sigma dW with X_0 ~ N(x0, sigma0^2).
// theta may be negative (mean repulsion).
struct OuParams {
    double theta = 1.0;
    double mu = 0.0;
    double sigma = 1.0;
    double sigma0 = 0.0;  // std dev of the initial value
    double x0 = 0.0;
    double T = 1.0;

    void validate() const {
        if (!(sigma > 0.0)) throw std::invalid_argument("OuParams: sigma must be > 0");
        if (!(T > 0.0)) throw std::invalid_argument("OuParams: T must be > 0");
        if (!(sigma0 >= 0.0)) throw std::invalid_argument("OuParams: sigma0 must be >= 0");
    }

    // The theta ~ 0 formulas are the removable limits of the generic ones;
    // switch when |theta|*T is far below roundoff of the exponentials.
    bool theta_is_zero() const { return std::abs(theta) * T < 1e-10; }
};

// OU process conditioned on X_T = z.
struct BridgeSpec {
    OuParams params;
    double z = 0.0;

    void validate() const {
        params.validate();
        if (!std::isfinite(z)) throw std::invalid_argument("BridgeSpec: z must be finite");
    }
};

// E[X_t] = x0 e^{-theta t} + mu (1 - e^{-theta t}).
double process_mean(const OuParams& p, double t);

// Cov(X_s, X_t) of the unconditioned process, prior variance included.
double process_cov(const OuParams& p, double s, double t);

// Covariance of the bridge (process conditioned on X_T).
double bridge_cov(const OuParams& p, double s, double t);

// E[X_t | X_T = z].
double bridge_mean(const BridgeSpec& spec, double t);

// Integral of the bridge variance over [0, T]; equals the eigenvalue trace.
double total_bridge_variance(const OuParams& p);

}  // namespace oubridge
