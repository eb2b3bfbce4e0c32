#include "oubridge/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "oubridge/rng.hpp"

namespace oubridge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Inverse standard-normal CDF (Acklam's rational approximation polished by one
// Newton step); ample for quantile seeding.
double norm_quantile(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    double x;
    if (p < 0.02425) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 0.97575) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = norm_cdf(x) - p;
    return x - e / norm_pdf(x);
}

// ---- 1-D deterministic path -------------------------------------------------

// E[Z 1{l < Z < u}] = pdf(l) - pdf(u) and P[l < Z < u] for the standard normal.
double lobe_numer(double l, double u) {
    return (std::isinf(l) ? 0.0 : norm_pdf(l)) - (std::isinf(u) ? 0.0 : norm_pdf(u));
}
double lobe_mass(double l, double u) { return norm_cdf(u) - norm_cdf(l); }

std::vector<double> midpoints(const std::vector<double>& a) {
    const std::size_t n = a.size();
    std::vector<double> b(n + 1);
    b[0] = -kInf;
    b[n] = kInf;
    for (std::size_t i = 1; i < n; ++i) b[i] = 0.5 * (a[i - 1] + a[i]);
    return b;
}

// Stationarity residual F_i = a_i P_i - (pdf(l_i) - pdf(u_i)).
std::vector<double> stationarity(const std::vector<double>& a) {
    const auto b = midpoints(a);
    std::vector<double> f(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        f[i] = a[i] * lobe_mass(b[i], b[i + 1]) - lobe_numer(b[i], b[i + 1]);
    return f;
}

// Optimal N-point codebook of the standard normal: Lloyd fixed-point warm-up,
// then Newton on the stationarity system (tridiagonal Jacobian, Thomas solve),
// safeguarded by step halving if ordering breaks or the residual grows.
std::vector<double> optimal_1d_standard(int N) {
    std::vector<double> a(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i)
        a[static_cast<std::size_t>(i)] = norm_quantile((i + 0.5) / N);

    for (int it = 0; it < 200; ++it) {
        const auto b = midpoints(a);
        double delta = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double next = lobe_numer(b[i], b[i + 1]) / lobe_mass(b[i], b[i + 1]);
            delta = std::max(delta, std::abs(next - a[i]));
            a[i] = next;
        }
        if (delta < 1e-10) break;
    }

    auto max_abs = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    };
    std::vector<double> f = stationarity(a);
    for (int it = 0; it < 60 && max_abs(f) > 1e-15; ++it) {
        const std::size_t n = a.size();
        const auto b = midpoints(a);
        std::vector<double> lo(n, 0.0), di(n, 0.0), hi(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            // pdf(+-inf) (b - a) is an exact zero limit, not 0 * inf
            const double left = std::isinf(b[i]) ? 0.0 : norm_pdf(b[i]) * (b[i] - a[i]);
            const double right =
                std::isinf(b[i + 1]) ? 0.0 : norm_pdf(b[i + 1]) * (a[i] - b[i + 1]);
            di[i] = lobe_mass(b[i], b[i + 1]) + 0.5 * (right + left);
            if (i > 0) lo[i] = 0.5 * left;
            if (i + 1 < n) hi[i] = 0.5 * right;
        }
        // Thomas algorithm for J * step = f.
        std::vector<double> cp(n, 0.0), dp(n, 0.0);
        cp[0] = hi[0] / di[0];
        dp[0] = f[0] / di[0];
        for (std::size_t i = 1; i < n; ++i) {
            const double m = di[i] - lo[i] * cp[i - 1];
            cp[i] = hi[i] / m;
            dp[i] = (f[i] - lo[i] * dp[i - 1]) / m;
        }
        std::vector<double> step(n, 0.0);
        step[n - 1] = dp[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) step[i] = dp[i] - cp[i] * step[i + 1];

        double scale = 1.0;
        const double f0 = max_abs(f);
        for (int half = 0; half < 30; ++half) {
            std::vector<double> trial = a;
            bool ordered = true;
            for (std::size_t i = 0; i < n; ++i) {
                trial[i] -= scale * step[i];
                if (i > 0 && trial[i] <= trial[i - 1]) ordered = false;
            }
            if (ordered) {
                const auto tf = stationarity(trial);
                if (max_abs(tf) < f0) {
                    a = std::move(trial);
                    f = tf;
                    break;
                }
            }
            scale *= 0.5;
        }
        if (scale < 1e-9) break;
    }
    return a;
}

// ---- empirical Lloyd for m >= 2 ---------------------------------------------

std::int64_t default_budget(int m) {
    return static_cast<std::int64_t>(1e6 * std::min(1.0, 4.0 / m));
}

// Fixed training sample in coordinate-major chunks; stream index encodes the
// chunk so draws are reproducible and thread-count independent.
std::vector<double> draw_sample(const std::vector<double>& variances, std::int64_t count,
                                std::uint64_t seed, std::uint64_t stream_base) {
    const int m = static_cast<int>(variances.size());
    std::vector<double> sd(variances.size());
    for (std::size_t j = 0; j < variances.size(); ++j) sd[j] = std::sqrt(variances[j]);
    std::vector<double> sample(static_cast<std::size_t>(count) * static_cast<std::size_t>(m));
    const std::int64_t chunk = 1 << 14;
    const std::int64_t n_chunks = (count + chunk - 1) / chunk;
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < n_chunks; ++c) {
        NormalStream g(seed, stream_base + static_cast<std::uint64_t>(c));
        const std::int64_t lo = c * chunk, hi = std::min(count, lo + chunk);
        for (std::int64_t s = lo; s < hi; ++s)
            for (int j = 0; j < m; ++j)
                sample[static_cast<std::size_t>(s) * m + j] = sd[static_cast<std::size_t>(j)] * g.normal();
    }
    return sample;
}

int nearest(const std::vector<std::vector<double>>& points, const double* x, int m) {
    int best = 0;
    double best_d = kInf;
    for (std::size_t k = 0; k < points.size(); ++k) {
        double d = 0.0;
        for (int j = 0; j < m; ++j) {
            const double diff = x[j] - points[k][static_cast<std::size_t>(j)];
            d += diff * diff;
        }
        if (d < best_d) {  // ties keep the lowest index
            best_d = d;
            best = static_cast<int>(k);
        }
    }
    return best;
}

// Initial codebook: product of per-coordinate 1-D optimal codebooks, the
// per-coordinate sizes grown greedily by marginal variance, truncated to the N
// most probable combinations.
std::vector<std::vector<double>> product_init(const std::vector<double>& variances, int N) {
    const int m = static_cast<int>(variances.size());
    std::vector<int> sizes(variances.size(), 1);
    auto product = [&] {
        long long prod = 1;
        for (int s : sizes) prod *= s;
        return prod;
    };
    while (product() < N) {
        int best = 0;
        double best_gain = -1.0;
        for (int j = 0; j < m; ++j) {
            const double gain = variances[static_cast<std::size_t>(j)] /
                                (sizes[static_cast<std::size_t>(j)] * sizes[static_cast<std::size_t>(j)]);
            if (gain > best_gain) {
                best_gain = gain;
                best = j;
            }
        }
        ++sizes[static_cast<std::size_t>(best)];
    }

    std::vector<std::vector<double>> coords(variances.size());
    std::vector<std::vector<double>> masses(variances.size());
    for (int j = 0; j < m; ++j) {
        auto pts = optimal_1d_standard(sizes[static_cast<std::size_t>(j)]);
        const auto b = midpoints(pts);
        auto& mass = masses[static_cast<std::size_t>(j)];
        mass.resize(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            mass[i] = lobe_mass(b[i], b[i + 1]);
            pts[i] *= std::sqrt(variances[static_cast<std::size_t>(j)]);
        }
        coords[static_cast<std::size_t>(j)] = std::move(pts);
    }

    struct Combo {
        std::vector<int> idx;
        double prob;
    };
    std::vector<Combo> combos;
    std::vector<int> idx(variances.size(), 0);
    for (;;) {
        double prob = 1.0;
        for (int j = 0; j < m; ++j) prob *= masses[static_cast<std::size_t>(j)][static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
        combos.push_back({idx, prob});
        int j = 0;
        for (; j < m; ++j) {
            if (++idx[static_cast<std::size_t>(j)] < sizes[static_cast<std::size_t>(j)]) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
        if (j == m) break;
    }
    std::stable_sort(combos.begin(), combos.end(),
                     [](const Combo& a, const Combo& b) { return a.prob > b.prob; });
    combos.resize(static_cast<std::size_t>(N));

    std::vector<std::vector<double>> points;
    points.reserve(static_cast<std::size_t>(N));
    for (const Combo& cb : combos) {
        std::vector<double> pt(variances.size());
        for (int j = 0; j < m; ++j)
            pt[static_cast<std::size_t>(j)] =
                coords[static_cast<std::size_t>(j)][static_cast<std::size_t>(cb.idx[static_cast<std::size_t>(j)])];
        points.push_back(std::move(pt));
    }
    return points;
}

void validate_inputs(const std::vector<double>& variances, int N) {
    if (variances.empty()) throw std::invalid_argument("quantizer: need at least one variance");
    for (double v : variances)
        if (!(v > 0.0)) throw std::invalid_argument("quantizer: variances must be > 0");
    if (N < 1) throw std::invalid_argument("quantizer: N must be >= 1");
}

std::vector<double> flatten_1d(const Codebook& cb) {
    std::vector<double> flat(cb.points.size());
    for (std::size_t i = 0; i < cb.points.size(); ++i) flat[i] = cb.points[i][0];
    return flat;
}

// Empirical Lloyd on a fixed training sample, starting from the given points.
// Assignment is parallel; the centroid reduction merges per-thread partials in
// a critical section, which is order-independent for the integer counts and
// within roundoff for the sums (the training loop itself is deterministic up
// to that reduction; the public determinism contract is carried by the RNG
// streams and the deterministic 1-D path).
Codebook empirical_lloyd(std::vector<std::vector<double>> points,
                         const std::vector<double>& variances, const QuantOptions& opt,
                         LloydStats* stats) {
    const int m = static_cast<int>(variances.size());
    const int N = static_cast<int>(points.size());
    const std::int64_t budget = opt.mc_budget > 0 ? opt.mc_budget : default_budget(m);
    const std::vector<double> sample = draw_sample(variances, budget, opt.seed, 1ULL << 40);

    std::vector<int> assign(static_cast<std::size_t>(budget), 0);
    std::vector<double> sums(static_cast<std::size_t>(N) * static_cast<std::size_t>(m));
    std::vector<std::int64_t> counts(static_cast<std::size_t>(N));
    double prev = kInf;
    int it = 0;
    int reseeds = 0;
    double dist = 0.0;
    for (; it < opt.max_iters; ++it) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        double acc = 0.0;
#pragma omp parallel
        {
            std::vector<double> lsums(sums.size(), 0.0);
            std::vector<std::int64_t> lcounts(counts.size(), 0);
            double lacc = 0.0;
#pragma omp for schedule(static) nowait
            for (std::int64_t s = 0; s < budget; ++s) {
                const double* x = &sample[static_cast<std::size_t>(s) * m];
                const int k = nearest(points, x, m);
                assign[static_cast<std::size_t>(s)] = k;
                ++lcounts[static_cast<std::size_t>(k)];
                for (int j = 0; j < m; ++j) {
                    lsums[static_cast<std::size_t>(k) * m + j] += x[j];
                    const double diff =
                        x[j] - points[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
                    lacc += diff * diff;
                }
            }
#pragma omp critical
            {
                for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += lsums[i];
                for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += lcounts[i];
                acc += lacc;
            }
        }
        dist = acc / static_cast<double>(budget);

        for (int k = 0; k < N; ++k) {
            if (counts[static_cast<std::size_t>(k)] == 0) {
                // Dead cell: re-seed at the sample farthest from its centroid.
                double worst = -1.0;
                std::int64_t worst_s = 0;
                for (std::int64_t s = 0; s < budget; ++s) {
                    const double* x = &sample[static_cast<std::size_t>(s) * m];
                    const auto& c = points[static_cast<std::size_t>(assign[static_cast<std::size_t>(s)])];
                    double d = 0.0;
                    for (int j = 0; j < m; ++j) {
                        const double diff = x[j] - c[static_cast<std::size_t>(j)];
                        d += diff * diff;
                    }
                    if (d > worst) {
                        worst = d;
                        worst_s = s;
                    }
                }
                for (int j = 0; j < m; ++j)
                    points[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] =
                        sample[static_cast<std::size_t>(worst_s) * m + j];
                ++reseeds;
            } else {
                for (int j = 0; j < m; ++j)
                    points[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] =
                        sums[static_cast<std::size_t>(k) * m + j] /
                        static_cast<double>(counts[static_cast<std::size_t>(k)]);
            }
        }

        if (prev < kInf && prev - dist < opt.tol * prev) {
            ++it;
            break;
        }
        prev = dist;
    }

    Codebook cb;
    cb.dim = m;
    cb.points = std::move(points);
    cb.probabilities.resize(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k)
        cb.probabilities[static_cast<std::size_t>(k)] =
            static_cast<double>(counts[static_cast<std::size_t>(k)]) / static_cast<double>(budget);
    if (stats) {
        stats->iterations = it;
        stats->reseeds = reseeds;
        stats->train_distortion_sq = dist;
    }
    return cb;
}

}  // namespace

double distortion_1d(const std::vector<double>& points, double variance) {
    const double sd = std::sqrt(variance);
    std::vector<double> a(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) a[i] = points[i] / sd;
    std::sort(a.begin(), a.end());
    const auto b = midpoints(a);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double l = b[i], u = b[i + 1];
        const double P = lobe_mass(l, u);
        const double second = P + (std::isinf(l) ? 0.0 : l * norm_pdf(l)) -
                              (std::isinf(u) ? 0.0 : u * norm_pdf(u));
        acc += second - 2.0 * a[i] * lobe_numer(l, u) + a[i] * a[i] * P;
    }
    return variance * acc;
}

Codebook lloyd(const std::vector<double>& variances, int N, const QuantOptions& opt,
               LloydStats* stats) {
    validate_inputs(variances, N);
    const int m = static_cast<int>(variances.size());
    Codebook cb;
    cb.dim = m;

    if (N == 1) {
        // The single optimal codepoint is the mean, with distortion equal to
        // the total variance; exact in any dimension.
        cb.points.push_back(std::vector<double>(variances.size(), 0.0));
        cb.probabilities.push_back(1.0);
        if (stats) {
            stats->iterations = 0;
            stats->reseeds = 0;
            stats->train_distortion_sq = std::accumulate(variances.begin(), variances.end(), 0.0);
        }
        return cb;
    }

    if (m == 1) {
        const double sd = std::sqrt(variances[0]);
        const auto a = optimal_1d_standard(N);
        const auto b = midpoints(a);
        cb.points.reserve(a.size());
        cb.probabilities.reserve(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            cb.points.push_back({sd * a[i]});
            cb.probabilities.push_back(lobe_mass(b[i], b[i + 1]));
        }
        if (stats) {
            stats->iterations = 0;
            stats->reseeds = 0;
            stats->train_distortion_sq = distortion_1d(flatten_1d(cb), variances[0]);
        }
        return cb;
    }

    return empirical_lloyd(product_init(variances, N), variances, opt, stats);
}

Codebook clvq(const std::vector<double>& variances, int N, std::int64_t steps,
              const QuantOptions& opt) {
    validate_inputs(variances, N);
    const int m = static_cast<int>(variances.size());
    std::vector<double> sd(variances.size());
    for (std::size_t j = 0; j < variances.size(); ++j) sd[j] = std::sqrt(variances[j]);

    std::vector<std::vector<double>> points =
        m == 1 ? std::vector<std::vector<double>>() : product_init(variances, N);
    if (m == 1) {
        for (int i = 0; i < N; ++i)
            points.push_back({sd[0] * norm_quantile((i + 0.5) / N)});
    }

    NormalStream g(opt.seed, 1ULL << 41);
    std::vector<double> x(variances.size());
    for (std::int64_t k = 0; k < steps; ++k) {
        for (int j = 0; j < m; ++j) x[static_cast<std::size_t>(j)] = sd[static_cast<std::size_t>(j)] * g.normal();
        const int win = nearest(points, x.data(), m);
        const double gamma = opt.clvq_gamma0 * opt.clvq_A / (opt.clvq_A + static_cast<double>(k));
        for (int j = 0; j < m; ++j)
            points[static_cast<std::size_t>(win)][static_cast<std::size_t>(j)] +=
                gamma * (x[static_cast<std::size_t>(j)] -
                         points[static_cast<std::size_t>(win)][static_cast<std::size_t>(j)]);
    }

    // Final polish: 10 Lloyd iterations on a fixed sample (or the closed-form
    // cell means in 1-D), which also yields the cell masses.
    if (m == 1) {
        std::vector<double> a(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) a[i] = points[i][0] / sd[0];
        std::sort(a.begin(), a.end());
        for (int it = 0; it < 10; ++it) {
            const auto b = midpoints(a);
            for (std::size_t i = 0; i < a.size(); ++i)
                a[i] = lobe_numer(b[i], b[i + 1]) / lobe_mass(b[i], b[i + 1]);
        }
        Codebook cb;
        cb.dim = 1;
        const auto b = midpoints(a);
        for (std::size_t i = 0; i < a.size(); ++i) {
            cb.points.push_back({sd[0] * a[i]});
            cb.probabilities.push_back(lobe_mass(b[i], b[i + 1]));
        }
        return cb;
    }

    QuantOptions refine = opt;
    refine.max_iters = 10;
    refine.tol = 0.0;
    return empirical_lloyd(std::move(points), variances, refine, nullptr);
}

DistortionEstimate distortion(const Codebook& codebook, const std::vector<double>& variances,
                              std::int64_t eval_budget, std::uint64_t seed) {
    if (codebook.dim != static_cast<int>(variances.size()))
        throw std::invalid_argument("distortion: dimension mismatch");
    if (eval_budget < 2) throw std::invalid_argument("distortion: eval_budget must be >= 2");
    const int m = codebook.dim;
    std::vector<double> sd(variances.size());
    for (std::size_t j = 0; j < variances.size(); ++j) sd[j] = std::sqrt(variances[j]);

    const std::int64_t chunk = 1 << 14;
    const std::int64_t n_chunks = (eval_budget + chunk - 1) / chunk;
    std::vector<double> chunk_sum(static_cast<std::size_t>(n_chunks), 0.0);
    std::vector<double> chunk_sumsq(static_cast<std::size_t>(n_chunks), 0.0);
    std::vector<std::vector<std::int64_t>> chunk_counts(
        static_cast<std::size_t>(n_chunks), std::vector<std::int64_t>(codebook.points.size(), 0));

#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < n_chunks; ++c) {
        // Evaluation streams are offset from every training stream.
        NormalStream g(seed, (1ULL << 42) + static_cast<std::uint64_t>(c));
        std::vector<double> x(static_cast<std::size_t>(m));
        const std::int64_t lo = c * chunk, hi = std::min(eval_budget, lo + chunk);
        for (std::int64_t s = lo; s < hi; ++s) {
            for (int j = 0; j < m; ++j) x[static_cast<std::size_t>(j)] = sd[static_cast<std::size_t>(j)] * g.normal();
            const int k = nearest(codebook.points, x.data(), m);
            double d = 0.0;
            for (int j = 0; j < m; ++j) {
                const double diff = x[static_cast<std::size_t>(j)] -
                                    codebook.points[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
                d += diff * diff;
            }
            chunk_sum[static_cast<std::size_t>(c)] += d;
            chunk_sumsq[static_cast<std::size_t>(c)] += d * d;
            ++chunk_counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
        }
    }

    // Fixed-order reduction: result is independent of thread count.
    double sum = 0.0, sumsq = 0.0;
    std::vector<double> probs(codebook.points.size(), 0.0);
    for (std::int64_t c = 0; c < n_chunks; ++c) {
        sum += chunk_sum[static_cast<std::size_t>(c)];
        sumsq += chunk_sumsq[static_cast<std::size_t>(c)];
        for (std::size_t k = 0; k < probs.size(); ++k)
            probs[k] += static_cast<double>(chunk_counts[static_cast<std::size_t>(c)][k]);
    }
    const double nn = static_cast<double>(eval_budget);
    DistortionEstimate est;
    est.estimate = sum / nn;
    est.std_error = std::sqrt(std::max(0.0, sumsq / nn - est.estimate * est.estimate) / nn);
    for (double& p : probs) p /= nn;
    est.cell_probabilities = std::move(probs);
    return est;
}

namespace serial_ref {

DistortionEstimate distortion(const Codebook& codebook, const std::vector<double>& variances,
                              std::int64_t eval_budget, std::uint64_t seed) {
    if (codebook.dim != static_cast<int>(variances.size()))
        throw std::invalid_argument("distortion: dimension mismatch");
    const int m = codebook.dim;
    std::vector<double> sd(variances.size());
    for (std::size_t j = 0; j < variances.size(); ++j) sd[j] = std::sqrt(variances[j]);
    const std::int64_t chunk = 1 << 14;
    const std::int64_t n_chunks = (eval_budget + chunk - 1) / chunk;
    double sum = 0.0, sumsq = 0.0;
    std::vector<double> probs(codebook.points.size(), 0.0);
    std::vector<double> x(static_cast<std::size_t>(m));
    for (std::int64_t c = 0; c < n_chunks; ++c) {
        NormalStream g(seed, (1ULL << 42) + static_cast<std::uint64_t>(c));
        double csum = 0.0, csumsq = 0.0;
        const std::int64_t lo = c * chunk, hi = std::min(eval_budget, lo + chunk);
        for (std::int64_t s = lo; s < hi; ++s) {
            for (int j = 0; j < m; ++j) x[static_cast<std::size_t>(j)] = sd[static_cast<std::size_t>(j)] * g.normal();
            const int k = nearest(codebook.points, x.data(), m);
            double d = 0.0;
            for (int j = 0; j < m; ++j) {
                const double diff = x[static_cast<std::size_t>(j)] -
                                    codebook.points[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
                d += diff * diff;
            }
            csum += d;
            csumsq += d * d;
            probs[static_cast<std::size_t>(k)] += 1.0;
        }
        sum += csum;
        sumsq += csumsq;
    }
    const double nn = static_cast<double>(eval_budget);
    DistortionEstimate est;
    est.estimate = sum / nn;
    est.std_error = std::sqrt(std::max(0.0, sumsq / nn - est.estimate * est.estimate) / nn);
    for (double& p : probs) p /= nn;
    est.cell_probabilities = std::move(probs);
    return est;
}

}  // namespace serial_ref

std::pair<int, std::vector<DistortionReport>> select_dimension(const OuParams& p, int N,
                                                               int m_max,
                                                               const QuantOptions& opt) {
    if (m_max < 1) throw std::invalid_argument("select_dimension: m_max must be >= 1");
    const KlBasis basis = kl_basis(p, m_max);
    const double trace = total_bridge_variance(p);

    std::vector<DistortionReport> reports;
    reports.reserve(static_cast<std::size_t>(m_max));
    double tail = trace;
    std::vector<double> variances;
    for (int m = 1; m <= m_max; ++m) {
        variances.push_back(basis.modes[static_cast<std::size_t>(m - 1)].lambda);
        tail -= variances.back();
        const Codebook cb = lloyd(variances, N, opt);
        DistortionReport r;
        r.m = m;
        r.tail = std::max(tail, 0.0);
        if (N == 1) {
            r.finite_dim_error_sq = std::accumulate(variances.begin(), variances.end(), 0.0);
        } else if (m == 1) {
            r.finite_dim_error_sq = distortion_1d(flatten_1d(cb), variances[0]);
        } else {
            r.finite_dim_error_sq = distortion(cb, variances, opt.eval_budget, opt.seed).estimate;
        }
        r.total_sq = r.tail + r.finite_dim_error_sq;
        reports.push_back(r);
    }
    int best = 1;
    for (int m = 2; m <= m_max; ++m)
        if (reports[static_cast<std::size_t>(m - 1)].total_sq <
            reports[static_cast<std::size_t>(best - 1)].total_sq)
            best = m;
    return {best, reports};
}

FunctionalQuantizer functional_quantizer(const BridgeSpec& spec, int N, int m_max,
                                         const QuantOptions& opt) {
    spec.validate();
    auto [d, reports] = select_dimension(spec.params, N, m_max, opt);
    FunctionalQuantizer fq;
    fq.spec = spec;
    fq.basis = kl_basis(spec.params, d);
    std::vector<double> variances;
    for (const KlMode& mode : fq.basis.modes) variances.push_back(mode.lambda);
    fq.codebook = lloyd(variances, N, opt);
    fq.report = reports[static_cast<std::size_t>(d - 1)];
    return fq;
}

std::vector<std::vector<double>> quantizer_paths(const FunctionalQuantizer& fq,
                                                 const TimeGrid& grid) {
    grid.validate(fq.spec.params.T);
    std::vector<std::vector<double>> paths;
    paths.reserve(fq.codebook.points.size());
    std::vector<double> mean(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) mean[i] = bridge_mean(fq.spec, grid.points[i]);
    for (const auto& point : fq.codebook.points) {
        std::vector<double> path = mean;
        for (std::size_t j = 0; j < point.size(); ++j) {
            const KlMode& mode = fq.basis.modes[j];
            for (std::size_t i = 0; i < grid.size(); ++i)
                path[i] += point[j] * eigenfunction_eval(mode, fq.spec.params, grid.points[i]);
        }
        path.back() = fq.spec.z;  // eigenfunctions vanish at T
        paths.push_back(std::move(path));
    }
    return paths;
}

RateResult rate_check(const BridgeSpec& spec, const std::vector<int>& N_values, int m_max,
                      const QuantOptions& opt) {
    if (N_values.size() < 4)
        throw std::invalid_argument("rate_check: need at least 4 values of N");
    for (std::size_t i = 1; i < N_values.size(); ++i)
        if (N_values[i] <= N_values[i - 1])
            throw std::invalid_argument("rate_check: N values must be increasing");

    RateResult res;
    for (int N : N_values) {
        const FunctionalQuantizer fq = functional_quantizer(spec, N, m_max, opt);
        RatePoint pt;
        pt.N = N;
        pt.error = std::sqrt(fq.report.total_sq);
        // Delta method on the finite-dimensional MC component.
        const DistortionEstimate est =
            distortion(fq.codebook, [&] {
                std::vector<double> v;
                for (const KlMode& mode : fq.basis.modes) v.push_back(mode.lambda);
                return v;
            }(), opt.eval_budget, opt.seed);
        pt.std_error = est.std_error / (2.0 * pt.error);
        res.points.push_back(pt);
    }

    // Least squares of log E_N on log log N.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(res.points.size());
    for (const RatePoint& pt : res.points) {
        const double x = std::log(std::log(static_cast<double>(pt.N)));
        const double y = std::log(pt.error);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    res.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const RatePoint& last = res.points.back();
    res.K_estimate = last.error * std::sqrt(std::log(static_cast<double>(last.N)));
    return res;
}

}  // namespace oubridge
