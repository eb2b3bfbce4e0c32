#include "oubridge/oracle.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace oubridge::oracle {

namespace {

void fill_conditioned_row(const OuParams& p, const TimeGrid& grid, double var_T,
                          const std::vector<double>& cov_T, std::size_t i,
                          std::vector<double>& row) {
    const double ti = grid.points[i];
    for (std::size_t j = 0; j <= i; ++j)
        row[j] = process_cov(p, ti, grid.points[j]) - cov_T[i] * cov_T[j] / var_T;
}

DenseKernel conditioned_kernel_impl(const OuParams& p, const TimeGrid& grid, bool parallel) {
    p.validate();
    grid.validate(p.T);
    const std::size_t n = grid.points.size();
    if (n > 4000) throw std::invalid_argument("conditioned_kernel: grid count must be <= 4000");

    std::vector<double> cov_T(n);
    for (std::size_t i = 0; i < n; ++i) cov_T[i] = process_cov(p, grid.points[i], p.T);
    const double var_T = process_cov(p, p.T, p.T);

    DenseKernel k;
    k.grid = grid;
    k.matrix.assign(n, std::vector<double>(n, 0.0));
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::size_t i = 0; i < n; ++i)
            fill_conditioned_row(p, grid, var_T, cov_T, i, k.matrix[i]);
    } else {
        for (std::size_t i = 0; i < n; ++i)
            fill_conditioned_row(p, grid, var_T, cov_T, i, k.matrix[i]);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) k.matrix[i][j] = k.matrix[j][i];
    return k;
}

}  // namespace

DenseKernel conditioned_kernel(const OuParams& p, const TimeGrid& grid) {
    return conditioned_kernel_impl(p, grid, true);
}

namespace serial_ref {
DenseKernel conditioned_kernel(const OuParams& p, const TimeGrid& grid) {
    return conditioned_kernel_impl(p, grid, false);
}
}  // namespace serial_ref

std::vector<NystromPair> nystrom_eigen(const DenseKernel& kernel, int m) {
    const std::size_t n = kernel.size();
    if (m < 1 || static_cast<std::size_t>(m) > n)
        throw std::invalid_argument("nystrom_eigen: need 1 <= m <= grid count");

    // Trapezoid weights on the (possibly non-uniform) grid.
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = kernel.grid.points[i + 1] - kernel.grid.points[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }

    Eigen::MatrixXd sym(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double si = std::sqrt(w[i]);
        for (std::size_t j = 0; j < n; ++j)
            sym(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                si * kernel.matrix[i][j] * std::sqrt(w[j]);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("nystrom_eigen: eigensolver failed");

    std::vector<NystromPair> out;
    out.reserve(static_cast<std::size_t>(m));
    for (int r = 0; r < m; ++r) {
        const Eigen::Index col = static_cast<Eigen::Index>(n) - 1 - r;  // descending
        NystromPair pair;
        pair.lambda = es.eigenvalues()(col);
        pair.eigenfunction.resize(n);
        // Undo the symmetrization: f_i = v_i / sqrt(w_i); already unit in the
        // weighted norm since v is unit in l2.
        for (std::size_t i = 0; i < n; ++i) {
            const double si = std::sqrt(w[i]);
            pair.eigenfunction[i] =
                si > 0.0 ? es.eigenvectors()(static_cast<Eigen::Index>(i), col) / si : 0.0;
        }
        out.push_back(std::move(pair));
    }
    return out;
}

DenseKernel empirical_cov(const std::vector<std::vector<double>>& paths, const TimeGrid& grid) {
    if (paths.size() < 2) throw std::invalid_argument("empirical_cov: need at least 2 paths");
    const std::size_t n = grid.points.size();
    for (const auto& path : paths)
        if (path.size() != n)
            throw std::invalid_argument("empirical_cov: path length does not match grid");
    const double np = static_cast<double>(paths.size());

    DenseKernel k;
    k.grid = grid;
    k.means.assign(n, 0.0);
    for (const auto& path : paths)
        for (std::size_t i = 0; i < n; ++i) k.means[i] += path[i];
    for (std::size_t i = 0; i < n; ++i) k.means[i] /= np;

    k.matrix.assign(n, std::vector<double>(n, 0.0));
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double acc = 0.0;
            for (const auto& path : paths)
                acc += (path[i] - k.means[i]) * (path[j] - k.means[j]);
            k.matrix[i][j] = acc / (np - 1.0);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) k.matrix[i][j] = k.matrix[j][i];
    return k;
}

}  // namespace oubridge::oracle
