#pragma once

#include <vector>

#include "oubridge/bridge_sim.hpp"
#include "oubridge/ou_model.hpp"

namespace oubridge::oracle {

// Dense covariance matrix on a grid. Deliberately built from process_cov plus
// a rank-one conditioning update, never from ou_model::bridge_cov, so
// agreement between the two is an independent check.
struct DenseKernel {
    TimeGrid grid;
    std::vector<std::vector<double>> matrix;  // symmetric, grid x grid
    std::vector<double> means;                // filled by empirical_cov only

    std::size_t size() const { return grid.points.size(); }
};

struct NystromPair {
    double lambda = 0.0;
    std::vector<double> eigenfunction;  // values on the grid, weighted-norm 1
};

// Unconditioned kernel conditioned on X_T by the Schur-complement rank-one
// update C - c_T c_T^T / Var(X_T).
DenseKernel conditioned_kernel(const OuParams& p, const TimeGrid& grid);

// Discretized covariance-operator eigenproblem with trapezoid weights,
// symmetrized as W^{1/2} C W^{1/2}; returns the m largest pairs, eigenvalues
// decreasing. Parallel matrix build; serial_ref below is the reference.
std::vector<NystromPair> nystrom_eigen(const DenseKernel& kernel, int m);

// Unbiased sample covariance of path values across paths sharing a grid.
DenseKernel empirical_cov(const std::vector<std::vector<double>>& paths, const TimeGrid& grid);

namespace serial_ref {
DenseKernel conditioned_kernel(const OuParams& p, const TimeGrid& grid);
}

}  // namespace oubridge::oracle
