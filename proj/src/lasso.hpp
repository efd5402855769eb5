#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace pisindy {

struct LassoOptions {
    double lambda = 1e-3;
    /// Convergence threshold on the worst stationarity violation.
    double tol = 1e-8;
    std::size_t max_sweeps = 100000;
    /// Column indices exempt from the l1 penalty (affine terms).
    std::vector<std::size_t> unpenalized;
    /// Rescale every nonzero column to unit root-mean-square before
    /// solving; coefficients are mapped back afterward. The penalty
    /// (and the reported violation/objective) then apply to the
    /// rescaled problem.
    bool standardize = false;
    /// Record the objective after every sweep.
    bool trace_objective = false;
};

struct LassoResult {
    Eigen::VectorXd coef;
    std::size_t sweeps = 0;
    /// Worst stationarity violation at exit, measured with a freshly
    /// recomputed residual.
    double worst_violation = 0.0;
    double objective = 0.0;
    std::vector<double> objective_trace;
};

/// Minimises (1/2n)*||y - Theta*xi||^2 + lambda * sum_p |xi_p| over the
/// penalized columns p by cyclic coordinate descent in column order.
/// Identically zero columns keep a zero coefficient, so duplicated
/// columns resolve deterministically (first visited wins). Throws
/// NonConvergence when the sweep budget runs out before the violation
/// drops below tol.
LassoResult lasso_fit(const Eigen::MatrixXd& theta, const Eigen::VectorXd& y,
                      const LassoOptions& opt);

/// Worst violation of the subgradient optimality conditions of the
/// objective above at the given coefficients; 0 at an exact optimum.
double kkt_violation(const Eigen::MatrixXd& theta, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& coef, double lambda,
                     const std::vector<std::size_t>& unpenalized = {});

} // namespace pisindy
