#pragma once

// Discrete optimal transport with the Euclidean ground cost: an exact
// transportation-simplex solver, the one-dimensional CDF formula and an
// entropic (Sinkhorn) baseline. Both measures are normalized to unit mass
// before solving.

#include <Eigen/Dense>

#include <cstddef>

namespace neemo::ot {

/// Weighted point cloud. Points are stored column-wise (d x n).
struct DiscreteMeasure {
    Eigen::VectorXd weights;
    Eigen::MatrixXd points;

    DiscreteMeasure() = default;
    DiscreteMeasure(Eigen::VectorXd w, Eigen::MatrixXd x) : weights(std::move(w)), points(std::move(x)) {}

    Eigen::Index size() const noexcept { return weights.size(); }
    Eigen::Index dim() const noexcept { return points.rows(); }
    double total() const { return weights.sum(); }

    /// Throws InputError unless sizes agree, weights are finite and >= 0, and the total is positive.
    void validate() const;
    /// Copy with weights divided by their total.
    DiscreteMeasure normalized() const;
    /// Copy without zero-weight points.
    DiscreteMeasure without_zeros() const;
};

struct TransportPlan {
    Eigen::MatrixXd gamma;  // n x m, rows follow the source measure
    double cost = 0.0;
    Eigen::VectorXd u;  // row potentials (zero for dropped points)
    Eigen::VectorXd v;  // column potentials
    std::size_t pivots = 0;
};

/// C(i, j) = ||x_i - y_j||_2.
Eigen::MatrixXd cost_matrix(const DiscreteMeasure& P, const DiscreteMeasure& Q);

/// Optimal plan for the normalized measures.
TransportPlan exact_emd(const DiscreteMeasure& P, const DiscreteMeasure& Q);

/// Transportation simplex on explicit marginals (each summing to 1) and costs.
TransportPlan transportation_simplex(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& C);

/// Integral of |F_P - F_Q| for one-dimensional measures.
double emd_1d(const DiscreteMeasure& P, const DiscreteMeasure& Q);

struct SinkhornOptions {
    double epsilon = 0.01;
    std::size_t max_iters = 100000;
    double tol = 1e-9;     // L1 violation of the column marginal
    bool log_domain = true;
    bool eps_scaling = true;  // anneal epsilon from the cost scale down to `epsilon`
};

struct SinkhornResult {
    double value = 0.0;  // transport term sum_ij P_ij C_ij, entropy excluded
    std::size_t iterations = 0;
    double marginal_error = 0.0;
};

SinkhornResult sinkhorn_emd(const DiscreteMeasure& P, const DiscreteMeasure& Q, const SinkhornOptions& options);

/// Max absolute deviation of plan marginals from the normalized inputs.
double marginal_violation(const TransportPlan& plan, const DiscreteMeasure& P, const DiscreteMeasure& Q);

}  // namespace neemo::ot
