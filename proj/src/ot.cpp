#include "neemo/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "neemo/error.hpp"

namespace neemo::ot {

void DiscreteMeasure::validate() const {
    if (weights.size() < 1) throw InputError("measure: at least one point is required");
    if (points.cols() != weights.size())
        throw InputError("measure: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(points.cols()) + " points");
    if (points.rows() < 1) throw InputError("measure: points have dimension 0");
    if (!points.allFinite()) throw InputError("measure: non-finite point coordinate");
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (!std::isfinite(weights(i)) || weights(i) < 0.0)
            throw InputError("measure: weight " + std::to_string(i) + " is negative or non-finite");
    }
    if (!(weights.sum() > 0.0)) throw InputError("measure: total weight must be positive");
}

DiscreteMeasure DiscreteMeasure::normalized() const {
    validate();
    return {weights / weights.sum(), points};
}

DiscreteMeasure DiscreteMeasure::without_zeros() const {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < weights.size(); ++i)
        if (weights(i) > 0.0) keep.push_back(i);
    DiscreteMeasure out;
    out.weights.resize(static_cast<Eigen::Index>(keep.size()));
    out.points.resize(points.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.weights(static_cast<Eigen::Index>(k)) = weights(keep[k]);
        out.points.col(static_cast<Eigen::Index>(k)) = points.col(keep[k]);
    }
    return out;
}

Eigen::MatrixXd cost_matrix(const DiscreteMeasure& P, const DiscreteMeasure& Q) {
    if (P.dim() != Q.dim())
        throw InputError("cost_matrix: dimension mismatch (" + std::to_string(P.dim()) + " vs " +
                         std::to_string(Q.dim()) + ")");
    Eigen::MatrixXd C(P.points.cols(), Q.points.cols());
    for (Eigen::Index i = 0; i < C.rows(); ++i)
        for (Eigen::Index j = 0; j < C.cols(); ++j) C(i, j) = (P.points.col(i) - Q.points.col(j)).norm();
    return C;
}

namespace {

struct BasicCell {
    Eigen::Index i;
    Eigen::Index j;
    double flow;
};

class TransportationSimplex {
public:
    TransportationSimplex(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& C)
        : a_(a), b_(b), C_(C), n_(a.size()), m_(b.size()) {
        const double scale = C_.size() > 0 ? C_.cwiseAbs().maxCoeff() : 0.0;
        tol_ = 1e-12 * (1.0 + scale);
        adj_.resize(static_cast<std::size_t>(n_ + m_));
        north_west_corner();
    }

    TransportPlan solve() {
        const std::size_t max_pivots = 50 * static_cast<std::size_t>((n_ + m_) * (n_ + m_)) + 1000;
        std::size_t degenerate_run = 0;
        std::size_t pivots = 0;
        for (;;) {
            compute_tree();
            const bool bland = degenerate_run > static_cast<std::size_t>(2 * (n_ + m_));
            Eigen::Index ei = -1, ej = -1;
            if (!find_entering(bland, ei, ej)) break;
            if (++pivots > max_pivots) throw NumericalError("transportation simplex: pivot limit exceeded");
            const double theta = pivot(ei, ej);
            degenerate_run = theta > 0.0 ? 0 : degenerate_run + 1;
        }
        TransportPlan plan;
        plan.gamma = Eigen::MatrixXd::Zero(n_, m_);
        for (const auto& c : cells_) plan.gamma(c.i, c.j) += c.flow;
        plan.cost = (plan.gamma.array() * C_.array()).sum();
        plan.u = u_;
        plan.v = v_;
        plan.pivots = pivots;
        return plan;
    }

private:
    std::size_t col_node(Eigen::Index j) const { return static_cast<std::size_t>(n_ + j); }

    void add_cell(Eigen::Index i, Eigen::Index j, double flow) {
        const auto id = cells_.size();
        cells_.push_back({i, j, flow});
        adj_[static_cast<std::size_t>(i)].push_back(id);
        adj_[col_node(j)].push_back(id);
    }

    // Produces exactly n + m - 1 basic cells forming a spanning tree.
    void north_west_corner() {
        Eigen::VectorXd ra = a_, rb = b_;
        Eigen::Index i = 0, j = 0;
        for (;;) {
            const double x = std::min(ra(i), rb(j));
            add_cell(i, j, x);
            ra(i) -= x;
            rb(j) -= x;
            if (i == n_ - 1 && j == m_ - 1) break;
            if ((ra(i) <= rb(j) && i < n_ - 1) || j == m_ - 1) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    // Root the basis tree at row 0 and solve u_i + v_j = c_ij on basic cells.
    void compute_tree() {
        const auto N = static_cast<std::size_t>(n_ + m_);
        parent_cell_.assign(N, npos);
        parent_.assign(N, npos);
        depth_.assign(N, 0);
        pot_.assign(N, 0.0);
        std::vector<char> seen(N, 0);
        std::vector<std::size_t> queue{0};
        seen[0] = 1;
        for (std::size_t q = 0; q < queue.size(); ++q) {
            const auto node = queue[q];
            for (auto cid : adj_[node]) {
                const auto& c = cells_[cid];
                const auto row = static_cast<std::size_t>(c.i);
                const auto col = col_node(c.j);
                const auto other = node == row ? col : row;
                if (seen[other]) continue;
                seen[other] = 1;
                parent_[other] = node;
                parent_cell_[other] = cid;
                depth_[other] = depth_[node] + 1;
                pot_[other] = C_(c.i, c.j) - pot_[node];
                queue.push_back(other);
            }
        }
        if (queue.size() != N) throw NumericalError("transportation simplex: basis is not a spanning tree");
        u_ = Eigen::Map<const Eigen::VectorXd>(pot_.data(), n_);
        v_ = Eigen::Map<const Eigen::VectorXd>(pot_.data() + n_, m_);
    }

    bool find_entering(bool bland, Eigen::Index& ei, Eigen::Index& ej) const {
        if (bland) {
            for (Eigen::Index i = 0; i < n_; ++i)
                for (Eigen::Index j = 0; j < m_; ++j)
                    if (C_(i, j) - u_(i) - v_(j) < -tol_) {
                        ei = i;
                        ej = j;
                        return true;
                    }
            return false;
        }
        Eigen::MatrixXd R = C_;
        R.colwise() -= u_;
        R.rowwise() -= v_.transpose();
        const double best = R.minCoeff(&ei, &ej);
        return best < -tol_;
    }

    // Pushes flow around the cycle closed by (ei, ej); returns the step size.
    double pivot(Eigen::Index ei, Eigen::Index ej) {
        // Path from column node ej up to the LCA, then down to row node ei.
        std::vector<std::size_t> from_col, from_row;
        auto x = col_node(ej);
        auto y = static_cast<std::size_t>(ei);
        while (depth_[x] > depth_[y]) {
            from_col.push_back(parent_cell_[x]);
            x = parent_[x];
        }
        while (depth_[y] > depth_[x]) {
            from_row.push_back(parent_cell_[y]);
            y = parent_[y];
        }
        while (x != y) {
            from_col.push_back(parent_cell_[x]);
            x = parent_[x];
            from_row.push_back(parent_cell_[y]);
            y = parent_[y];
        }
        std::vector<std::size_t> path = std::move(from_col);
        path.insert(path.end(), from_row.rbegin(), from_row.rend());

        // Edges at even positions lose flow, odd positions gain.
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leaving = npos;
        for (std::size_t k = 0; k < path.size(); k += 2) {
            const auto& c = cells_[path[k]];
            const double f = c.flow;
            if (leaving == npos || f < theta || (f == theta && cell_key(c) < cell_key(cells_[leaving]))) {
                theta = f;
                leaving = path[k];
            }
        }
        for (std::size_t k = 0; k < path.size(); ++k) {
            auto& c = cells_[path[k]];
            c.flow = k % 2 == 0 ? std::max(0.0, c.flow - theta) : c.flow + theta;
        }
        // Reuse the leaving slot for the entering cell.
        auto& old = cells_[leaving];
        remove_adj(static_cast<std::size_t>(old.i), leaving);
        remove_adj(col_node(old.j), leaving);
        old = {ei, ej, theta};
        adj_[static_cast<std::size_t>(ei)].push_back(leaving);
        adj_[col_node(ej)].push_back(leaving);
        return theta;
    }

    Eigen::Index cell_key(const BasicCell& c) const { return c.i * m_ + c.j; }

    void remove_adj(std::size_t node, std::size_t cid) {
        auto& list = adj_[node];
        list.erase(std::find(list.begin(), list.end(), cid));
    }

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    const Eigen::VectorXd& a_;
    const Eigen::VectorXd& b_;
    const Eigen::MatrixXd& C_;
    Eigen::Index n_, m_;
    double tol_;
    std::vector<BasicCell> cells_;
    std::vector<std::vector<std::size_t>> adj_;
    std::vector<std::size_t> parent_, parent_cell_, depth_;
    std::vector<double> pot_;
    Eigen::VectorXd u_, v_;
};

double logsumexp(const Eigen::Ref<const Eigen::VectorXd>& x) {
    const double m = x.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((x.array() - m).exp().sum());
}

}  // namespace

TransportPlan transportation_simplex(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& C) {
    if (a.size() < 1 || b.size() < 1) throw InputError("transportation simplex: empty marginal");
    if (C.rows() != a.size() || C.cols() != b.size()) throw InputError("transportation simplex: cost shape mismatch");
    return TransportationSimplex(a, b, C).solve();
}

TransportPlan exact_emd(const DiscreteMeasure& P, const DiscreteMeasure& Q) {
    const auto Pn = P.normalized();
    const auto Qn = Q.normalized();
    if (Pn.dim() != Qn.dim()) throw InputError("exact_emd: dimension mismatch");

    std::vector<Eigen::Index> rows, cols;
    for (Eigen::Index i = 0; i < Pn.size(); ++i)
        if (Pn.weights(i) > 0.0) rows.push_back(i);
    for (Eigen::Index j = 0; j < Qn.size(); ++j)
        if (Qn.weights(j) > 0.0) cols.push_back(j);

    const auto Ps = Pn.without_zeros();
    const auto Qs = Qn.without_zeros();
    // Renormalize so both marginals sum to exactly the same total.
    const auto sub = transportation_simplex(Ps.weights / Ps.weights.sum(), Qs.weights / Qs.weights.sum(),
                                            cost_matrix(Ps, Qs));

    TransportPlan plan;
    plan.gamma = Eigen::MatrixXd::Zero(Pn.size(), Qn.size());
    plan.u = Eigen::VectorXd::Zero(Pn.size());
    plan.v = Eigen::VectorXd::Zero(Qn.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        plan.u(rows[r]) = sub.u(static_cast<Eigen::Index>(r));
        for (std::size_t c = 0; c < cols.size(); ++c)
            plan.gamma(rows[r], cols[c]) = sub.gamma(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    for (std::size_t c = 0; c < cols.size(); ++c) plan.v(cols[c]) = sub.v(static_cast<Eigen::Index>(c));
    plan.cost = sub.cost;
    plan.pivots = sub.pivots;
    return plan;
}

double emd_1d(const DiscreteMeasure& P, const DiscreteMeasure& Q) {
    if (P.dim() != 1 || Q.dim() != 1) throw InputError("emd_1d: measures must be one-dimensional");
    const auto Pn = P.normalized();
    const auto Qn = Q.normalized();
    struct Atom {
        double x;
        double w;  // signed: +P, -Q
    };
    std::vector<Atom> atoms;
    for (Eigen::Index i = 0; i < Pn.size(); ++i) atoms.push_back({Pn.points(0, i), Pn.weights(i)});
    for (Eigen::Index j = 0; j < Qn.size(); ++j) atoms.push_back({Qn.points(0, j), -Qn.weights(j)});
    std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.x < r.x; });
    double cdf_gap = 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < atoms.size(); ++k) {
        cdf_gap += atoms[k].w;
        total += std::abs(cdf_gap) * (atoms[k + 1].x - atoms[k].x);
    }
    return total;
}

SinkhornResult sinkhorn_emd(const DiscreteMeasure& P, const DiscreteMeasure& Q, const SinkhornOptions& opt) {
    if (!(opt.epsilon > 0.0)) throw InputError("sinkhorn: epsilon must be positive");
    const auto Pn = P.normalized();
    const auto Qn = Q.normalized();
    const Eigen::MatrixXd C = cost_matrix(Pn, Qn);
    const Eigen::VectorXd& a = Pn.weights;
    const Eigen::VectorXd& b = Qn.weights;
    const Eigen::Index n = a.size(), m = b.size();

    std::vector<double> schedule;
    if (opt.eps_scaling) {
        for (double e = std::max(C.maxCoeff(), opt.epsilon); e > opt.epsilon; e *= 0.5) schedule.push_back(e);
    }
    schedule.push_back(opt.epsilon);

    SinkhornResult result;
    if (opt.log_domain) {
        const Eigen::ArrayXd log_a = a.array().log();
        const Eigen::ArrayXd log_b = b.array().log();
        Eigen::VectorXd f = Eigen::VectorXd::Zero(n), g = Eigen::VectorXd::Zero(m);
        Eigen::MatrixXd plan;
        for (std::size_t s = 0; s < schedule.size(); ++s) {
            const double eps = schedule[s];
            const bool last = s + 1 == schedule.size();
            const std::size_t budget = last ? opt.max_iters : std::max<std::size_t>(opt.max_iters / 100, 50);
            for (std::size_t it = 0; it < budget; ++it) {
                ++result.iterations;
                for (Eigen::Index i = 0; i < n; ++i)
                    f(i) = eps * log_a(i) - eps * logsumexp((g.transpose() - C.row(i)).transpose() / eps);
                for (Eigen::Index j = 0; j < m; ++j)
                    g(j) = eps * log_b(j) - eps * logsumexp((f - C.col(j)) / eps);
                // Columns are exact after the g-update; the row marginal carries the error.
                double err = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double row = ((g.transpose() - C.row(i)).array() / eps + f(i) / eps).exp().sum();
                    err += std::abs(row - a(i));
                }
                result.marginal_error = err;
                if (!std::isfinite(err)) throw NumericalError("sinkhorn: non-finite potentials");
                if (err < opt.tol) break;
            }
            if (last) {
                plan = ((C.colwise() - f).rowwise() - g.transpose()).array() / -eps;
                plan = plan.array().exp().matrix();
            }
        }
        result.value = (plan.array() * C.array()).sum();
        return result;
    }

    const double eps = opt.epsilon;
    const Eigen::MatrixXd K = (-C.array() / eps).exp().matrix();
    for (Eigen::Index i = 0; i < n; ++i)
        if (K.row(i).maxCoeff() == 0.0)
            throw NumericalError("sinkhorn: kernel underflow at epsilon " + std::to_string(eps) +
                                 "; use a larger epsilon or the log-domain solver");
    Eigen::VectorXd u = Eigen::VectorXd::Ones(n), v = Eigen::VectorXd::Ones(m);
    for (std::size_t it = 0; it < opt.max_iters; ++it) {
        ++result.iterations;
        u = a.array() / (K * v).array();
        v = b.array() / (K.transpose() * u).array();
        if (!u.allFinite() || !v.allFinite())
            throw NumericalError("sinkhorn: scaling vectors overflowed; use a larger epsilon or the log-domain solver");
        const Eigen::VectorXd rows = u.asDiagonal() * (K * v);
        result.marginal_error = (rows - a).cwiseAbs().sum();
        if (result.marginal_error < opt.tol) break;
    }
    const Eigen::MatrixXd plan = u.asDiagonal() * K * v.asDiagonal();
    result.value = (plan.array() * C.array()).sum();
    return result;
}

double marginal_violation(const TransportPlan& plan, const DiscreteMeasure& P, const DiscreteMeasure& Q) {
    const auto Pn = P.normalized();
    const auto Qn = Q.normalized();
    const double rows = (plan.gamma.rowwise().sum() - Pn.weights).cwiseAbs().maxCoeff();
    const double cols = (plan.gamma.colwise().sum().transpose() - Qn.weights).cwiseAbs().maxCoeff();
    return std::max(rows, cols);
}

}  // namespace neemo::ot
