#include <doctest.h>

#include <random>

#include "neemo/checks.hpp"
#include "neemo/error.hpp"
#include "neemo/ot.hpp"

using namespace neemo;
using namespace neemo::ot;
using checks::random_measure;

namespace {

DiscreteMeasure dirac(std::initializer_list<double> x) {
    Eigen::VectorXd p(static_cast<Eigen::Index>(x.size()));
    Eigen::Index i = 0;
    for (double v : x) p[i++] = v;
    return {Eigen::VectorXd::Ones(1), p};
}

}  // namespace

TEST_CASE("cost_matrix examples") {
    CHECK(cost_matrix(dirac({1, 2}), dirac({1, 2}))(0, 0) == 0.0);
    CHECK(cost_matrix(dirac({0, 0}), dirac({3, 4}))(0, 0) == 5.0);
    DiscreteMeasure line(Eigen::Vector2d(0.5, 0.5), Eigen::RowVector2d(0.0, 1.0));
    const auto C = cost_matrix(line, line);
    CHECK(C == Eigen::Matrix2d{{0, 1}, {1, 0}});
    CHECK_THROWS_AS(cost_matrix(dirac({0}), dirac({0, 0})), InputError);
}

TEST_CASE("exact_emd examples") {
    const auto P = random_measure(7, 2, 1);
    CHECK(exact_emd(P, P).cost == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(exact_emd(dirac({0, 0}), dirac({0.3, 0.4})).cost == doctest::Approx(0.5).epsilon(1e-15));

    DiscreteMeasure halves(Eigen::Vector2d(0.5, 0.5), Eigen::RowVector2d(0.0, 2.0));
    DiscreteMeasure one(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Ones(1, 1));
    CHECK(exact_emd(halves, one).cost == doctest::Approx(1.0).epsilon(1e-15));

    DiscreteMeasure empty(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Zero(2, 2));
    CHECK_THROWS_AS(exact_emd(empty, P), InputError);
}

TEST_CASE("exact_emd equals brute force on small instances") {
    std::mt19937_64 rng(101);
    for (int k = 0; k < 60; ++k) {
        const int n = 1 + static_cast<int>(rng() % 4), m = 1 + static_cast<int>(rng() % 4);
        const auto P = random_measure(n, 2, rng()), Q = random_measure(m, 2, rng());
        CHECK(exact_emd(P, Q).cost == doctest::Approx(checks::brute_force_emd(P, Q)).epsilon(1e-8));
    }
}

TEST_CASE("exact_emd equals the CDF formula in 1D") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 30; ++k) {
        const auto P = random_measure(8, 1, rng()), Q = random_measure(8, 1, rng());
        CHECK(std::abs(exact_emd(P, Q).cost - emd_1d(P, Q)) <= 1e-8);
    }
}

TEST_CASE("emd_1d examples") {
    const auto P = random_measure(5, 1, 3);
    CHECK(emd_1d(P, P) == 0.0);
    CHECK(emd_1d(dirac({0}), dirac({3})) == 3.0);
    CHECK_THROWS_AS(emd_1d(dirac({0, 0}), dirac({1, 1})), InputError);
}

TEST_CASE("plans satisfy marginals, cost and complementary slackness") {
    std::mt19937_64 rng(13);
    for (int k = 0; k < 20; ++k) {
        const int n = 2 + static_cast<int>(rng() % 40), m = 2 + static_cast<int>(rng() % 40);
        const auto P = random_measure(n, 2, rng()), Q = random_measure(m, 2, rng());
        const auto plan = exact_emd(P, Q);
        const auto C = cost_matrix(P, Q);
        CHECK(plan.gamma.minCoeff() >= 0.0);
        CHECK(marginal_violation(plan, P, Q) <= 1e-8 * std::max(P.weights.minCoeff(), 1e-3));
        CHECK(plan.cost == doctest::Approx(plan.gamma.cwiseProduct(C).sum()).epsilon(1e-10));
        // dual feasibility and equal objective certify optimality
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < m; ++j) CHECK(plan.u[i] + plan.v[j] <= C(i, j) + 1e-9);
        CHECK(P.weights.dot(plan.u) + Q.weights.dot(plan.v) == doctest::Approx(plan.cost).epsilon(1e-9));
    }
}

TEST_CASE("zero weights are dropped") {
    DiscreteMeasure P(Eigen::Vector3d(0.5, 0.0, 0.5), Eigen::MatrixXd{{0.0, 5.0, 1.0}});
    DiscreteMeasure Q(Eigen::VectorXd::Ones(1), Eigen::MatrixXd{{0.5}});
    const auto plan = exact_emd(P, Q);
    CHECK(plan.cost == doctest::Approx(0.5));
    CHECK(plan.gamma.rows() == 3);
    CHECK(plan.gamma(1, 0) == 0.0);
}

TEST_CASE("metric axioms") {
    std::mt19937_64 rng(17);
    for (int k = 0; k < 100; ++k) {
        const auto X = random_measure(6, 2, rng()), Y = random_measure(7, 2, rng()), Z = random_measure(5, 2, rng());
        const double xy = exact_emd(X, Y).cost;
        CHECK(std::abs(xy - exact_emd(Y, X).cost) <= 1e-8);
        CHECK(xy <= exact_emd(X, Z).cost + exact_emd(Z, Y).cost + 1e-8);
    }
}

TEST_CASE("sinkhorn examples") {
    SinkhornOptions opt;
    opt.epsilon = 0.01;
    const auto P = random_measure(10, 2, 4);
    CHECK(sinkhorn_emd(P, P, opt).value <= 0.05);
    CHECK(sinkhorn_emd(dirac({0, 0}), dirac({0.6, 0.8}), opt).value == doctest::Approx(1.0).epsilon(1e-12));

    std::mt19937_64 rng(19);
    for (int k = 0; k < 5; ++k) {
        const auto A = random_measure(20, 2, rng()), B = random_measure(25, 2, rng());
        const double exact = exact_emd(A, B).cost;
        double prev = std::numeric_limits<double>::infinity();
        for (double eps : {0.1, 0.01, 0.001}) {
            opt.epsilon = eps;
            const auto r = sinkhorn_emd(A, B, opt);
            CHECK(r.value <= prev + 1e-4);
            CHECK(r.value >= exact - 1e-6);
            prev = r.value;
        }
        CHECK(std::abs(prev - exact) <= 0.01 * exact);
    }
}
