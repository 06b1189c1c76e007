#include <doctest.h>

#include "neemo/checks.hpp"
#include "neemo/error.hpp"
#include "neemo/ot.hpp"

using namespace neemo;

TEST_CASE("brute force on hand instances") {
    ot::DiscreteMeasure P(Eigen::Vector2d(0.5, 0.5), Eigen::RowVector2d(0.0, 2.0));
    ot::DiscreteMeasure Q(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Ones(1, 1));
    CHECK(checks::brute_force_emd(P, Q) == doctest::Approx(1.0));
    CHECK(checks::brute_force_emd(P, P) == doctest::Approx(0.0).scale(1.0));
    const auto big = checks::random_measure(5, 2, 1);
    CHECK_THROWS_AS(checks::brute_force_emd(big, big), InputError);
}

TEST_CASE("every suite passes") {
    for (const auto& name : checks::suite_names()) {
        const auto r = checks::run_suite(name, 3);
        INFO(name << ": " << r.detail << " metric " << r.metric);
        CHECK(r.passed);
    }
    CHECK_THROWS_AS(checks::run_suite("nope"), ConfigError);
}
