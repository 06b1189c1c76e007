#include <doctest.h>

#include "neemo/checks.hpp"
#include "neemo/error.hpp"
#include "neemo/experiments.hpp"

using namespace neemo;

TEST_CASE("circle_recovery uses the best matching") {
    const std::vector<std::array<double, 3>> truth{{0.2, 0.2, 0.1}, {0.7, 0.7, 0.2}};
    const std::vector<double> theta{0.71, 0.7, std::log(0.2), 0.2, 0.23, std::log(0.12)};
    const auto [c, r] = exp::circle_recovery(theta, truth);
    CHECK(c == doctest::Approx(0.03));
    CHECK(r == doctest::Approx(0.02));
    CHECK_THROWS_AS(exp::circle_recovery({0.1}, truth), InputError);
}

TEST_CASE("particle seeding puts centers on particles") {
    const auto ev = events::gen_subjet_event({4, {}, 0.05, 10}, 6);
    const auto spec = exp::subjet_init(ev, 4, exp::CenterInit::Particles, false, {}, 2);
    CHECK(spec.theta.size() == 8);
    for (int c = 0; c < 4; ++c) {
        double nearest = 1e9;
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            nearest = std::min(nearest, std::hypot(ev.positions(0, i) - spec.theta[2 * c], ev.positions(1, i) - spec.theta[2 * c + 1]));
        CHECK(nearest == 0.0);
    }
    const auto learned = exp::subjet_init(ev, 3, exp::CenterInit::Box, true, {}, 2);
    CHECK(learned.theta.size() == 9);
}

TEST_CASE("single tight subjet collapses to zero") {
    exp::SubjetStudy study;
    study.true_n = {1};
    study.fit_n = {1};
    study.trials = 2;
    study.gen.sigma = 1e-9;
    study.fit.arch.hidden = {16, 16};
    study.fit.outer_steps = 100;
    study.fit.inner_steps_per_outer = 30;
    study.fit.outer_lr_final_fraction = 0.01;
    study.fit.warmup_inner_steps = 200;
    study.fit.refit_inner_steps = 200;
    study.threads = 1;
    const auto cells = exp::run_subjet_study(study);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].values.size() == 2);
    CHECK(cells[0].failed == 0);
    // W1 to a point mass is a cone, so the center settles within about one outer step
    CHECK(cells[0].mean <= study.fit.outer_lr);
    CHECK(cells[0].mean >= -1e-6);
}

TEST_CASE("subjet study validates its lists") {
    exp::SubjetStudy study;
    study.fit_n = {};
    CHECK_THROWS_AS(exp::run_subjet_study(study), ConfigError);
}
