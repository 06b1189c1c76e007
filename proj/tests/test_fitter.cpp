#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "neemo/checks.hpp"
#include "neemo/fitter.hpp"

using namespace neemo;
using namespace neemo::fit;

namespace {

// Forward pass written out by hand for unit-row networks.
double manual_forward(const lipnet::LipschitzMLP& net, const Eigen::VectorXd& x) {
    Eigen::VectorXd a = x;
    const auto& L = net.layers();
    for (std::size_t l = 0; l < L.size(); ++l) {
        Eigen::MatrixXd W = L[l].W;
        for (Eigen::Index r = 0; r < W.rows(); ++r) {
            const double n = l == 0 ? W.row(r).norm() : W.row(r).cwiseAbs().sum();
            if (n > 0) W.row(r) /= n;
        }
        Eigen::VectorXd z = W * a + L[l].b;
        if (l + 1 < L.size()) {
            const int g = net.architecture().group_size;
            for (Eigen::Index s = 0; s < z.size(); s += g) std::sort(z.data() + s, z.data() + s + g);
        }
        a = z;
    }
    return a[0];
}

lipnet::LipschitzMLP linear_net(const std::vector<double>& slope, double bias = 0.0) {
    lipnet::Architecture arch;
    arch.input_dim = static_cast<int>(slope.size());
    arch.hidden = {};
    arch.projection = lipnet::Projection::Whole;
    lipnet::DenseLayer l{Eigen::Map<const Eigen::RowVectorXd>(slope.data(), static_cast<Eigen::Index>(slope.size())),
                         Eigen::VectorXd::Constant(1, bias), true, lipnet::NormP::Two};
    return lipnet::LipschitzMLP(arch, {l});
}

ot::DiscreteMeasure dirac(std::vector<double> x) {
    return {Eigen::VectorXd::Ones(1), Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()))};
}

FitConfig quick_config() {
    FitConfig c;
    c.arch.hidden = {32, 32};
    c.warmup_inner_steps = 300;
    c.outer_steps = 20;
    c.refit_inner_steps = 200;
    return c;
}

}  // namespace

TEST_CASE("kr_objective examples") {
    lipnet::Architecture arch;
    const auto zero = lipnet::LipschitzMLP::zeros(arch);
    const auto P = checks::random_measure(5, 2, 1), Q = checks::random_measure(7, 2, 2);
    const shapes::WeightedSample q{Q.weights, Q.points}, p{P.weights, P.points};
    CHECK(kr_objective(zero, P, q) == 0.0);

    const auto net = lipnet::LipschitzMLP::random(arch, 4);
    CHECK(kr_objective(net, P, p) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    CHECK(kr_objective(net, P, q) == doctest::Approx(-kr_objective(net, Q, p)).epsilon(1e-14));

    const double d = 1.7;
    const auto neg = linear_net({-1.0});
    const auto target = dirac({d});
    CHECK(kr_objective(neg, dirac({0.0}), {target.weights, target.points}) == doctest::Approx(d));
    CHECK_THROWS_AS(kr_objective(net, dirac({0.0}), {target.weights, target.points}), InputError);
}

TEST_CASE("tape objective matches a hand-rolled forward pass") {
    lipnet::Architecture arch;
    arch.hidden = {8, 8};
    auto net = lipnet::LipschitzMLP::random(arch, 12);
    for (auto& l : net.mutable_layers()) l.b.setConstant(0.05);
    ot::DiscreteMeasure event(Eigen::Vector2d(0.3, 0.7), Eigen::MatrixXd{{0.1, 0.8}, {0.2, 0.5}});
    const auto spec = shapes::ShapeSpec::circle_set({{0.4, 0.4, 0.2}}, 5);

    ad::Tape tape;
    std::vector<ad::Var> params, th;
    for (double w : net.parameter_vector()) params.push_back(tape.variable(w));
    for (double t : spec.theta) th.push_back(tape.variable(t));
    const auto ts = shapes::sample(tape, th, spec);
    const auto obj = kr_objective(tape, net, params, event, ts);

    const auto s = shapes::sample(spec);
    double expect = 0.0;
    for (Eigen::Index i = 0; i < 2; ++i) expect += event.weights[i] * manual_forward(net, event.points.col(i));
    for (Eigen::Index j = 0; j < s.weights.size(); ++j) expect -= s.weights[j] * manual_forward(net, s.points.col(j));
    CHECK(tape.forward(obj) == doctest::Approx(expect).epsilon(1e-13));
    CHECK(kr_objective(net, event, s) == doctest::Approx(expect).epsilon(1e-13));

    // batched gradients agree with the tape
    const auto g = kr_gradient(net, event, s);
    const auto tg = tape.backward(obj);
    const auto flat = lipnet::LipschitzMLP::flatten(g.params);
    for (std::size_t k = 0; k < params.size(); ++k) CHECK(flat[k] == doctest::Approx(tg[params[k]]).epsilon(1e-9));

    // sample-side gradients chained through the sampler give the theta gradient
    ad::Var chained = tape.constant(0.0);
    for (std::size_t j = 0; j < ts.weights.size(); ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        chained += g.sample_points(0, c) * ts.points[2 * j] + g.sample_points(1, c) * ts.points[2 * j + 1];
        chained += g.sample_weights[c] * ts.weights[j];
    }
    tape.forward(chained);
    const auto cg = tape.backward(chained);
    for (const auto& t : th) CHECK(cg[t] == doctest::Approx(tg[t]).epsilon(1e-9));
}

TEST_CASE("first-layer weight gradient matches finite differences") {
    lipnet::Architecture arch;
    arch.hidden = {8, 8};
    const auto net = lipnet::LipschitzMLP::random(arch, 40);
    const auto P = checks::random_measure(6, 2, 5), Q = checks::random_measure(4, 2, 6);
    const shapes::WeightedSample q{Q.weights, Q.points};
    const auto g = kr_gradient(net, P, q);
    auto pv = net.parameter_vector();
    for (std::size_t k = 0; k < 16; ++k) {
        auto plus = net, minus = net;
        auto vp = pv, vm = pv;
        vp[k] += 1e-5;
        vm[k] -= 1e-5;
        plus.set_parameter_vector(vp);
        minus.set_parameter_vector(vm);
        const double fd = (kr_objective(plus, P, q) - kr_objective(minus, P, q)) / 2e-5;
        const double ad = lipnet::LipschitzMLP::flatten(g.params)[k];
        CHECK(std::abs(ad - fd) / (std::abs(fd) + 1e-12) <= 1e-4);
    }
}

TEST_CASE("estimate_emd on analytic cases") {
    FitConfig c;
    lipnet::Architecture arch;
    const auto net = lipnet::LipschitzMLP::random(arch, 0);

    const auto P = checks::random_measure(10, 2, 3);
    const auto same = estimate_emd(P, {P.weights, P.points}, net, c);
    CHECK(same.emd >= -1e-6);
    CHECK(same.emd <= 1e-3);

    const auto b = dirac({0.6, 0.8});
    const auto pair = estimate_emd(dirac({0.0, 0.0}), {b.weights, b.points}, net, c);
    CHECK(pair.emd >= 0.99);
    CHECK(pair.emd <= 1.0 + 1e-6);
    for (double v : pair.history) CHECK(v <= 1.0 + 1e-6);
}

TEST_CASE("estimate_emd is a lower bound at every step") {
    FitConfig c;
    c.estimate_steps = 500;
    lipnet::Architecture arch;
    std::mt19937_64 rng(2);
    for (int k = 0; k < 3; ++k) {
        const auto P = checks::random_measure(12, 2, rng()), Q = checks::random_measure(9, 2, rng());
        const double exact = ot::exact_emd(P, Q).cost;
        const auto est = estimate_emd(P, {Q.weights, Q.points}, lipnet::LipschitzMLP::random(arch, rng()), c);
        for (double v : est.history) CHECK(v <= exact + 1e-6);
        CHECK(est.emd == *std::max_element(est.history.begin(), est.history.end()));
        CHECK(est.emd > 0.5 * exact);
        // the returned potential attains the reported value
        auto Pc = P, Qc = Q;
        Pc.points.colwise() -= est.origin;
        Qc.points.colwise() -= est.origin;
        CHECK(kr_objective(est.net, Pc, {Qc.weights, Qc.points}) == doctest::Approx(est.emd).epsilon(1e-12));
    }
}

TEST_CASE("potential_heatmap") {
    lipnet::Architecture arch;
    GridSpec grid{5, 4, 0.0, 1.0, 0.0, 2.0};
    const auto zero = potential_heatmap(lipnet::LipschitzMLP::zeros(arch), grid);
    CHECK(zero.size() == 20);
    CHECK(std::all_of(zero.begin(), zero.end(), [](double v) { return v == 0.0; }));

    const auto net = lipnet::LipschitzMLP::random(arch, 1);
    GridSpec one{1, 1, 0.0, 1.0, 0.0, 1.0};
    CHECK(potential_heatmap(net, one)[0] == net.forward(std::vector<double>{0.5, 0.5}));

    // the trained Dirac-pair potential has unit slope between the atoms
    FitConfig c;
    const auto b = dirac({0.8, 0.5});
    const auto est = estimate_emd(dirac({0.2, 0.5}), {b.weights, b.points}, net, c);
    GridSpec line{7, 1, 0.2, 0.8, 0.5, 0.5};
    const auto v = potential_heatmap(est.net, line, est.origin);
    const double slope = (v.front() - v.back()) / (0.6 * 6.0 / 7.0);
    CHECK(slope >= 0.95);
    CHECK(slope <= 1.0 + 1e-9);
}

TEST_CASE("theta_forces") {
    const shapes::WeightedSample s{Eigen::Vector2d(0.25, 0.75), Eigen::MatrixXd{{0.1, 0.4}, {0.3, 0.9}}};
    lipnet::Architecture arch;
    CHECK(theta_forces(lipnet::LipschitzMLP::zeros(arch), s).isZero());

    const auto lin = linear_net({0.6, -0.8}, 0.2);
    const auto F = theta_forces(lin, s);
    for (int j = 0; j < 2; ++j) {
        CHECK(F(0, j) == doctest::Approx(0.6 * s.weights[j]));
        CHECK(F(1, j) == doctest::Approx(-0.8 * s.weights[j]));
    }

    // source at (0.2, 0.3) must be pushed toward the event atom at (0.7, 0.6)
    FitConfig c;
    const Eigen::Vector2d src(0.2, 0.3), dst(0.7, 0.6);
    const auto est = estimate_emd(dirac({dst[0], dst[1]}), {Eigen::VectorXd::Ones(1), src - Eigen::Vector2d(0, 0)},
                                  lipnet::LipschitzMLP::random(arch, 3), c);
    const shapes::WeightedSample centered{Eigen::VectorXd::Ones(1), src - est.origin};
    const Eigen::Vector2d f = theta_forces(est.net, centered).col(0);
    const double cosang = f.dot(dst - src) / (f.norm() * (dst - src).norm());
    CHECK(cosang >= std::cos(10.0 * std::numbers::pi / 180.0));
}

TEST_CASE("fit holds a circle fitted at the truth") {
    auto spec = shapes::ShapeSpec::circle_set({{0.5, 0.5, 0.25}}, 64);
    const auto s = shapes::sample(spec);
    events::Event event;
    event.energies = Eigen::VectorXd::Ones(s.weights.size());
    event.positions = s.points;
    FitConfig c;
    c.outer_steps = 50;
    c.warmup_inner_steps = 500;
    c.refit_inner_steps = 200;
    const auto trace = fit::fit(event, spec, c);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(trace.final_theta[k] - spec.theta[k]) <= 1e-3);
    CHECK(trace.final_observable <= 1e-2);
    REQUIRE(trace.records.size() == 50);
    for (const auto& r : trace.records) CHECK(r.grad_norm_theta < 1e-3);
}

TEST_CASE("fit records lower bounds and is shift equivariant") {
    const auto event = events::gen_circle_event({{0.4, 0.5, 0.2}}, 60, 0.0, 3);
    auto init = shapes::ShapeSpec::circle_set({{0.55, 0.45, 0.15}}, 32);
    const auto c = quick_config();
    const auto trace = fit::fit(event, init, c);
    CHECK(trace.records.size() == c.outer_steps);
    const auto E = events::normalize(event);
    for (const auto& r : trace.records) {
        auto at = init;
        at.set_theta(r.theta);
        const double exact = ot::exact_emd(E, shapes::sample(at).measure()).cost;
        CHECK(r.emd_estimate <= exact + 1e-6);
        CHECK(r.emd_estimate >= -1e-6);
    }

}

// Training amplifies the rounding differences between the two frames (unit-row
// fastest), so traces are compared under per-row normalization and the
// observable, which comes after 200 more refit steps, more loosely.
TEST_CASE("translated fits give translated traces") {
    const auto event = events::gen_circle_event({{0.4, 0.5, 0.2}}, 60, 0.0, 3);
    auto init = shapes::ShapeSpec::circle_set({{0.55, 0.45, 0.15}}, 32);
    auto c = quick_config();
    c.arch.projection = lipnet::Projection::PerRow;
    const auto trace = fit::fit(event, init, c);

    const std::vector<double> t{0.3, -0.2};
    auto moved_event = event;
    moved_event.positions.colwise() += Eigen::Vector2d(t[0], t[1]);
    auto moved_init = init;
    shapes::translate(moved_init, t);
    const auto moved = fit::fit(moved_event, moved_init, c);
    REQUIRE(moved.records.size() == trace.records.size());
    for (std::size_t k = 0; k < trace.records.size(); ++k) {
        CHECK(moved.records[k].theta[0] - trace.records[k].theta[0] == doctest::Approx(t[0]).epsilon(1e-6));
        CHECK(moved.records[k].theta[1] - trace.records[k].theta[1] == doctest::Approx(t[1]).epsilon(1e-6));
        CHECK(moved.records[k].theta[2] == doctest::Approx(trace.records[k].theta[2]).epsilon(1e-6));
        CHECK(moved.records[k].emd_estimate == doctest::Approx(trace.records[k].emd_estimate).epsilon(1e-6));
    }
    CHECK(moved.final_observable == doctest::Approx(trace.final_observable).epsilon(1e-3));
}

TEST_CASE("objective and gradients are translation invariant for every projection") {
    const auto P = checks::random_measure(9, 2, 21), Q = checks::random_measure(7, 2, 22);
    const Eigen::Vector2d t(0.3, -0.2);
    auto Pm = P;
    Pm.points.colwise() += t;
    shapes::WeightedSample q{Q.weights, Q.points}, qm{Q.weights, Q.points.colwise() + t};
    for (auto proj : {lipnet::Projection::Whole, lipnet::Projection::PerRow, lipnet::Projection::UnitRow}) {
        lipnet::Architecture arch;
        arch.hidden = {16, 16};
        arch.projection = proj;
        const auto net = lipnet::LipschitzMLP::random(arch, 8);
        FitConfig c;
        c.estimate_steps = 50;
        const auto a = estimate_emd(P, q, net, c), b = estimate_emd(Pm, qm, net, c);
        for (std::size_t k = 0; k < a.history.size(); ++k)
            CHECK(b.history[k] == doctest::Approx(a.history[k]).epsilon(1e-10));
        CHECK((b.origin - a.origin - t).norm() <= 1e-15);
    }
}

TEST_CASE("fit snapshots and divergence") {
    const auto event = events::gen_circle_event({{0.4, 0.5, 0.2}}, 40, 0.0, 3);
    const auto init = shapes::ShapeSpec::circle_set({{0.6, 0.6, 0.1}}, 16);
    auto c = quick_config();
    c.outer_steps = 6;
    c.snapshot_every = 2;
    c.heatmap = {8, 6, 0.0, 1.0, 0.0, 1.0};
    const auto trace = fit::fit(event, init, c);
    REQUIRE(trace.snapshots.size() == 4);  // steps 0, 2, 4 and the final one
    CHECK(trace.snapshots[1].step == 2);
    CHECK(trace.snapshots.back().heatmap.size() == 48);
    CHECK(trace.snapshots.back().forces.cols() == 16);

    c.divergence_threshold = 1e-12;
    try {
        fit::fit(event, init, c);
        FAIL("expected divergence");
    } catch (const FitDivergence& e) {
        CHECK(std::string(e.what()).find("step") != std::string::npos);
        CHECK(!e.trace().final_theta.empty());
    }
}

TEST_CASE("config parsing") {
    const auto c = parse_config("# comment\ninner_lr = 0.01\nhidden = 16, 16\nprojection = per-row\nstochastic = true\n");
    CHECK(c.inner_lr == 0.01);
    CHECK(c.arch.hidden == std::vector<int>{16, 16});
    CHECK(c.arch.projection == lipnet::Projection::PerRow);
    CHECK(c.stochastic);

    const auto back = parse_config(config_to_text(c));
    CHECK(config_to_text(back) == config_to_text(c));

    CHECK_THROWS_AS(parse_config("bogus = 1\n"), ConfigError);
    try {
        parse_config("inner_lr = 0.1\nouter_steps = abc\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    FitConfig bad;
    bad.outer_steps = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = FitConfig{};
    bad.inner_lr = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("heatmap and trace text formats") {
    GridSpec g{3, 2, -1.0, 1.0, 0.0, 0.5};
    const std::vector<double> v{0.1, -0.2, 0.30000000000000004, 4e-17, 5.0, -6.5};
    const auto [g2, v2] = heatmap_from_text(heatmap_to_text(g, v));
    CHECK(g2.nx == 3);
    CHECK(g2.ny == 2);
    CHECK(g2.xmin == -1.0);
    CHECK(g2.ymax == 0.5);
    CHECK(v2 == v);

    FitTrace t;
    t.records.push_back({0, {0.1, 0.2}, 0.5, 1.0});
    t.records.push_back({1, {0.15, 0.2}, 0.4, 0.8});
    t.final_theta = {0.15, 0.2};
    t.final_observable = 0.3;
    t.outer_steps_run = 2;
    std::istringstream in(trace_to_jsonl(t));
    std::vector<nlohmann::json> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(nlohmann::json::parse(line));
    REQUIRE(lines.size() == 3);
    CHECK(lines[1]["emd"] == 0.4);
    CHECK(lines[2]["observable"] == 0.3);
}
