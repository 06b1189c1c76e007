#include <doctest.h>

#include <filesystem>

#include "neemo/error.hpp"
#include "neemo/events.hpp"

using namespace neemo;
using namespace neemo::events;

namespace {

Event small_event() {
    Event e;
    e.energies = Eigen::Vector3d(1.0, 3.0, 0.1);
    e.positions = Eigen::MatrixXd{{0.1, 0.30000000000000004, -2.5e-7}, {0.7, 1.0 / 3.0, 12.0}};
    return e;
}

}  // namespace

TEST_CASE("normalize examples") {
    Event one;
    one.energies = Eigen::VectorXd::Constant(1, 5.0);
    one.positions = Eigen::MatrixXd::Zero(2, 1);
    CHECK(normalize(one).weights[0] == 1.0);

    Event two;
    two.energies = Eigen::Vector2d(1.0, 3.0);
    two.positions = Eigen::MatrixXd::Zero(2, 2);
    const auto m = normalize(two);
    CHECK(m.weights[0] == 0.25);
    CHECK(m.weights[1] == 0.75);

    const auto ev = gen_subjet_event({4, {}, 0.05, 10}, 3);
    CHECK(std::abs(normalize(ev).weights.sum() - 1.0) <= 1e-12);

    Event renorm = two;
    renorm.energies = m.weights;
    CHECK(normalize(renorm).weights == m.weights);
}

TEST_CASE("csv parsing") {
    const auto e = parse_csv("E,x1,x2\n1.0,0.0,0.0\n");
    CHECK(e.size() == 1);
    CHECK(e.dim() == 2);
    CHECK(e.energies[0] == 1.0);
    CHECK(e.positions.col(0).isZero());

    try {
        parse_csv("E,x1,x2\na,b\n");
        FAIL("expected a parse error");
    } catch (const ParseError& err) {
        CHECK(err.line() == 2);
        CHECK(std::string(err.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_csv("E,x1\n0.0,1.0\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("E,x1\n-1.0,1.0\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("x1,x2\n1.0,1.0\n"), ParseError);
}

TEST_CASE("jsonl parsing") {
    const auto e = parse_jsonl("{\"E\": 2.0, \"x\": [0.5, 0.25]}\n{\"E\": 1.0, \"x\": [0.0, 1.0]}\n");
    CHECK(e.size() == 2);
    CHECK(e.positions(1, 0) == 0.25);
    CHECK_THROWS_AS(parse_jsonl("{\"E\": 2.0}\n"), ParseError);
    CHECK_THROWS_AS(parse_jsonl("{\"E\": 2.0, \"x\": [0.5]}\n{\"E\": 1.0, \"x\": [0.0, 1.0]}\n"), ParseError);
}

TEST_CASE("save and load round-trip bitwise") {
    const auto e = small_event();
    const auto dir = std::filesystem::temp_directory_path();
    for (const char* name : {"neemo_rt.csv", "neemo_rt.jsonl"}) {
        const auto path = dir / name;
        save_event(e, path);
        const auto back = load_event(path);
        std::filesystem::remove(path);
        CHECK(back.energies == e.energies);
        CHECK(back.positions == e.positions);
    }
    CHECK_THROWS_AS(format_for("event.txt"), InputError);
}

TEST_CASE("circle generator") {
    const auto e = gen_circle_event({{0.5, 0.5, 1.0}}, 100, 0.0, 4);
    CHECK(e.size() == 100);
    for (Eigen::Index i = 0; i < e.size(); ++i)
        CHECK(std::abs(std::hypot(e.positions(0, i) - 0.5, e.positions(1, i) - 0.5) - 1.0) <= 1e-12);
    const auto a = gen_circle_event(three_circle_layout(), 50, 0.01, 9), b = gen_circle_event(three_circle_layout(), 50, 0.01, 9);
    CHECK(a.positions == b.positions);
    CHECK(a.size() == 150);
    CHECK((a.energies.array() == a.energies[0]).all());
}

TEST_CASE("triangle and ellipse generator") {
    auto p = triangle_ellipse_layout();
    p.a = p.b = 0.1;
    const auto e = gen_triangle_ellipse_event(p, 64, 2);
    CHECK(e.size() == 128);
    for (Eigen::Index i = 64; i < 128; ++i)
        CHECK(std::hypot(e.positions(0, i) - p.cx, e.positions(1, i) - p.cy) == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(gen_triangle_ellipse_event(p, 64, 2).positions == e.positions);
}

TEST_CASE("subjet generator") {
    const auto tight = gen_subjet_event({1, {}, 1e-9, 10}, 1);
    CHECK(tight.size() == 10);
    for (Eigen::Index i = 1; i < 10; ++i) CHECK((tight.positions.col(i) - tight.positions.col(0)).norm() < 1e-7);
    CHECK(gen_subjet_event({3, {}, 0.05, 10}, 2).size() == 30);
    CHECK(gen_subjet_event({4, {}, 0.05, 10}, 2).size() == 40);
    CHECK(gen_subjet_event({3, {}, 0.05, 10}, 5).positions == gen_subjet_event({3, {}, 0.05, 10}, 5).positions);
}

TEST_CASE("events are validated") {
    Event e;
    CHECK_THROWS_AS(e.validate(), InputError);
    e.energies = Eigen::Vector2d(1.0, 0.0);
    e.positions = Eigen::MatrixXd::Zero(2, 2);
    CHECK_THROWS_AS(e.validate(), InputError);
}
