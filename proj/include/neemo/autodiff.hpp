#pragma once

// Tape-based reverse-mode automatic differentiation over scalar expressions.
//
// A Tape records every operation as a node whose parents always have smaller
// ids, so the node order is a topological order. Values are computed eagerly
// while the graph is built; Tape::set() marks the tape stale until the next
// forward() sweep.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace neemo::ad {

enum class Op : std::uint8_t {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Max,
    Min,
    Abs,
    Sqrt,
    Pow,
    Sin,
    Cos,
    Exp,
};

const char* op_name(Op op) noexcept;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    double value() const;
    std::uint32_t id() const noexcept { return id_; }
    Tape* tape() const noexcept { return tape_; }

private:
    friend class Tape;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

/// Adjoints of every leaf variable of a tape with respect to one root.
class GradientMap {
public:
    GradientMap() = default;
    GradientMap(std::vector<double> adjoints, std::vector<std::uint32_t> leaf_slot)
        : adjoints_(std::move(adjoints)), leaf_slot_(std::move(leaf_slot)) {}

    /// Adjoint of a leaf; zero when the leaf does not reach the root.
    double operator[](Var leaf) const;
    /// Adjoints in leaf creation order.
    std::span<const double> values() const noexcept { return adjoints_; }
    std::size_t size() const noexcept { return adjoints_.size(); }

private:
    std::vector<double> adjoints_;
    std::vector<std::uint32_t> leaf_slot_;  // node id -> leaf index, or npos
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var variable(double value);
    Var constant(double value);

    /// Reassigns a leaf value. The tape is stale until forward() runs.
    void set(Var leaf, double value);

    /// Re-evaluates every node in creation order and returns the root value.
    double forward(Var root);

    /// Reverse sweep from root. Throws StateError on a stale tape.
    GradientMap backward(Var root) const;

    double value(Var v) const { return nodes_[v.id()].value; }
    Op op(Var v) const { return nodes_[v.id()].op; }
    bool evaluated() const noexcept { return evaluated_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t num_variables() const noexcept { return leaves_.size(); }
    void reserve(std::size_t n) { nodes_.reserve(n); }

    Var unary(Op op, Var a);
    Var binary(Op op, Var a, Var b);
    Var pow(Var a, double exponent);

private:
    struct Node {
        Op op;
        std::uint32_t a;
        std::uint32_t b;
        double value;
        double da;     // d(node)/d(parent a)
        double db;     // d(node)/d(parent b)
        double param;  // exponent for Pow
    };

    void evaluate(Node& node) const;
    Var push(Node node);

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> leaves_;
    bool evaluated_ = true;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator/(Var a, double b);
Var operator/(double a, Var b);
Var& operator+=(Var& a, Var b);
Var& operator-=(Var& a, Var b);
Var& operator*=(Var& a, Var b);

// On ties max/min differentiate through the first argument.
Var max(Var a, Var b);
Var min(Var a, Var b);
Var max(double a, Var b);
Var max(Var a, double b);
// abs'(0) = +1, matching max(x, -x) under the first-argument rule.
Var abs(Var a);
// sqrt'(0) is taken as 0 (a subgradient of the norm at the origin).
Var sqrt(Var a);
Var pow(Var a, double exponent);
Var sin(Var a);
Var cos(Var a);
Var exp(Var a);

/// Builds an expression from leaf variables on the given tape.
using ExpressionBuilder = std::function<Var(Tape&, std::span<const Var>)>;

/// Max over coordinates of |autodiff - central difference| / (|central difference| + 1e-12).
double finite_diff_check(const ExpressionBuilder& f, std::span<const double> point, double step);

/// Gradient of f at point, via one forward and one reverse sweep.
std::vector<double> gradient(const ExpressionBuilder& f, std::span<const double> point);

}  // namespace neemo::ad
