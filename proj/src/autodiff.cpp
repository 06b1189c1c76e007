#include "neemo/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <string>

#include "neemo/error.hpp"

namespace neemo::ad {

namespace {

constexpr std::uint32_t kNoParent = std::numeric_limits<std::uint32_t>::max();

Tape& tape_of(Var a, Var b) {
    if (a.tape() == nullptr || a.tape() != b.tape()) throw StateError("ad: operands live on different tapes");
    return *a.tape();
}

}  // namespace

const char* op_name(Op op) noexcept {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Const: return "const";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Neg: return "neg";
        case Op::Max: return "max";
        case Op::Min: return "min";
        case Op::Abs: return "abs";
        case Op::Sqrt: return "sqrt";
        case Op::Pow: return "pow";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Exp: return "exp";
    }
    return "unknown";
}

double Var::value() const { return tape_->value(*this); }

double GradientMap::operator[](Var leaf) const {
    if (leaf.id() >= leaf_slot_.size()) return 0.0;
    const auto slot = leaf_slot_[leaf.id()];
    return slot == kNoParent ? 0.0 : adjoints_[slot];
}

Var Tape::variable(double value) {
    if (!std::isfinite(value)) throw NumericalError("autodiff: non-finite leaf value");
    auto v = push(Node{Op::Leaf, kNoParent, kNoParent, value, 0.0, 0.0, 0.0});
    leaves_.push_back(v.id());
    return v;
}

Var Tape::constant(double value) {
    if (!std::isfinite(value)) throw NumericalError("autodiff: non-finite constant");
    return push(Node{Op::Const, kNoParent, kNoParent, value, 0.0, 0.0, 0.0});
}

void Tape::set(Var leaf, double value) {
    auto& node = nodes_.at(leaf.id());
    if (node.op != Op::Leaf) throw StateError("autodiff: set() on a non-leaf node");
    if (!std::isfinite(value)) throw NumericalError("autodiff: non-finite leaf value");
    node.value = value;
    evaluated_ = false;
}

Var Tape::push(Node node) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    if (node.op != Op::Leaf && node.op != Op::Const) evaluate(node);
    nodes_.push_back(node);
    return Var(this, id);
}

void Tape::evaluate(Node& n) const {
    const double a = n.a == kNoParent ? 0.0 : nodes_[n.a].value;
    const double b = n.b == kNoParent ? 0.0 : nodes_[n.b].value;
    switch (n.op) {
        case Op::Leaf:
        case Op::Const:
            return;
        case Op::Add:
            n.value = a + b;
            n.da = 1.0;
            n.db = 1.0;
            break;
        case Op::Sub:
            n.value = a - b;
            n.da = 1.0;
            n.db = -1.0;
            break;
        case Op::Mul:
            n.value = a * b;
            n.da = b;
            n.db = a;
            break;
        case Op::Div:
            n.value = a / b;
            n.da = 1.0 / b;
            n.db = -a / (b * b);
            break;
        case Op::Neg:
            n.value = -a;
            n.da = -1.0;
            break;
        case Op::Max:
            n.value = a >= b ? a : b;
            n.da = a >= b ? 1.0 : 0.0;
            n.db = a >= b ? 0.0 : 1.0;
            break;
        case Op::Min:
            n.value = a <= b ? a : b;
            n.da = a <= b ? 1.0 : 0.0;
            n.db = a <= b ? 0.0 : 1.0;
            break;
        case Op::Abs:
            n.value = std::abs(a);
            n.da = a >= 0.0 ? 1.0 : -1.0;
            break;
        case Op::Sqrt:
            n.value = std::sqrt(a);
            n.da = n.value > 0.0 ? 0.5 / n.value : 0.0;
            break;
        case Op::Pow:
            n.value = std::pow(a, n.param);
            n.da = n.param == 0.0 ? 0.0 : n.param * std::pow(a, n.param - 1.0);
            break;
        case Op::Sin:
            n.value = std::sin(a);
            n.da = std::cos(a);
            break;
        case Op::Cos:
            n.value = std::cos(a);
            n.da = -std::sin(a);
            break;
        case Op::Exp:
            n.value = std::exp(a);
            n.da = n.value;
            break;
    }
    if (!std::isfinite(n.value) || !std::isfinite(n.da) || !std::isfinite(n.db)) {
        throw NumericalError(std::string("autodiff: non-finite value in op '") + op_name(n.op) + "'");
    }
}

Var Tape::unary(Op op, Var a) {
    assert(a.tape() == this);
    return push(Node{op, a.id(), kNoParent, 0.0, 0.0, 0.0, 0.0});
}

Var Tape::binary(Op op, Var a, Var b) {
    assert(a.tape() == this && b.tape() == this);
    return push(Node{op, a.id(), b.id(), 0.0, 0.0, 0.0, 0.0});
}

Var Tape::pow(Var a, double exponent) {
    assert(a.tape() == this);
    return push(Node{Op::Pow, a.id(), kNoParent, 0.0, 0.0, 0.0, exponent});
}

double Tape::forward(Var root) {
    for (auto& node : nodes_) evaluate(node);
    evaluated_ = true;
    return nodes_.at(root.id()).value;
}

GradientMap Tape::backward(Var root) const {
    if (!evaluated_) throw StateError("autodiff: backward() called before forward() on a modified tape");
    std::vector<double> adj(root.id() + 1, 0.0);
    adj[root.id()] = 1.0;
    for (std::uint32_t i = root.id() + 1; i-- > 0;) {
        const double g = adj[i];
        if (g == 0.0) continue;
        const auto& n = nodes_[i];
        if (n.a != kNoParent) adj[n.a] += g * n.da;
        if (n.b != kNoParent) adj[n.b] += g * n.db;
    }
    std::vector<double> out(leaves_.size(), 0.0);
    std::vector<std::uint32_t> slot(nodes_.size(), kNoParent);
    for (std::size_t k = 0; k < leaves_.size(); ++k) {
        slot[leaves_[k]] = static_cast<std::uint32_t>(k);
        if (leaves_[k] <= root.id()) out[k] = adj[leaves_[k]];
    }
    return GradientMap(std::move(out), std::move(slot));
}

Var operator+(Var a, Var b) { return tape_of(a, b).binary(Op::Add, a, b); }
Var operator-(Var a, Var b) { return tape_of(a, b).binary(Op::Sub, a, b); }
Var operator*(Var a, Var b) { return tape_of(a, b).binary(Op::Mul, a, b); }
Var operator/(Var a, Var b) { return tape_of(a, b).binary(Op::Div, a, b); }
Var operator-(Var a) { return a.tape()->unary(Op::Neg, a); }
Var operator+(Var a, double b) { return a + a.tape()->constant(b); }
Var operator+(double a, Var b) { return b.tape()->constant(a) + b; }
Var operator-(Var a, double b) { return a - a.tape()->constant(b); }
Var operator-(double a, Var b) { return b.tape()->constant(a) - b; }
Var operator*(Var a, double b) { return a * a.tape()->constant(b); }
Var operator*(double a, Var b) { return b.tape()->constant(a) * b; }
Var operator/(Var a, double b) { return a / a.tape()->constant(b); }
Var operator/(double a, Var b) { return b.tape()->constant(a) / b; }
Var& operator+=(Var& a, Var b) { return a = a + b; }
Var& operator-=(Var& a, Var b) { return a = a - b; }
Var& operator*=(Var& a, Var b) { return a = a * b; }

Var max(Var a, Var b) { return tape_of(a, b).binary(Op::Max, a, b); }
Var min(Var a, Var b) { return tape_of(a, b).binary(Op::Min, a, b); }
Var max(double a, Var b) { return max(b.tape()->constant(a), b); }
Var max(Var a, double b) { return max(a, a.tape()->constant(b)); }
Var abs(Var a) { return a.tape()->unary(Op::Abs, a); }
Var sqrt(Var a) { return a.tape()->unary(Op::Sqrt, a); }
Var pow(Var a, double exponent) { return a.tape()->pow(a, exponent); }
Var sin(Var a) { return a.tape()->unary(Op::Sin, a); }
Var cos(Var a) { return a.tape()->unary(Op::Cos, a); }
Var exp(Var a) { return a.tape()->unary(Op::Exp, a); }

std::vector<double> gradient(const ExpressionBuilder& f, std::span<const double> point) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(point.size());
    for (double p : point) vars.push_back(tape.variable(p));
    const Var root = f(tape, vars);
    const auto grads = tape.backward(root);
    std::vector<double> out(point.size());
    for (std::size_t k = 0; k < point.size(); ++k) out[k] = grads[vars[k]];
    return out;
}

double finite_diff_check(const ExpressionBuilder& f, std::span<const double> point, double step) {
    const auto analytic = gradient(f, point);
    auto eval_at = [&](std::vector<double> x) {
        Tape tape;
        std::vector<Var> vars;
        vars.reserve(x.size());
        for (double p : x) vars.push_back(tape.variable(p));
        return f(tape, vars).value();
    };
    double worst = 0.0;
    std::vector<double> x(point.begin(), point.end());
    for (std::size_t k = 0; k < x.size(); ++k) {
        auto hi = x;
        auto lo = x;
        hi[k] += step;
        lo[k] -= step;
        const double fd = (eval_at(hi) - eval_at(lo)) / (2.0 * step);
        const double err = std::abs(analytic[k] - fd) / (std::abs(fd) + 1e-12);
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace neemo::ad
