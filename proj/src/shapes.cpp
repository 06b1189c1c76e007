#include "neemo/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <nlohmann/json.hpp>

#include "neemo/error.hpp"

namespace neemo::shapes {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double value_of(double x) { return x; }
double value_of(ad::Var x) { return x.value(); }

struct DoubleCtx {
    using S = double;
    S constant(double v) const { return v; }
    // Value t0 whose derivative w.r.t. deps is `grads`; plain doubles keep the value only.
    S linearized(double t0, std::span<const S>, std::span<const double>) const { return t0; }
};

struct TapeCtx {
    using S = ad::Var;
    ad::Tape& tape;
    S constant(double v) const { return tape.constant(v); }
    S linearized(double t0, std::span<const S> deps, std::span<const double> grads) const {
        S out = tape.constant(t0);
        for (std::size_t k = 0; k < deps.size(); ++k) {
            if (grads[k] == 0.0) continue;
            out = out + grads[k] * (deps[k] - deps[k].value());
        }
        return out;
    }
};

// Arc length of (a cos u, b sin u) and its partials in a and b, by composite Gauss-Legendre.
class EllipseArc {
public:
    static constexpr int kPanels = 64;

    EllipseArc(double a, double b) : a_(a), b_(b) {
        cum_.assign(kPanels + 1, {0.0, 0.0, 0.0});
        for (int p = 0; p < kPanels; ++p) {
            const auto part = integrate(p * width(), (p + 1) * width());
            for (int k = 0; k < 3; ++k) cum_[p + 1][k] = cum_[p][k] + part[k];
        }
    }

    double total() const { return cum_[kPanels][0]; }
    double speed(double t) const { return std::sqrt(a_ * a_ * sq(std::sin(t)) + b_ * b_ * sq(std::cos(t))); }

    // {S(t), dS/da, dS/db} for t in [0, 2pi].
    std::array<double, 3> at(double t) const {
        const int p = std::clamp(static_cast<int>(t / width()), 0, kPanels - 1);
        const auto part = integrate(p * width(), t);
        return {cum_[p][0] + part[0], cum_[p][1] + part[1], cum_[p][2] + part[2]};
    }

    // Parameter angle at arc length `target`; Newton with a bisection safeguard.
    double invert(double target) const {
        double lo = 0.0, hi = kTwoPi;
        double t = kTwoPi * target / total();
        for (int it = 0; it < 100; ++it) {
            const double f = at(t)[0] - target;
            if (std::abs(f) <= 1e-15 * total()) break;
            if (f > 0.0) hi = t; else lo = t;
            double next = t - f / speed(t);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (next == t) break;
            t = next;
        }
        return t;
    }

private:
    static double sq(double x) { return x * x; }
    static double width() { return kTwoPi / kPanels; }

    std::array<double, 3> integrate(double lo, double hi) const {
        using Quad = boost::math::quadrature::gauss<double, 20>;
        if (hi <= lo) return {0.0, 0.0, 0.0};
        const double s = Quad::integrate([&](double u) { return speed(u); }, lo, hi);
        const double da = Quad::integrate([&](double u) { return a_ * sq(std::sin(u)) / speed(u); }, lo, hi);
        const double db = Quad::integrate([&](double u) { return b_ * sq(std::cos(u)) / speed(u); }, lo, hi);
        return {s, da, db};
    }

    double a_, b_;
    std::vector<std::array<double, 3>> cum_;
};

std::vector<double> grid_fractions(int m) {
    std::vector<double> f(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) f[static_cast<std::size_t>(i)] = static_cast<double>(i) / m;
    return f;
}

template <class Ctx>
using Scalar = typename Ctx::S;

// Appends perimeter points of one circle, ellipse or triangle at `fractions`.
template <class Ctx>
void perimeter(const Ctx& ctx, Kind kind, std::span<const Scalar<Ctx>> th, std::span<const double> fractions,
               std::vector<Scalar<Ctx>>& out) {
    using std::cos;
    using std::exp;
    using std::sin;
    using std::sqrt;
    using S = Scalar<Ctx>;
    switch (kind) {
        case Kind::CircleSet: {
            const S r = exp(th[2]);
            for (double f : fractions) {
                const double alpha = kTwoPi * f;
                out.push_back(th[0] + r * std::cos(alpha));
                out.push_back(th[1] + r * std::sin(alpha));
            }
            return;
        }
        case Kind::Ellipse: {
            const S a = exp(th[2]);
            const S b = exp(th[3]);
            const S cr = cos(th[4]);
            const S sr = sin(th[4]);
            const EllipseArc arc(value_of(a), value_of(b));
            const auto [total, total_da, total_db] = arc.at(kTwoPi);
            const std::array<S, 2> deps{th[2], th[3]};
            for (double f : fractions) {
                const double t0 = arc.invert(f * total);
                // Implicit derivative of S(t; a, b) = f * S(2pi; a, b), w.r.t. log a and log b.
                const auto [s, s_da, s_db] = arc.at(t0);
                const double v = arc.speed(t0);
                const std::array<double, 2> grads{value_of(a) * (f * total_da - s_da) / v,
                                                  value_of(b) * (f * total_db - s_db) / v};
                const S t = ctx.linearized(t0, deps, grads);
                const S ex = a * cos(t);
                const S ey = b * sin(t);
                out.push_back(th[0] + cr * ex - sr * ey);
                out.push_back(th[1] + sr * ex + cr * ey);
            }
            return;
        }
        case Kind::Triangle: {
            std::array<S, 3> len;
            for (int e = 0; e < 3; ++e) {
                const int n = (e + 1) % 3;
                const S dx = th[2 * n] - th[2 * e];
                const S dy = th[2 * n + 1] - th[2 * e + 1];
                len[e] = sqrt(dx * dx + dy * dy);
            }
            const S per = len[0] + len[1] + len[2];
            for (double f : fractions) {
                const S s = f * per;
                // The vertex at the start of an edge belongs to that edge.
                int e = 0;
                S start = ctx.constant(0.0);
                while (e < 2 && value_of(s) >= value_of(start + len[e])) {
                    start = start + len[e];
                    ++e;
                }
                const int n = (e + 1) % 3;
                const S u = (s - start) / len[e];
                out.push_back(th[2 * e] + u * (th[2 * n] - th[2 * e]));
                out.push_back(th[2 * e + 1] + u * (th[2 * n + 1] - th[2 * e + 1]));
            }
            return;
        }
        default:
            throw ConfigError("perimeter: not a perimeter shape");
    }
}

template <class Ctx>
std::vector<Scalar<Ctx>> softmax(const Ctx&, std::span<const Scalar<Ctx>> logits) {
    using std::exp;
    double shift = value_of(logits[0]);
    for (const auto& l : logits) shift = std::max(shift, value_of(l));
    std::vector<Scalar<Ctx>> e;
    for (const auto& l : logits) e.push_back(exp(l - shift));
    Scalar<Ctx> total = e[0];
    for (std::size_t k = 1; k < e.size(); ++k) total = total + e[k];
    for (auto& x : e) x = x / total;
    return e;
}

template <class Ctx>
struct SampleOut {
    std::vector<Scalar<Ctx>> weights;
    std::vector<Scalar<Ctx>> points;
};

template <class Ctx>
SampleOut<Ctx> sample_impl(const Ctx& ctx, const ShapeSpec& spec, std::span<const Scalar<Ctx>> th,
                           std::mt19937_64& rng) {
    using S = Scalar<Ctx>;
    SampleOut<Ctx> out;
    const bool learned = spec.weight_mode == WeightMode::Learned;
    auto fractions = [&](int m) {
        if (!spec.stochastic) return grid_fractions(m);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> f(static_cast<std::size_t>(m));
        for (auto& x : f) x = u(rng);
        return f;
    };
    switch (spec.kind) {
        case Kind::PointSet: {
            const auto k = static_cast<std::size_t>(spec.count);
            const auto d = static_cast<std::size_t>(spec.dim);
            out.points.assign(th.begin(), th.begin() + static_cast<std::ptrdiff_t>(k * d));
            if (learned) {
                out.weights = softmax(ctx, th.subspan(k * d, k));
            } else {
                out.weights.assign(k, ctx.constant(1.0 / static_cast<double>(k)));
            }
            return out;
        }
        case Kind::CircleSet: {
            const auto k = static_cast<std::size_t>(spec.count);
            std::vector<S> share;
            if (learned) share = softmax(ctx, th.subspan(3 * k, k));
            for (std::size_t c = 0; c < k; ++c) {
                const auto f = fractions(spec.samples);
                perimeter(ctx, Kind::CircleSet, th.subspan(3 * c, 3), std::span<const double>(f), out.points);
                for (int i = 0; i < spec.samples; ++i) {
                    out.weights.push_back(learned ? share[c] / static_cast<double>(spec.samples)
                                                  : ctx.constant(1.0 / static_cast<double>(k * spec.samples)));
                }
            }
            return out;
        }
        case Kind::Ellipse:
        case Kind::Triangle: {
            const auto f = fractions(spec.samples);
            perimeter(ctx, spec.kind, th, std::span<const double>(f), out.points);
            out.weights.assign(static_cast<std::size_t>(spec.samples),
                               ctx.constant(1.0 / static_cast<double>(spec.samples)));
            return out;
        }
        case Kind::Composite: {
            const auto n = spec.components.size();
            std::size_t offset = 0;
            std::vector<SampleOut<Ctx>> parts;
            for (const auto& c : spec.components) {
                parts.push_back(sample_impl(ctx, c, th.subspan(offset, c.theta_size()), rng));
                offset += c.theta_size();
            }
            std::vector<S> share;
            if (learned) share = softmax(ctx, th.subspan(offset, n));
            for (std::size_t c = 0; c < n; ++c) {
                for (const auto& w : parts[c].weights)
                    out.weights.push_back(learned ? w * share[c] : w * (1.0 / static_cast<double>(n)));
                out.points.insert(out.points.end(), parts[c].points.begin(), parts[c].points.end());
            }
            return out;
        }
    }
    return out;
}

nlohmann::json spec_to_json(const ShapeSpec& s) {
    nlohmann::json j;
    j["kind"] = to_string(s.kind);
    j["theta"] = s.theta;
    j["samples"] = s.samples;
    j["weight_mode"] = s.weight_mode == WeightMode::Learned ? "learned" : "uniform";
    j["count"] = s.count;
    j["dim"] = s.dim;
    j["stochastic"] = s.stochastic;
    if (s.kind == Kind::Composite) {
        auto parts = nlohmann::json::array();
        for (const auto& c : s.components) parts.push_back(spec_to_json(c));
        j["components"] = std::move(parts);
    }
    return j;
}

ShapeSpec spec_from_json(const nlohmann::json& j) {
    ShapeSpec s;
    s.kind = parse_kind(j.at("kind").get<std::string>());
    s.samples = j.value("samples", 64);
    const auto mode = j.value("weight_mode", std::string("uniform"));
    if (mode != "uniform" && mode != "learned") throw InputError("shape spec: unknown weight_mode '" + mode + "'");
    s.weight_mode = mode == "learned" ? WeightMode::Learned : WeightMode::Uniform;
    s.count = j.value("count", 1);
    s.dim = j.value("dim", 2);
    s.stochastic = j.value("stochastic", false);
    if (s.kind == Kind::Composite) {
        for (const auto& c : j.at("components")) s.components.push_back(spec_from_json(c));
    }
    if (j.contains("theta")) {
        s.theta = j.at("theta").get<std::vector<double>>();
    } else if (s.kind == Kind::Composite) {
        for (const auto& c : s.components) s.theta.insert(s.theta.end(), c.theta.begin(), c.theta.end());
        if (s.weight_mode == WeightMode::Learned) s.theta.resize(s.theta_size(), 0.0);
    } else {
        throw InputError("shape spec: missing theta");
    }
    if (s.kind == Kind::Composite) {
        if (s.theta.size() != s.theta_size()) throw InputError("shape spec: composite theta size mismatch");
        s.set_theta(s.theta);
    }
    s.validate();
    return s;
}

}  // namespace

std::string to_string(Kind kind) {
    switch (kind) {
        case Kind::PointSet: return "point-set";
        case Kind::CircleSet: return "circle-set";
        case Kind::Ellipse: return "ellipse";
        case Kind::Triangle: return "triangle";
        case Kind::Composite: return "composite";
    }
    return "?";
}

Kind parse_kind(const std::string& s) {
    if (s == "point-set") return Kind::PointSet;
    if (s == "circle-set") return Kind::CircleSet;
    if (s == "ellipse") return Kind::Ellipse;
    if (s == "triangle") return Kind::Triangle;
    if (s == "composite") return Kind::Composite;
    throw InputError("unknown shape kind '" + s + "'");
}

std::size_t ShapeSpec::theta_size() const {
    const bool learned = weight_mode == WeightMode::Learned;
    const auto k = static_cast<std::size_t>(std::max(count, 0));
    switch (kind) {
        case Kind::PointSet: return k * static_cast<std::size_t>(std::max(dim, 0)) + (learned ? k : 0);
        case Kind::CircleSet: return 3 * k + (learned ? k : 0);
        case Kind::Ellipse: return 5;
        case Kind::Triangle: return 6;
        case Kind::Composite: {
            std::size_t n = 0;
            for (const auto& c : components) n += c.theta_size();
            return n + (learned ? components.size() : 0);
        }
    }
    return 0;
}

std::size_t ShapeSpec::num_points() const {
    switch (kind) {
        case Kind::PointSet: return static_cast<std::size_t>(count);
        case Kind::CircleSet: return static_cast<std::size_t>(count * samples);
        case Kind::Ellipse:
        case Kind::Triangle: return static_cast<std::size_t>(samples);
        case Kind::Composite: {
            std::size_t n = 0;
            for (const auto& c : components) n += c.num_points();
            return n;
        }
    }
    return 0;
}

int ShapeSpec::point_dim() const {
    if (kind == Kind::PointSet) return dim;
    return 2;
}

void ShapeSpec::validate() const {
    if (kind != Kind::PointSet && kind != Kind::Composite && samples < 1)
        throw ConfigError("shape spec: samples per component must be positive, got " + std::to_string(samples));
    if ((kind == Kind::PointSet || kind == Kind::CircleSet) && count < 1)
        throw ConfigError("shape spec: count must be positive");
    if (kind == Kind::PointSet && dim < 1) throw ConfigError("shape spec: point dimension must be positive");
    if (kind == Kind::Composite) {
        if (components.empty()) throw ConfigError("shape spec: composite without components");
        for (const auto& c : components) {
            if (c.kind == Kind::Composite) throw ConfigError("shape spec: nested composites are not supported");
            c.validate();
            if (c.point_dim() != components.front().point_dim())
                throw ConfigError("shape spec: composite components differ in dimension");
        }
    }
    if (theta.size() != theta_size())
        throw ConfigError("shape spec: theta has " + std::to_string(theta.size()) + " entries, " + to_string(kind) +
                          " needs " + std::to_string(theta_size()));
    for (double t : theta)
        if (!std::isfinite(t)) throw ConfigError("shape spec: non-finite theta entry");
}

void ShapeSpec::set_theta(std::vector<double> values) {
    if (values.size() != theta_size()) throw ConfigError("shape spec: theta size mismatch");
    theta = std::move(values);
    std::size_t at = 0;
    for (auto& c : components) {
        std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(at), c.theta_size(), c.theta.begin());
        at += c.theta_size();
    }
}

ShapeSpec ShapeSpec::point_set(const std::vector<std::vector<double>>& centers, bool learned_weights) {
    if (centers.empty()) throw ConfigError("point_set: no centers");
    ShapeSpec s;
    s.kind = Kind::PointSet;
    s.count = static_cast<int>(centers.size());
    s.dim = static_cast<int>(centers.front().size());
    s.samples = 1;
    for (const auto& c : centers) {
        if (static_cast<int>(c.size()) != s.dim) throw ConfigError("point_set: centers differ in dimension");
        s.theta.insert(s.theta.end(), c.begin(), c.end());
    }
    if (learned_weights) {
        s.weight_mode = WeightMode::Learned;
        s.theta.resize(s.theta.size() + centers.size(), 0.0);
    }
    return s;
}

ShapeSpec ShapeSpec::circle_set(const std::vector<std::array<double, 3>>& circles, int samples) {
    ShapeSpec s;
    s.kind = Kind::CircleSet;
    s.count = static_cast<int>(circles.size());
    s.samples = samples;
    for (const auto& [cx, cy, r] : circles) {
        if (!(r > 0.0)) throw ConfigError("circle_set: radius must be positive");
        s.theta.insert(s.theta.end(), {cx, cy, std::log(r)});
    }
    s.validate();
    return s;
}

ShapeSpec ShapeSpec::ellipse(double cx, double cy, double a, double b, double rotation, int samples) {
    if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("ellipse: semi-axes must be positive");
    ShapeSpec s;
    s.kind = Kind::Ellipse;
    s.samples = samples;
    s.theta = {cx, cy, std::log(a), std::log(b), rotation};
    s.validate();
    return s;
}

ShapeSpec ShapeSpec::triangle(const std::array<double, 6>& vertices, int samples) {
    ShapeSpec s;
    s.kind = Kind::Triangle;
    s.samples = samples;
    s.theta.assign(vertices.begin(), vertices.end());
    s.validate();
    return s;
}

ShapeSpec ShapeSpec::composite(std::vector<ShapeSpec> parts) {
    ShapeSpec s;
    s.kind = Kind::Composite;
    s.components = std::move(parts);
    for (const auto& c : s.components) s.theta.insert(s.theta.end(), c.theta.begin(), c.theta.end());
    s.validate();
    return s;
}

std::string ShapeSpec::to_json() const { return spec_to_json(*this).dump(1); }

ShapeSpec ShapeSpec::from_json(const std::string& text) {
    try {
        return spec_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("shape spec: ") + e.what());
    }
}

void ShapeSpec::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << to_json() << '\n';
}

ShapeSpec ShapeSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

WeightedSample TapeSample::values() const {
    WeightedSample s;
    const auto n = static_cast<Eigen::Index>(weights.size());
    s.weights.resize(n);
    s.points.resize(dim, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        s.weights(k) = weights[static_cast<std::size_t>(k)].value();
        for (int i = 0; i < dim; ++i) s.points(i, k) = points[static_cast<std::size_t>(k * dim + i)].value();
    }
    return s;
}

WeightedSample sample(const ShapeSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    const auto raw = sample_impl(DoubleCtx{}, spec, std::span<const double>(spec.theta), rng);
    const int d = spec.point_dim();
    WeightedSample out;
    out.weights = Eigen::Map<const Eigen::VectorXd>(raw.weights.data(), static_cast<Eigen::Index>(raw.weights.size()));
    out.points = Eigen::Map<const Eigen::MatrixXd>(raw.points.data(), d, static_cast<Eigen::Index>(raw.weights.size()));
    return out;
}

TapeSample sample(ad::Tape& tape, std::span<const ad::Var> theta, const ShapeSpec& spec, std::uint64_t seed) {
    spec.validate();
    if (theta.size() != spec.theta_size()) throw ConfigError("sample: theta size mismatch");
    std::mt19937_64 rng(seed);
    auto raw = sample_impl(TapeCtx{tape}, spec, theta, rng);
    return {std::move(raw.weights), std::move(raw.points), spec.point_dim()};
}

Eigen::MatrixXd perimeter_points(const ShapeSpec& single, std::span<const double> fractions) {
    single.validate();
    std::vector<double> pts;
    std::span<const double> th(single.theta);
    if (single.kind == Kind::CircleSet) {
        for (int c = 0; c < single.count; ++c)
            perimeter(DoubleCtx{}, Kind::CircleSet, th.subspan(3 * static_cast<std::size_t>(c), 3), fractions, pts);
    } else {
        perimeter(DoubleCtx{}, single.kind, th, fractions, pts);
    }
    return Eigen::Map<const Eigen::MatrixXd>(pts.data(), 2, static_cast<Eigen::Index>(pts.size() / 2));
}

double ellipse_arc_length(double a, double b, double t) { return EllipseArc(a, b).at(t)[0]; }

double sample_jacobian_check(const ShapeSpec& spec, std::uint64_t seed, double step) {
    spec.validate();
    ad::Tape tape;
    std::vector<ad::Var> th;
    for (double t : spec.theta) th.push_back(tape.variable(t));
    const auto s = sample(tape, th, spec, seed);
    std::vector<ad::Var> outputs = s.weights;
    outputs.insert(outputs.end(), s.points.begin(), s.points.end());

    const std::size_t P = th.size();
    Eigen::MatrixXd J_ad(static_cast<Eigen::Index>(outputs.size()), static_cast<Eigen::Index>(P));
    for (std::size_t r = 0; r < outputs.size(); ++r) {
        const auto g = tape.backward(outputs[r]);
        for (std::size_t k = 0; k < P; ++k) J_ad(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = g[th[k]];
    }

    auto flat = [&](const ShapeSpec& sp) {
        const auto w = sample(sp, seed);
        Eigen::VectorXd v(w.weights.size() + w.points.size());
        v << w.weights, Eigen::Map<const Eigen::VectorXd>(w.points.data(), w.points.size());
        return v;
    };
    double worst = 0.0;
    for (std::size_t k = 0; k < P; ++k) {
        auto hi = spec;
        auto lo = spec;
        hi.theta[k] += step;
        lo.theta[k] -= step;
        const Eigen::VectorXd fd = (flat(hi) - flat(lo)) / (2.0 * step);
        const double scale = fd.cwiseAbs().maxCoeff() + 1e-12;
        const double err = (J_ad.col(static_cast<Eigen::Index>(k)) - fd).cwiseAbs().maxCoeff() / scale;
        worst = std::max(worst, err);
    }
    return worst;
}

void randomize(ShapeSpec& spec, const Box& box, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double w = box.xmax - box.xmin;
    const double h = box.ymax - box.ymin;
    const double size = std::min(w, h);
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto cx = [&] { return uni(box.xmin + 0.2 * w, box.xmax - 0.2 * w); };
    auto cy = [&] { return uni(box.ymin + 0.2 * h, box.ymax - 0.2 * h); };
    auto& t = spec.theta;
    switch (spec.kind) {
        case Kind::PointSet: {
            const auto d = static_cast<std::size_t>(spec.dim);
            for (std::size_t c = 0; c < static_cast<std::size_t>(spec.count); ++c) {
                for (std::size_t i = 0; i < d; ++i) {
                    const bool is_x = i % 2 == 0;
                    t[c * d + i] = is_x ? uni(box.xmin, box.xmax) : uni(box.ymin, box.ymax);
                }
            }
            for (std::size_t k = static_cast<std::size_t>(spec.count) * d; k < t.size(); ++k) t[k] = 0.0;
            return;
        }
        case Kind::CircleSet:
            for (std::size_t c = 0; c < static_cast<std::size_t>(spec.count); ++c) {
                t[3 * c] = cx();
                t[3 * c + 1] = cy();
                t[3 * c + 2] = std::log(uni(0.05, 0.2) * size);
            }
            for (std::size_t k = 3 * static_cast<std::size_t>(spec.count); k < t.size(); ++k) t[k] = 0.0;
            return;
        case Kind::Ellipse:
            t = {cx(), cy(), std::log(uni(0.05, 0.2) * size), std::log(uni(0.05, 0.2) * size),
                 uni(0.0, std::numbers::pi)};
            return;
        case Kind::Triangle: {
            const double x = cx(), y = cy();
            const double phase = uni(0.0, kTwoPi);
            for (int v = 0; v < 3; ++v) {
                const double rho = uni(0.08, 0.2) * size;
                const double ang = phase + kTwoPi * v / 3.0 + uni(-0.3, 0.3);
                t[2 * v] = x + rho * std::cos(ang);
                t[2 * v + 1] = y + rho * std::sin(ang);
            }
            return;
        }
        case Kind::Composite: {
            t.clear();
            for (auto& c : spec.components) {
                randomize(c, box, rng());
                t.insert(t.end(), c.theta.begin(), c.theta.end());
            }
            t.resize(spec.theta_size(), 0.0);
            return;
        }
    }
}

void translate(ShapeSpec& spec, std::span<const double> offset) {
    auto& t = spec.theta;
    switch (spec.kind) {
        case Kind::PointSet: {
            const auto d = static_cast<std::size_t>(spec.dim);
            if (offset.size() != d) throw ConfigError("translate: offset dimension mismatch");
            for (std::size_t c = 0; c < static_cast<std::size_t>(spec.count); ++c)
                for (std::size_t i = 0; i < d; ++i) t[c * d + i] += offset[i];
            return;
        }
        case Kind::CircleSet:
            for (std::size_t c = 0; c < static_cast<std::size_t>(spec.count); ++c) {
                t[3 * c] += offset[0];
                t[3 * c + 1] += offset[1];
            }
            return;
        case Kind::Ellipse:
            t[0] += offset[0];
            t[1] += offset[1];
            return;
        case Kind::Triangle:
            for (int v = 0; v < 3; ++v) {
                t[2 * v] += offset[0];
                t[2 * v + 1] += offset[1];
            }
            return;
        case Kind::Composite: {
            std::size_t at = 0;
            for (auto& c : spec.components) {
                translate(c, offset);
                std::copy(c.theta.begin(), c.theta.end(), t.begin() + static_cast<std::ptrdiff_t>(at));
                at += c.theta_size();
            }
            return;
        }
    }
}

}  // namespace neemo::shapes
