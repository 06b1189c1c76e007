#include "neemo/fitter.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace neemo::fit {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

Eigen::MatrixXd concat_points(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd X(a.rows(), a.cols() + b.cols());
    X << a, b;
    return X;
}

void check_dims(const ot::DiscreteMeasure& event, const Eigen::MatrixXd& sample_points, int net_dim) {
    if (event.dim() != sample_points.rows())
        throw InputError("kr_objective: event points have dimension " + std::to_string(event.dim()) +
                         " but sample points have dimension " + std::to_string(sample_points.rows()));
    if (event.dim() != net_dim) throw InputError("kr_objective: network input dimension does not match the points");
}

// One ascent step on phi. Returns the objective value before the step.
double inner_step(lipnet::LipschitzMLP& net, Adam& adam, const Eigen::MatrixXd& X, const Eigen::VectorXd& seed) {
    const auto g = net.backward_batch(X, seed, true);
    const double value = g.values.dot(seed);
    adam.next_step();
    auto& layers = net.mutable_layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        adam.update(2 * l, layers[l].W.data(), g.params[l].W.data(), static_cast<std::size_t>(layers[l].W.size()), true);
        adam.update(2 * l + 1, layers[l].b.data(), g.params[l].b.data(), static_cast<std::size_t>(layers[l].b.size()),
                    true);
    }
    return value;
}

struct InnerProblem {
    Eigen::MatrixXd X;
    Eigen::VectorXd seed;
};

InnerProblem exact_problem(const ot::DiscreteMeasure& event, const shapes::WeightedSample& sample) {
    InnerProblem p;
    p.X = concat_points(event.points, sample.points);
    p.seed.resize(event.size() + sample.weights.size());
    p.seed << event.weights, -sample.weights;
    return p;
}

// Minibatch drawn with probabilities given by the weights; empirical means.
InnerProblem minibatch_problem(const ot::DiscreteMeasure& event, const shapes::WeightedSample& sample,
                               std::size_t batch, std::mt19937_64& rng) {
    std::discrete_distribution<Eigen::Index> pe(event.weights.data(), event.weights.data() + event.weights.size());
    std::discrete_distribution<Eigen::Index> ps(sample.weights.data(), sample.weights.data() + sample.weights.size());
    const auto B = static_cast<Eigen::Index>(batch);
    InnerProblem p;
    p.X.resize(event.dim(), 2 * B);
    p.seed.resize(2 * B);
    for (Eigen::Index k = 0; k < B; ++k) {
        p.X.col(k) = event.points.col(pe(rng));
        p.X.col(B + k) = sample.points.col(ps(rng));
        p.seed(k) = 1.0 / static_cast<double>(B);
        p.seed(B + k) = -1.0 / static_cast<double>(B);
    }
    return p;
}

}  // namespace

Eigen::MatrixXd GridSpec::points() const {
    Eigen::MatrixXd P(2, static_cast<Eigen::Index>(nx) * ny);
    const double dx = (xmax - xmin) / nx;
    const double dy = (ymax - ymin) / ny;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const auto k = static_cast<Eigen::Index>(j) * nx + i;
            P(0, k) = xmin + (i + 0.5) * dx;
            P(1, k) = ymin + (j + 0.5) * dy;
        }
    return P;
}

void FitConfig::validate() const {
    arch.validate();
    if (inner_steps_per_outer < 1 || outer_steps < 1 || warmup_inner_steps < 1 || refit_inner_steps < 1 ||
        estimate_steps < 1 || batch_size < 1)
        throw ConfigError("fit config: all step counts and the batch size must be >= 1");
    if (!(inner_lr > 0.0) || !(outer_lr > 0.0)) throw ConfigError("fit config: learning rates must be positive");
    if (!(outer_lr_final_fraction > 0.0) || outer_lr_final_fraction > 1.0)
        throw ConfigError("fit config: outer_lr_final_fraction must be in (0, 1]");
    if (!(inner_lr_final_fraction > 0.0) || inner_lr_final_fraction > 1.0)
        throw ConfigError("fit config: inner_lr_final_fraction must be in (0, 1]");
    if (heatmap.nx < 1 || heatmap.ny < 1) throw ConfigError("fit config: heatmap resolution must be >= 1");
    if (!(divergence_threshold > 0.0)) throw ConfigError("fit config: divergence_threshold must be positive");
}

void Adam::update(std::size_t block, double* params, const double* grad, std::size_t n, bool ascend) {
    if (block >= m_.size()) {
        m_.resize(block + 1);
        v_.resize(block + 1);
    }
    if (m_[block].size() != static_cast<Eigen::Index>(n)) {
        m_[block] = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(n));
        v_[block] = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(n));
    }
    const auto t = static_cast<double>(std::max<std::size_t>(t_, 1));
    const double c1 = 1.0 - std::pow(beta1_, t);
    const double c2 = 1.0 - std::pow(beta2_, t);
    const Eigen::Map<const Eigen::ArrayXd> g(grad, static_cast<Eigen::Index>(n));
    Eigen::Map<Eigen::ArrayXd> p(params, static_cast<Eigen::Index>(n));
    m_[block] = beta1_ * m_[block] + (1.0 - beta1_) * g;
    v_[block] = beta2_ * v_[block] + (1.0 - beta2_) * g.square();
    const Eigen::ArrayXd step = lr_ * (m_[block] / c1) / ((v_[block] / c2).sqrt() + eps_);
    if (ascend) {
        p += step;
    } else {
        p -= step;
    }
}

double kr_objective(const lipnet::LipschitzMLP& net, const ot::DiscreteMeasure& event,
                    const shapes::WeightedSample& sample) {
    check_dims(event, sample.points, net.input_dim());
    const auto f_event = net.forward_batch(event.points);
    const auto f_sample = net.forward_batch(sample.points);
    return event.weights.dot(f_event) - sample.weights.dot(f_sample);
}

ad::Var kr_objective(ad::Tape& tape, const lipnet::LipschitzMLP& net, std::span<const ad::Var> net_params,
                     const ot::DiscreteMeasure& event, const shapes::TapeSample& sample) {
    if (event.dim() != sample.dim) throw InputError("kr_objective: event and sample dimensions differ");
    const auto d = static_cast<std::size_t>(sample.dim);
    ad::Var total = tape.constant(0.0);
    std::vector<ad::Var> x(d);
    for (Eigen::Index i = 0; i < event.size(); ++i) {
        for (std::size_t k = 0; k < d; ++k) x[k] = tape.constant(event.points(static_cast<Eigen::Index>(k), i));
        total = total + event.weights(i) * net.forward(tape, net_params, x);
    }
    for (std::size_t j = 0; j < sample.weights.size(); ++j) {
        std::span<const ad::Var> y(sample.points.data() + j * d, d);
        total = total - sample.weights[j] * net.forward(tape, net_params, y);
    }
    return total;
}

KrGradient kr_gradient(const lipnet::LipschitzMLP& net, const ot::DiscreteMeasure& event,
                       const shapes::WeightedSample& sample, bool want_params) {
    check_dims(event, sample.points, net.input_dim());
    const auto problem = exact_problem(event, sample);
    auto g = net.backward_batch(problem.X, problem.seed, want_params);
    KrGradient out;
    out.value = g.values.dot(problem.seed);
    out.params = std::move(g.params);
    const auto m = sample.weights.size();
    out.sample_points = g.inputs.rightCols(m);
    out.sample_weights = -g.values.tail(m);
    return out;
}

EmdEstimate estimate_emd(const ot::DiscreteMeasure& event, const shapes::WeightedSample& sample,
                         lipnet::LipschitzMLP net, const FitConfig& config) {
    config.validate();
    auto Q = event.normalized();
    check_dims(Q, sample.points, net.input_dim());
    // The potential sees coordinates relative to the event centroid.
    EmdEstimate out;
    out.origin = Q.points * Q.weights;
    Q.points.colwise() -= out.origin;
    auto centered = sample;
    centered.points.colwise() -= out.origin;
    const auto exact = exact_problem(Q, centered);
    std::mt19937_64 rng(config.seed ^ 0x5eed5eedULL);
    Adam adam(config.inner_lr);
    out.history.reserve(config.estimate_steps + 1);
    double best = -std::numeric_limits<double>::infinity();
    auto record = [&](double value, std::size_t step) {
        if (!std::isfinite(value))
            throw NumericalError("estimate_emd: non-finite objective at step " + std::to_string(step));
        out.history.push_back(value);
        if (value > best) {
            best = value;
            out.net = net;
        }
    };
    for (std::size_t step = 0; step < config.estimate_steps; ++step) {
        adam.set_lr(config.inner_lr * std::pow(config.inner_lr_final_fraction,
                                               static_cast<double>(step) / static_cast<double>(config.estimate_steps)));
        if (config.stochastic) {
            record(net.forward_batch(exact.X).dot(exact.seed), step);
            const auto mb = minibatch_problem(Q, centered, config.batch_size, rng);
            inner_step(net, adam, mb.X, mb.seed);
        } else {
            // inner_step evaluates the objective before moving phi
            const auto before = net;
            const double value = inner_step(net, adam, exact.X, exact.seed);
            if (!std::isfinite(value))
                throw NumericalError("estimate_emd: non-finite objective at step " + std::to_string(step));
            out.history.push_back(value);
            if (value > best) {
                best = value;
                out.net = before;
            }
        }
    }
    record(net.forward_batch(exact.X).dot(exact.seed), config.estimate_steps);
    out.emd = best;
    return out;
}

FitTrace fit(const events::Event& event, const shapes::ShapeSpec& init, const FitConfig& config) {
    config.validate();
    event.validate();
    init.validate();
    if (event.dim() != init.point_dim()) throw InputError("fit: event and shape dimensions differ");

    // Work in a frame centered on the event's weighted centroid.
    auto Q = events::normalize(event);
    const Eigen::VectorXd origin = Q.points * Q.weights;
    Q.points.colwise() -= origin;
    // theta stays in the event frame; samples are shifted like the event points.
    auto spec = init;

    auto arch = config.arch;
    arch.input_dim = static_cast<int>(event.dim());
    auto net = lipnet::LipschitzMLP::random(arch, config.seed);
    // Start from the zero potential: the output layer is zero, so f == 0.
    net.mutable_layers().back().W.setZero();

    Adam inner(config.inner_lr);
    Adam outer(config.outer_lr);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    FitTrace trace;
    trace.origin = origin;
    std::uint64_t sample_seed = config.seed;
    auto draw = [&] {
        auto s = shapes::sample(spec, spec.stochastic ? sample_seed++ : config.seed);
        s.points.colwise() -= origin;
        return s;
    };

    // Returns the exact objective before the step, also in stochastic mode.
    std::size_t inner_count = 0;
    auto run_inner = [&](const shapes::WeightedSample& s, const InnerProblem& exact) {
        double value;
        if (config.stochastic) {
            value = net.forward_batch(exact.X).dot(exact.seed);
            const auto mb = minibatch_problem(Q, s, config.batch_size, rng);
            inner_step(net, inner, mb.X, mb.seed);
        } else {
            value = inner_step(net, inner, exact.X, exact.seed);
        }
        if (!std::isfinite(value) || std::abs(value) > config.divergence_threshold) {
            trace.final_theta = spec.theta;
            trace.final_net = net;
            throw FitDivergence("fit: inner objective diverged at inner step " + std::to_string(inner_count) + " (" +
                                    std::to_string(value) + ")",
                                trace);
        }
        ++inner_count;
        return value;
    };

    auto snapshot = [&](std::size_t step, const shapes::WeightedSample& s) {
        Snapshot snap;
        snap.step = step;
        snap.theta = spec.theta;
        snap.heatmap = potential_heatmap(net, config.heatmap, origin);
        snap.sample_points = s.points.colwise() + origin;
        snap.forces = theta_forces(net, s);
        trace.snapshots.push_back(std::move(snap));
    };

    {
        const auto s = draw();
        const auto p = exact_problem(Q, s);
        for (std::size_t k = 0; k < config.warmup_inner_steps; ++k) run_inner(s, p);
    }

    std::vector<std::vector<double>> recent;
    for (std::size_t step = 0; step < config.outer_steps; ++step) {
        const auto s = draw();
        const auto p = exact_problem(Q, s);
        for (std::size_t k = 0; k < config.inner_steps_per_outer; ++k) run_inner(s, p);

        const auto g = kr_gradient(net, Q, s, false);
        if (!std::isfinite(g.value) || std::abs(g.value) > config.divergence_threshold) {
            trace.final_theta = spec.theta;
            trace.final_net = net;
            throw FitDivergence("fit: objective diverged at outer step " + std::to_string(step), trace);
        }

        // Chain d(objective)/d(points, weights) through the sampler.
        ad::Tape tape;
        std::vector<ad::Var> th;
        th.reserve(spec.theta.size());
        for (double t : spec.theta) th.push_back(tape.variable(t));
        const auto ts = shapes::sample(tape, th, spec, spec.stochastic ? sample_seed - 1 : config.seed);
        const auto d = static_cast<std::size_t>(ts.dim);
        ad::Var L = tape.constant(0.0);
        for (std::size_t j = 0; j < ts.weights.size(); ++j) {
            for (std::size_t i = 0; i < d; ++i)
                L = L + g.sample_points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * ts.points[j * d + i];
            L = L + g.sample_weights(static_cast<Eigen::Index>(j)) * ts.weights[j];
        }
        const auto grads = tape.backward(L);
        std::vector<double> grad(th.size());
        double norm2 = 0.0;
        for (std::size_t k = 0; k < th.size(); ++k) {
            grad[k] = grads[th[k]];
            norm2 += grad[k] * grad[k];
        }

        trace.records.push_back({step, spec.theta, g.value, std::sqrt(norm2)});
        if (config.snapshot_every > 0 && step % config.snapshot_every == 0) snapshot(step, s);

        const double progress = static_cast<double>(step) / static_cast<double>(config.outer_steps);
        outer.set_lr(config.outer_lr * (1.0 - (1.0 - config.outer_lr_final_fraction) * progress));
        outer.next_step();
        auto theta = spec.theta;
        outer.update(0, theta.data(), grad.data(), theta.size(), false);
        spec.set_theta(std::move(theta));
        trace.outer_steps_run = step + 1;

        if (config.convergence_tol > 0.0) {
            recent.push_back(spec.theta);
            if (recent.size() > 10) recent.erase(recent.begin());
            if (recent.size() == 10) {
                double move = 0.0;
                for (std::size_t k = 0; k < spec.theta.size(); ++k)
                    move = std::max(move, std::abs(recent.back()[k] - recent.front()[k]));
                if (move < config.convergence_tol) {
                    trace.converged_early = true;
                    break;
                }
            }
        }
    }

    const auto s = draw();
    const auto p = exact_problem(Q, s);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < config.refit_inner_steps; ++k) {
        const double value = run_inner(s, p);
        trace.refit_history.push_back(value);
        best = std::max(best, value);
    }
    const double last = net.forward_batch(p.X).dot(p.seed);
    trace.refit_history.push_back(last);
    best = std::max(best, last);

    trace.final_observable = best;
    trace.final_theta = spec.theta;
    snapshot(trace.outer_steps_run, s);
    trace.final_net = std::move(net);
    return trace;
}

std::vector<double> potential_heatmap(const lipnet::LipschitzMLP& net, const GridSpec& grid,
                                      const Eigen::VectorXd& origin) {
    Eigen::MatrixXd P = grid.points();
    if (origin.size() == P.rows()) P.colwise() -= origin;
    const Eigen::VectorXd f = net.forward_batch(P);
    return {f.data(), f.data() + f.size()};
}

Eigen::MatrixXd theta_forces(const lipnet::LipschitzMLP& net, const shapes::WeightedSample& sample) {
    return net.backward_batch(sample.points, sample.weights, false).inputs;
}

std::string heatmap_to_text(const GridSpec& grid, const std::vector<double>& values) {
    if (values.size() != static_cast<std::size_t>(grid.nx) * static_cast<std::size_t>(grid.ny))
        throw InputError("heatmap: value count does not match the grid");
    std::string out = "# neemo-heatmap v1\n";
    out += "nx " + std::to_string(grid.nx) + " ny " + std::to_string(grid.ny) + "\n";
    out += "bounds " + fmt_double(grid.xmin) + " " + fmt_double(grid.xmax) + " " + fmt_double(grid.ymin) + " " +
           fmt_double(grid.ymax) + "\n";
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            if (i > 0) out += ' ';
            out += fmt_double(values[static_cast<std::size_t>(j) * static_cast<std::size_t>(grid.nx) +
                                     static_cast<std::size_t>(i)]);
        }
        out += '\n';
    }
    return out;
}

std::pair<GridSpec, std::vector<double>> heatmap_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "# neemo-heatmap v1") throw ParseError("heatmap: bad header", 1);
    GridSpec g;
    std::string k1, k2, kb;
    if (!(in >> k1 >> g.nx >> k2 >> g.ny) || k1 != "nx" || k2 != "ny") throw ParseError("heatmap: bad size line", 2);
    if (!(in >> kb >> g.xmin >> g.xmax >> g.ymin >> g.ymax) || kb != "bounds")
        throw ParseError("heatmap: bad bounds line", 3);
    std::vector<double> values;
    double v;
    while (in >> v) values.push_back(v);
    if (values.size() != static_cast<std::size_t>(g.nx) * static_cast<std::size_t>(g.ny))
        throw ParseError("heatmap: expected " + std::to_string(g.nx * g.ny) + " values", 0);
    return {g, values};
}

void save_heatmap(const std::filesystem::path& path, const GridSpec& grid, const std::vector<double>& values) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << heatmap_to_text(grid, values);
}

std::string trace_to_jsonl(const FitTrace& trace) {
    std::string out;
    for (const auto& r : trace.records) {
        nlohmann::json j;
        j["step"] = r.step;
        j["theta"] = r.theta;
        j["emd"] = r.emd_estimate;
        j["grad_norm"] = r.grad_norm_theta;
        out += j.dump() + "\n";
    }
    nlohmann::json fin;
    fin["final"] = true;
    fin["theta"] = trace.final_theta;
    fin["observable"] = trace.final_observable;
    fin["outer_steps_run"] = trace.outer_steps_run;
    out += fin.dump() + "\n";
    return out;
}

namespace {

using Setter = std::function<void(FitConfig&, const std::string&)>;

std::size_t to_count(const std::string& v) {
    std::size_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw ConfigError("expected a count, got '" + v + "'");
    return out;
}

double to_real(const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("expected a boolean, got '" + v + "'");
}

std::vector<double> to_reals(const std::string& v) {
    std::vector<double> out;
    std::istringstream ss(v);
    std::string tok;
    while (ss >> tok) {
        if (tok.back() == ',') tok.pop_back();
        if (!tok.empty()) out.push_back(to_real(tok));
    }
    return out;
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"hidden", [](FitConfig& c, const std::string& v) {
             c.arch.hidden.clear();
             for (double w : to_reals(v)) c.arch.hidden.push_back(static_cast<int>(w));
         }},
        {"group_size", [](FitConfig& c, const std::string& v) { c.arch.group_size = static_cast<int>(to_count(v)); }},
        {"input_norm", [](FitConfig& c, const std::string& v) { c.arch.input_norm = lipnet::parse_norm(v); }},
        {"projection", [](FitConfig& c, const std::string& v) {
             c.arch.projection = lipnet::parse_projection(v);
         }},
        {"inner_steps_per_outer", [](FitConfig& c, const std::string& v) { c.inner_steps_per_outer = to_count(v); }},
        {"inner_lr", [](FitConfig& c, const std::string& v) { c.inner_lr = to_real(v); }},
        {"outer_lr", [](FitConfig& c, const std::string& v) { c.outer_lr = to_real(v); }},
        {"outer_steps", [](FitConfig& c, const std::string& v) { c.outer_steps = to_count(v); }},
        {"warmup_inner_steps", [](FitConfig& c, const std::string& v) { c.warmup_inner_steps = to_count(v); }},
        {"refit_inner_steps", [](FitConfig& c, const std::string& v) { c.refit_inner_steps = to_count(v); }},
        {"estimate_steps", [](FitConfig& c, const std::string& v) { c.estimate_steps = to_count(v); }},
        {"outer_lr_final_fraction", [](FitConfig& c, const std::string& v) { c.outer_lr_final_fraction = to_real(v); }},
        {"inner_lr_final_fraction", [](FitConfig& c, const std::string& v) { c.inner_lr_final_fraction = to_real(v); }},
        {"stochastic", [](FitConfig& c, const std::string& v) { c.stochastic = to_bool(v); }},
        {"batch_size", [](FitConfig& c, const std::string& v) { c.batch_size = to_count(v); }},
        {"seed", [](FitConfig& c, const std::string& v) { c.seed = to_count(v); }},
        {"convergence_tol", [](FitConfig& c, const std::string& v) { c.convergence_tol = to_real(v); }},
        {"heatmap_nx", [](FitConfig& c, const std::string& v) { c.heatmap.nx = static_cast<int>(to_count(v)); }},
        {"heatmap_ny", [](FitConfig& c, const std::string& v) { c.heatmap.ny = static_cast<int>(to_count(v)); }},
        {"heatmap_bounds", [](FitConfig& c, const std::string& v) {
             const auto b = to_reals(v);
             if (b.size() != 4) throw ConfigError("heatmap_bounds needs xmin xmax ymin ymax");
             c.heatmap.xmin = b[0];
             c.heatmap.xmax = b[1];
             c.heatmap.ymin = b[2];
             c.heatmap.ymax = b[3];
         }},
        {"snapshot_every", [](FitConfig& c, const std::string& v) { c.snapshot_every = to_count(v); }},
        {"divergence_threshold", [](FitConfig& c, const std::string& v) { c.divergence_threshold = to_real(v); }},
    };
    return table;
}

}  // namespace

FitConfig parse_config(const std::string& text, FitConfig base) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
        };
        if (trim(line).empty()) continue;
        if (eq == std::string::npos) throw ParseError("config: expected 'key = value'", lineno);
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        try {
            it->second(base, value);
        } catch (const ConfigError& e) {
            throw ParseError(std::string("config: ") + key + ": " + e.what(), lineno);
        }
    }
    base.validate();
    return base;
}

FitConfig load_config(const std::filesystem::path& path, FitConfig base) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

std::string config_to_text(const FitConfig& c) {
    std::string hidden;
    for (std::size_t k = 0; k < c.arch.hidden.size(); ++k) hidden += (k ? ", " : "") + std::to_string(c.arch.hidden[k]);
    std::ostringstream out;
    out << "hidden = " << hidden << "\n"
        << "group_size = " << c.arch.group_size << "\n"
        << "input_norm = " << lipnet::to_string(c.arch.input_norm) << "\n"
        << "projection = " << lipnet::to_string(c.arch.projection) << "\n"
        << "inner_steps_per_outer = " << c.inner_steps_per_outer << "\n"
        << "inner_lr = " << fmt_double(c.inner_lr) << "\n"
        << "outer_lr = " << fmt_double(c.outer_lr) << "\n"
        << "outer_steps = " << c.outer_steps << "\n"
        << "warmup_inner_steps = " << c.warmup_inner_steps << "\n"
        << "refit_inner_steps = " << c.refit_inner_steps << "\n"
        << "estimate_steps = " << c.estimate_steps << "\n"
        << "outer_lr_final_fraction = " << fmt_double(c.outer_lr_final_fraction) << "\n"
        << "inner_lr_final_fraction = " << fmt_double(c.inner_lr_final_fraction) << "\n"
        << "stochastic = " << (c.stochastic ? "true" : "false") << "\n"
        << "batch_size = " << c.batch_size << "\n"
        << "seed = " << c.seed << "\n"
        << "convergence_tol = " << fmt_double(c.convergence_tol) << "\n"
        << "heatmap_nx = " << c.heatmap.nx << "\n"
        << "heatmap_ny = " << c.heatmap.ny << "\n"
        << "heatmap_bounds = " << fmt_double(c.heatmap.xmin) << " " << fmt_double(c.heatmap.xmax) << " "
        << fmt_double(c.heatmap.ymin) << " " << fmt_double(c.heatmap.ymax) << "\n"
        << "snapshot_every = " << c.snapshot_every << "\n"
        << "divergence_threshold = " << fmt_double(c.divergence_threshold) << "\n";
    return out.str();
}

}  // namespace neemo::fit
