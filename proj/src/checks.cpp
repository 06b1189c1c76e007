#include "neemo/checks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "neemo/autodiff.hpp"
#include "neemo/error.hpp"
#include "neemo/fitter.hpp"
#include "neemo/lipnet.hpp"
#include "neemo/shapes.hpp"

namespace neemo::checks {

namespace {

CheckResult finish(std::string name, double metric, double threshold, std::string detail) {
    return {std::move(name), metric <= threshold, metric, threshold, std::move(detail)};
}

lipnet::LipschitzMLP random_net(std::mt19937_64& rng, int input_dim, bool small) {
    static const lipnet::Projection kinds[] = {lipnet::Projection::Whole, lipnet::Projection::PerRow,
                                               lipnet::Projection::UnitRow};
    lipnet::Architecture arch;
    arch.input_dim = input_dim;
    const int g = small ? 2 : std::array{2, 4, 8}[rng() % 3];
    const int depth = 1 + static_cast<int>(rng() % (small ? 2 : 4));
    arch.hidden.assign(static_cast<std::size_t>(depth), small ? 8 : g * (1 + static_cast<int>(rng() % 4)) * 2);
    arch.group_size = g;
    arch.projection = kinds[rng() % 3];
    auto net = lipnet::LipschitzMLP::random(arch, rng());
    std::uniform_real_distribution<double> scale(0.5, 5.0), bias(-0.5, 0.5);
    for (auto& l : net.mutable_layers()) {
        l.W *= scale(rng);
        for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = bias(rng);
    }
    return net;
}

shapes::ShapeSpec random_shape(std::mt19937_64& rng, int which) {
    std::uniform_real_distribution<double> u(0.2, 0.8);
    shapes::ShapeSpec spec;
    switch (which % 4) {
        case 0:
            spec = shapes::ShapeSpec::circle_set({{u(rng), u(rng), 0.1 + 0.2 * u(rng)}, {u(rng), u(rng), 0.15}}, 7);
            break;
        case 1:
            spec = shapes::ShapeSpec::ellipse(u(rng), u(rng), 0.2 + 0.1 * u(rng), 0.1, 3.0 * u(rng), 9);
            break;
        case 2:
            spec = shapes::ShapeSpec::triangle({0.1, 0.1, 0.9, 0.2, 0.4, 0.8}, 11);
            break;
        default:
            spec = shapes::ShapeSpec::point_set({{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}}, true);
            break;
    }
    if (which % 4 != 0) shapes::randomize(spec, shapes::Box{0.2, 0.8, 0.2, 0.8}, rng());
    return spec;
}

}  // namespace

double brute_force_emd(const ot::DiscreteMeasure& P, const ot::DiscreteMeasure& Q) {
    const auto a = P.normalized().weights;
    const auto b = Q.normalized().weights;
    const auto C = ot::cost_matrix(P, Q);
    const Eigen::Index n = a.size(), m = b.size();
    if (n * m > 20) throw InputError("brute_force_emd: instance too large");
    const Eigen::Index cells = n * m, basis = n + m - 1;
    Eigen::VectorXd rhs(n + m);
    rhs << a, b;

    double best = std::numeric_limits<double>::infinity();
    std::vector<bool> pick(static_cast<std::size_t>(cells), false);
    std::fill(pick.begin(), pick.begin() + std::min(basis, cells), true);
    do {
        std::vector<Eigen::Index> S;
        for (Eigen::Index k = 0; k < cells; ++k)
            if (pick[static_cast<std::size_t>(k)]) S.push_back(k);
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + m, static_cast<Eigen::Index>(S.size()));
        for (std::size_t c = 0; c < S.size(); ++c) {
            A(S[c] / m, static_cast<Eigen::Index>(c)) = 1.0;
            A(n + S[c] % m, static_cast<Eigen::Index>(c)) = 1.0;
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
        if (qr.rank() < static_cast<Eigen::Index>(S.size())) continue;
        const Eigen::VectorXd x = qr.solve(rhs);
        if ((A * x - rhs).cwiseAbs().maxCoeff() > 1e-10 || x.minCoeff() < -1e-12) continue;
        double cost = 0.0;
        for (std::size_t c = 0; c < S.size(); ++c) cost += x[static_cast<Eigen::Index>(c)] * C(S[c] / m, S[c] % m);
        best = std::min(best, cost);
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return best;
}

ot::DiscreteMeasure random_measure(int n, int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> x(0.0, 1.0), w(0.1, 1.0);
    ot::DiscreteMeasure M(Eigen::VectorXd(n), Eigen::MatrixXd(d, n));
    for (int i = 0; i < n; ++i) {
        M.weights[i] = w(rng);
        for (int k = 0; k < d; ++k) M.points(k, i) = x(rng);
    }
    return M.normalized();
}

CheckResult lipschitz_suite(int networks, std::size_t pairs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int k = 0; k < networks; ++k) {
        const auto net = random_net(rng, 2, false);
        worst = std::max(worst, lipnet::lipschitz_ratio_check(net, pairs, rng(), -1.0, 1.0));
    }
    std::ostringstream d;
    d << networks << " networks x " << pairs << " pairs";
    return finish("lipschitz", worst, 1.0 + 1e-6, d.str());
}

CheckResult gradient_suite(int configs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0), s(-1.0, 1.0);
    constexpr double step = 1e-5;
    double worst_params = 0.0, worst_shape = 0.0, worst_inputs = 0.0;
    for (int c = 0; c < configs; ++c) {
        const auto net = random_net(rng, 2, true);
        const auto event = random_measure(5, 2, rng());
        const auto spec = random_shape(rng, c);
        const auto np = net.num_parameters();

        // Network parameters: a randomly seeded sum of outputs keeps every coordinate non-degenerate.
        Eigen::VectorXd seeds(event.size());
        for (Eigen::Index i = 0; i < seeds.size(); ++i) seeds[i] = s(rng);
        ad::ExpressionBuilder by_params = [&](ad::Tape& tape, std::span<const ad::Var> p) {
            ad::Var total = tape.constant(0.0);
            std::vector<ad::Var> x(2);
            for (Eigen::Index i = 0; i < event.size(); ++i) {
                x[0] = tape.constant(event.points(0, i));
                x[1] = tape.constant(event.points(1, i));
                total += seeds[i] * net.forward(tape, p, x);
            }
            return total;
        };
        worst_params = std::max(worst_params, ad::finite_diff_check(by_params, net.parameter_vector(), step));

        // Shape parameters and event points through the dual objective. The sample
        // terms carry random factors: on a locally affine potential the symmetric
        // circle grid makes the radius gradient vanish exactly.
        std::vector<double> sample_seeds(spec.num_points());
        for (auto& v : sample_seeds) v = 0.5 + u(rng);
        std::vector<double> params = net.parameter_vector();
        std::vector<double> point(spec.theta);
        for (Eigen::Index i = 0; i < event.size(); ++i) {
            point.push_back(event.points(0, i));
            point.push_back(event.points(1, i));
        }
        auto objective = [&](bool theta_leaves) {
            return [&, theta_leaves](ad::Tape& tape, std::span<const ad::Var> v) {
                std::vector<ad::Var> p;
                p.reserve(np);
                for (double w : params) p.push_back(tape.constant(w));
                std::vector<ad::Var> th;
                for (std::size_t k = 0; k < spec.theta.size(); ++k)
                    th.push_back(theta_leaves ? v[k] : tape.constant(spec.theta[k]));
                const auto sample = shapes::sample(tape, th, spec);
                ad::Var total = tape.constant(0.0);
                for (Eigen::Index i = 0; i < event.size(); ++i) {
                    std::vector<ad::Var> x;
                    for (std::size_t k = 0; k < 2; ++k) {
                        const auto idx = spec.theta.size() + 2 * static_cast<std::size_t>(i) + k;
                        x.push_back(theta_leaves ? tape.constant(point[idx]) : v[idx - spec.theta.size()]);
                    }
                    total += event.weights[i] * net.forward(tape, p, x);
                }
                for (std::size_t j = 0; j < sample.weights.size(); ++j)
                    total -= sample_seeds[j] * sample.weights[j] * net.forward(tape, p, std::span<const ad::Var>(sample.points).subspan(2 * j, 2));
                return total;
            };
        };
        const std::vector<double> inputs(point.begin() + static_cast<std::ptrdiff_t>(spec.theta.size()), point.end());
        worst_shape = std::max(worst_shape, ad::finite_diff_check(objective(true), spec.theta, step));
        worst_inputs = std::max(worst_inputs, ad::finite_diff_check(objective(false), inputs, step));
        worst_shape = std::max(worst_shape, shapes::sample_jacobian_check(spec, 0, step));
    }
    std::ostringstream d;
    d << "params " << worst_params << ", shape " << worst_shape << ", inputs " << worst_inputs;
    return finish("gradients", std::max({worst_params, worst_shape, worst_inputs}), 1e-4, d.str());
}

CheckResult oracle_suite(int cases, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int k = 0; k < cases; ++k) {
        const int n = 1 + static_cast<int>(rng() % 4), m = 1 + static_cast<int>(rng() % 4);
        const auto P = random_measure(n, 2, rng());
        const auto Q = random_measure(m, 2, rng());
        worst = std::max(worst, std::abs(ot::exact_emd(P, Q).cost - brute_force_emd(P, Q)));

        const auto A = random_measure(8, 1, rng());
        const auto B = random_measure(6, 1, rng());
        worst = std::max(worst, std::abs(ot::exact_emd(A, B).cost - ot::emd_1d(A, B)));

        const auto X = random_measure(6, 2, rng());
        const auto Y = random_measure(7, 2, rng());
        const auto Z = random_measure(5, 2, rng());
        const double xy = ot::exact_emd(X, Y).cost;
        worst = std::max(worst, std::abs(xy - ot::exact_emd(Y, X).cost));
        worst = std::max(worst, xy - ot::exact_emd(X, Z).cost - ot::exact_emd(Z, Y).cost);
    }
    std::ostringstream d;
    d << cases << " cases: brute force, 1D CDF, symmetry, triangle";
    return finish("oracle", worst, 1e-8, d.str());
}

CheckResult duality_suite(int instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < instances; ++k) {
        const int n = 2 + static_cast<int>(rng() % 29), m = 2 + static_cast<int>(rng() % 29);
        const auto P = random_measure(n, 2, rng());
        const auto Q = random_measure(m, 2, rng());
        const double exact = ot::exact_emd(P, Q).cost;
        const shapes::WeightedSample sample{Q.weights, Q.points};
        for (int t = 0; t < 5; ++t) {
            const auto net = random_net(rng, 2, false);
            const double dual = fit::kr_objective(net, P, sample);
            worst = std::max({worst, dual - exact, -dual - exact});
        }
    }
    std::ostringstream d;
    d << instances << " instances x 5 potentials (and their negations)";
    return finish("duality", worst, 1e-6, d.str());
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"lipschitz", "gradients", "oracle", "duality"};
    return names;
}

CheckResult run_suite(const std::string& name, std::uint64_t seed) {
    if (name == "lipschitz") return lipschitz_suite(5, 10000, seed);
    if (name == "gradients") return gradient_suite(5, seed);
    if (name == "oracle") return oracle_suite(20, seed);
    if (name == "duality") return duality_suite(20, seed);
    throw ConfigError("unknown check suite '" + name + "'");
}

}  // namespace neemo::checks
