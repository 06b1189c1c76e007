#include "neemo/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "neemo/ot.hpp"

namespace neemo::exp {

namespace {

double final_exact_emd(const events::Event& event, const shapes::ShapeSpec& init, const std::vector<double>& theta) {
    auto spec = init;
    spec.set_theta(theta);
    return ot::exact_emd(events::normalize(event), shapes::sample(spec).measure()).cost;
}

void set_stochastic(shapes::ShapeSpec& spec, bool on) {
    spec.stochastic = on;
    for (auto& c : spec.components) set_stochastic(c, on);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                      static_cast<std::uint32_t>(b >> 32)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

std::pair<double, double> circle_recovery(const std::vector<double>& theta,
                                          const std::vector<std::array<double, 3>>& truth) {
    const std::size_t k = truth.size();
    if (theta.size() < 3 * k) throw InputError("circle_recovery: theta too short");
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    double best_c = std::numeric_limits<double>::infinity();
    double best_r = std::numeric_limits<double>::infinity();
    do {
        double wc = 0.0, wr = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const auto& t = truth[perm[i]];
            wc = std::max(wc, std::hypot(theta[3 * i] - t[0], theta[3 * i + 1] - t[1]));
            wr = std::max(wr, std::abs(std::exp(theta[3 * i + 2]) - t[2]));
        }
        if (std::max(wc, wr) < std::max(best_c, best_r)) {
            best_c = wc;
            best_r = wr;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return {best_c, best_r};
}

namespace {

ShapeFitResult fit_with_restarts(std::uint64_t seed, const events::Event& event, const shapes::ShapeSpec& structure,
                                 const fit::FitConfig& config, const ShapeFitOptions& options) {
    if (options.restarts < 1) throw ConfigError("restarts must be >= 1");
    ShapeFitResult best;
    for (int k = 0; k < options.restarts; ++k) {
        const auto salt = 100 * static_cast<std::uint64_t>(k);
        ShapeFitResult r;
        r.event = event;
        r.init = structure;
        shapes::randomize(r.init, shapes::Box{}, mix(seed, 2 + salt));
        set_stochastic(r.init, options.stochastic_shape);
        auto cfg = config;
        cfg.seed = mix(seed, 3 + salt);
        r.trace = fit::fit(r.event, r.init, cfg);
        r.restart = k;
        if (k == 0 || r.trace.final_observable < best.trace.final_observable) best = std::move(r);
        if (options.accept_observable > 0.0 && best.trace.final_observable <= options.accept_observable) break;
    }
    best.exact_emd = final_exact_emd(best.event, best.init, best.trace.final_theta);
    return best;
}

}  // namespace

ShapeFitResult three_circle_fit(std::uint64_t seed, const fit::FitConfig& config, const ShapeFitOptions& options) {
    const auto truth = events::three_circle_layout();
    const auto event = events::gen_circle_event(truth, options.points_per_component, 0.0, mix(seed, 1));
    auto r = fit_with_restarts(seed, event, shapes::ShapeSpec::circle_set(truth, options.samples), config, options);
    std::tie(r.center_error, r.size_error) = circle_recovery(r.trace.final_theta, truth);
    return r;
}

ShapeFitResult triangle_ellipse_fit(std::uint64_t seed, const fit::FitConfig& config, const ShapeFitOptions& options) {
    const auto layout = events::triangle_ellipse_layout();
    const auto event = events::gen_triangle_ellipse_event(layout, options.points_per_component, mix(seed, 1));
    const auto structure = shapes::ShapeSpec::composite(
        {shapes::ShapeSpec::triangle(layout.triangle, options.samples),
         shapes::ShapeSpec::ellipse(layout.cx, layout.cy, layout.a, layout.b, layout.rotation, options.samples)});
    return fit_with_restarts(seed, event, structure, config, options);
}

shapes::ShapeSpec subjet_init(const events::Event& event, int n, CenterInit init, bool learned_weights,
                              const shapes::Box& box, std::uint64_t seed) {
    if (n < 1) throw ConfigError("subjet_init: need at least one center");
    const auto d = event.dim();
    std::vector<std::vector<double>> centers(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(d)));
    auto spec = shapes::ShapeSpec::point_set(centers, learned_weights);
    if (init == CenterInit::Box) {
        shapes::randomize(spec, box, seed);
        return spec;
    }
    // D^2 seeding on the particles, weighted by energy.
    std::mt19937_64 rng(seed);
    const auto np = event.size();
    Eigen::VectorXd dist2 = Eigen::VectorXd::Constant(np, std::numeric_limits<double>::infinity());
    Eigen::Index pick = std::discrete_distribution<Eigen::Index>(event.energies.data(),
                                                                 event.energies.data() + np)(rng);
    for (int c = 0; c < n; ++c) {
        for (Eigen::Index i = 0; i < d; ++i) spec.theta[static_cast<std::size_t>(c * d + i)] = event.positions(i, pick);
        dist2 = dist2.cwiseMin((event.positions.colwise() - event.positions.col(pick)).colwise().squaredNorm().transpose());
        const Eigen::VectorXd p = dist2.cwiseProduct(event.energies);
        if (c + 1 < n) {
            if (p.sum() > 0.0) {
                pick = std::discrete_distribution<Eigen::Index>(p.data(), p.data() + np)(rng);
            } else {
                pick = std::uniform_int_distribution<Eigen::Index>(0, np - 1)(rng);
            }
        }
    }
    return spec;
}

std::vector<SubjetCell> run_subjet_study(const SubjetStudy& study,
                                         const std::function<void(const SubjetCell&)>& on_cell) {
    if (study.true_n.empty() || study.fit_n.empty()) throw ConfigError("subjet study: empty N list");
    if (study.trials < 1) throw ConfigError("subjet study: trials must be >= 1");
    study.fit.validate();

    struct Job {
        std::size_t cell;
        int true_n, fit_n, trial;
    };
    std::vector<SubjetCell> cells;
    std::vector<Job> jobs;
    for (int tn : study.true_n)
        for (int fn : study.fit_n) {
            cells.push_back({tn, fn, {}, 0, 0.0, 0.0, 0.0});
            for (int t = 0; t < study.trials; ++t) jobs.push_back({cells.size() - 1, tn, fn, t});
        }

    std::vector<double> results(jobs.size(), std::numeric_limits<double>::quiet_NaN());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) {
            const auto& job = jobs[k];
            const auto ev_seed = mix(study.seed, (static_cast<std::uint64_t>(job.true_n) << 32) |
                                                     static_cast<std::uint32_t>(job.trial));
            auto gen = study.gen;
            gen.n_centers = job.true_n;
            const auto event = events::gen_subjet_event(gen, ev_seed);
            const auto init = subjet_init(event, job.fit_n, study.init, study.learned_weights, gen.box,
                                          mix(ev_seed, static_cast<std::uint64_t>(job.fit_n)));
            auto cfg = study.fit;
            cfg.seed = mix(ev_seed, 1000 + static_cast<std::uint64_t>(job.fit_n));
            try {
                results[k] = fit::fit(event, init, cfg).final_observable;
            } catch (const NumericalError&) {
                // counted as failed
            }
        }
    };
    unsigned threads = study.threads ? study.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }

    for (std::size_t k = 0; k < jobs.size(); ++k) {
        auto& cell = cells[jobs[k].cell];
        if (std::isfinite(results[k])) {
            cell.values.push_back(results[k]);
        } else {
            ++cell.failed;
        }
    }
    for (auto& cell : cells) {
        const auto n = static_cast<double>(cell.values.size());
        if (n > 0) cell.mean = std::accumulate(cell.values.begin(), cell.values.end(), 0.0) / n;
        if (n > 1) {
            double ss = 0.0;
            for (double v : cell.values) ss += (v - cell.mean) * (v - cell.mean);
            cell.stddev = std::sqrt(ss / (n - 1.0));
            cell.stderr_mean = cell.stddev / std::sqrt(n);
        }
        if (on_cell) on_cell(cell);
    }
    return cells;
}

}  // namespace neemo::exp
