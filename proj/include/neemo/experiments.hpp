#pragma once

// Ready-made fits on the synthetic events: three circles, a triangle with an
// ellipse, and the N-subjet matrix.

#include <array>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "neemo/events.hpp"
#include "neemo/fitter.hpp"
#include "neemo/shapes.hpp"

namespace neemo::exp {

struct ShapeFitResult {
    events::Event event;
    shapes::ShapeSpec init;
    fit::FitTrace trace;
    double exact_emd = 0.0;     // exact_emd(event, final sample)
    double center_error = 0.0;  // circles: worst center distance after the best matching
    double size_error = 0.0;    // circles: worst radius difference after the same matching
    int restart = 0;            // index of the kept restart
};

struct ShapeFitOptions {
    int points_per_component = 200;  // event particles per circle / per shape
    int samples = 64;                // shape samples per component
    bool stochastic_shape = false;
    int restarts = 1;  // independent random starts; the lowest O(Q) is kept
    double accept_observable = 0.0;  // skip remaining restarts once O(Q) <= this (0: run all)
};

/// Event from three_circle_layout(); three circles placed at random from `seed`.
ShapeFitResult three_circle_fit(std::uint64_t seed, const fit::FitConfig& config, const ShapeFitOptions& options = {});

/// Event from triangle_ellipse_layout(); triangle and ellipse placed at random from `seed`.
ShapeFitResult triangle_ellipse_fit(std::uint64_t seed, const fit::FitConfig& config,
                                    const ShapeFitOptions& options = {400, 64, false, 1, 0.0});

/// Worst center and radius error of `theta` (circle-set) against `truth` under the best permutation.
std::pair<double, double> circle_recovery(const std::vector<double>& theta,
                                          const std::vector<std::array<double, 3>>& truth);

enum class CenterInit { Box, Particles };

struct SubjetStudy {
    std::vector<int> true_n{3, 4, 5};
    std::vector<int> fit_n{3, 4, 5};
    int trials = 10;
    events::SubjetParams gen{};
    fit::FitConfig fit{};
    bool learned_weights = false;
    CenterInit init = CenterInit::Particles;
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct SubjetCell {
    int true_n = 0;
    int fit_n = 0;
    std::vector<double> values;  // O(Q) of successful trials
    std::size_t failed = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double stderr_mean = 0.0;
};

/// Trial t of true N uses the same event for every fit N.
std::vector<SubjetCell> run_subjet_study(const SubjetStudy& study,
                                         const std::function<void(const SubjetCell&)>& on_cell = {});

/// Initial centers for a point-set fit of `n` centers.
shapes::ShapeSpec subjet_init(const events::Event& event, int n, CenterInit init, bool learned_weights,
                              const shapes::Box& box, std::uint64_t seed);

}  // namespace neemo::exp
