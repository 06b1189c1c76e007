#pragma once

// Parameterized weighted point clouds: free centers, circles, an ellipse, a
// triangle and concatenations of these. Every sampler exists for plain
// doubles and on an autodiff tape, so sample points carry derivatives with
// respect to the shape parameters.
//
// Parameter layout (radii and semi-axes are stored as logarithms):
//   point-set    k*d centers, then k weight logits when weights are learned
//   circle-set   (cx, cy, log r) per circle, then k logits when learned
//   ellipse      cx, cy, log a, log b, rotation
//   triangle     x0, y0, x1, y1, x2, y2
//   composite    component parameters back to back, then one logit per
//                component when learned

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "neemo/autodiff.hpp"
#include "neemo/ot.hpp"

namespace neemo::shapes {

enum class Kind { PointSet, CircleSet, Ellipse, Triangle, Composite };
enum class WeightMode { Uniform, Learned };

std::string to_string(Kind kind);
Kind parse_kind(const std::string& s);

struct ShapeSpec {
    Kind kind = Kind::PointSet;
    std::vector<double> theta;
    int samples = 64;  // points per perimeter component
    WeightMode weight_mode = WeightMode::Uniform;
    int count = 1;     // centers or circles
    int dim = 2;       // point-set only
    bool stochastic = false;
    std::vector<ShapeSpec> components;  // composite only

    std::size_t theta_size() const;
    std::size_t num_points() const;
    int point_dim() const;
    /// Throws ConfigError on inconsistent sizes or non-positive sample counts.
    void validate() const;
    /// Assigns theta; composite components receive their slices.
    void set_theta(std::vector<double> values);

    static ShapeSpec point_set(const std::vector<std::vector<double>>& centers, bool learned_weights = false);
    static ShapeSpec circle_set(const std::vector<std::array<double, 3>>& circles, int samples = 64);
    static ShapeSpec ellipse(double cx, double cy, double a, double b, double rotation, int samples = 64);
    static ShapeSpec triangle(const std::array<double, 6>& vertices, int samples = 64);
    static ShapeSpec composite(std::vector<ShapeSpec> parts);

    std::string to_json() const;
    static ShapeSpec from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static ShapeSpec load(const std::filesystem::path& path);
};

/// Samples with plain values. Points are stored column-wise.
struct WeightedSample {
    Eigen::VectorXd weights;
    Eigen::MatrixXd points;

    ot::DiscreteMeasure measure() const { return {weights, points}; }
};

/// Samples recorded on a tape; points are flattened column-major (d values per point).
struct TapeSample {
    std::vector<ad::Var> weights;
    std::vector<ad::Var> points;
    int dim = 2;

    WeightedSample values() const;
};

/// Deterministic grid sampling unless spec.stochastic, in which case arc positions come from `seed`.
WeightedSample sample(const ShapeSpec& spec, std::uint64_t seed = 0);
TapeSample sample(ad::Tape& tape, std::span<const ad::Var> theta, const ShapeSpec& spec, std::uint64_t seed = 0);

/// Points at the given perimeter fractions in [0, 1) of a single circle, ellipse or triangle.
Eigen::MatrixXd perimeter_points(const ShapeSpec& single, std::span<const double> fractions);

/// Max over entries of |J_autodiff - J_fd| / (max |J_fd| in that parameter's column + 1e-12).
double sample_jacobian_check(const ShapeSpec& spec, std::uint64_t seed, double step);

/// Ellipse arc length from parameter angle 0 to t.
double ellipse_arc_length(double a, double b, double t);

struct Box {
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
};

/// Replaces theta with a random configuration inside `box` (structure kept).
void randomize(ShapeSpec& spec, const Box& box, std::uint64_t seed);

/// Shifts all location entries of theta by `offset` (2D kinds and point-sets).
void translate(ShapeSpec& spec, std::span<const double> offset);

}  // namespace neemo::shapes
