#pragma once

// Minimax fitting of a parameterized shape to an event with the
// Kantorovich-Rubinstein dual of the Euclidean EMD:
//
//   O(Q) = min_theta max_phi  sum_i E_i f_phi(x_i) - sum_j w_j(theta) f_phi(y_j(theta))
//
// f_phi is a LipschitzMLP, so every inner iterate gives a lower bound on the
// EMD. The outer gradient holds phi fixed (envelope approximation).

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "neemo/autodiff.hpp"
#include "neemo/error.hpp"
#include "neemo/events.hpp"
#include "neemo/lipnet.hpp"
#include "neemo/ot.hpp"
#include "neemo/shapes.hpp"

namespace neemo::fit {

struct GridSpec {
    int nx = 64;
    int ny = 64;
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;

    /// Cell-center coordinates, row-major with y as the row index.
    Eigen::MatrixXd points() const;
};

struct FitConfig {
    lipnet::Architecture arch{};
    std::size_t inner_steps_per_outer = 10;
    double inner_lr = 1e-3;
    double outer_lr = 5e-3;
    std::size_t outer_steps = 300;
    std::size_t warmup_inner_steps = 500;
    std::size_t refit_inner_steps = 500;
    std::size_t estimate_steps = 2000;  // inner steps used by estimate_emd
    double outer_lr_final_fraction = 1.0;  // outer lr decays linearly to this fraction
    double inner_lr_final_fraction = 1.0;  // estimate_emd: lr decays geometrically to this fraction
    bool stochastic = false;  // minibatch the inner objective
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    double convergence_tol = 0.0;  // stop when max |dtheta| over 10 outer steps falls below; 0 disables
    GridSpec heatmap{};
    std::size_t snapshot_every = 0;  // 0: only the final snapshot
    double divergence_threshold = 1e6;

    void validate() const;
};

/// Adaptive-moment optimizer over independent parameter blocks.
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void next_step() { ++t_; }
    void set_lr(double lr) { lr_ = lr; }
    /// params += lr * update for ascent, -= for descent.
    void update(std::size_t block, double* params, const double* grad, std::size_t n, bool ascend);

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<Eigen::ArrayXd> m_, v_;
};

/// Value of the dual objective with plain doubles.
double kr_objective(const lipnet::LipschitzMLP& net, const ot::DiscreteMeasure& event,
                    const shapes::WeightedSample& sample);

/// The dual objective on a tape, differentiable in the network parameters and the sample.
ad::Var kr_objective(ad::Tape& tape, const lipnet::LipschitzMLP& net, std::span<const ad::Var> net_params,
                     const ot::DiscreteMeasure& event, const shapes::TapeSample& sample);

struct KrGradient {
    double value = 0.0;
    lipnet::NetGrad params;          // d value / d phi
    Eigen::MatrixXd sample_points;   // d value / d y_j
    Eigen::VectorXd sample_weights;  // d value / d w_j = -f(y_j)
};

/// Dual objective and its gradient from one batched forward/backward pass.
KrGradient kr_gradient(const lipnet::LipschitzMLP& net, const ot::DiscreteMeasure& event,
                       const shapes::WeightedSample& sample, bool want_params = true);

struct EmdEstimate {
    double emd = 0.0;  // best objective over the ascent
    lipnet::LipschitzMLP net;  // evaluate at x - origin
    Eigen::VectorXd origin;    // weighted centroid of the event
    std::vector<double> history;  // objective before every step
};

/// Gradient ascent on phi for config.estimate_steps steps, starting from `net`.
EmdEstimate estimate_emd(const ot::DiscreteMeasure& event, const shapes::WeightedSample& sample,
                         lipnet::LipschitzMLP net, const FitConfig& config);

struct TraceRecord {
    std::size_t step = 0;
    std::vector<double> theta;
    double emd_estimate = 0.0;
    double grad_norm_theta = 0.0;
};

struct Snapshot {
    std::size_t step = 0;
    std::vector<double> theta;
    std::vector<double> heatmap;  // potential_heatmap on config.heatmap
    Eigen::MatrixXd sample_points;
    Eigen::MatrixXd forces;
};

struct FitTrace {
    std::vector<TraceRecord> records;
    std::vector<Snapshot> snapshots;
    std::vector<double> final_theta;
    double final_observable = 0.0;
    std::vector<double> refit_history;
    std::size_t outer_steps_run = 0;
    bool converged_early = false;
    // Potential in the frame of the fit; evaluate at x - origin.
    lipnet::LipschitzMLP final_net;
    Eigen::VectorXd origin;
};

/// Thrown when the objective leaves the divergence threshold or becomes non-finite.
class FitDivergence : public NumericalError {
public:
    FitDivergence(const std::string& what, FitTrace trace) : NumericalError(what), trace_(std::move(trace)) {}
    const FitTrace& trace() const noexcept { return trace_; }

private:
    FitTrace trace_;
};

/// Alternating inner ascent (phi) and outer descent (theta).
FitTrace fit(const events::Event& event, const shapes::ShapeSpec& init, const FitConfig& config);

/// f_phi(x - origin) on the grid, row-major.
std::vector<double> potential_heatmap(const lipnet::LipschitzMLP& net, const GridSpec& grid,
                                      const Eigen::VectorXd& origin = Eigen::VectorXd());

/// w_j * grad f(y_j) for every sample point (columns).
Eigen::MatrixXd theta_forces(const lipnet::LipschitzMLP& net, const shapes::WeightedSample& sample);

std::string heatmap_to_text(const GridSpec& grid, const std::vector<double>& values);
std::pair<GridSpec, std::vector<double>> heatmap_from_text(const std::string& text);
void save_heatmap(const std::filesystem::path& path, const GridSpec& grid, const std::vector<double>& values);

/// One JSON object per line: step, theta, emd, grad_norm.
std::string trace_to_jsonl(const FitTrace& trace);

/// key = value lines; unknown keys throw ConfigError.
FitConfig parse_config(const std::string& text, FitConfig base = {});
FitConfig load_config(const std::filesystem::path& path, FitConfig base = {});
std::string config_to_text(const FitConfig& config);

}  // namespace neemo::fit
