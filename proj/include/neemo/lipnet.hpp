#pragma once

// Dense networks with an exact Lipschitz bound of 1.
//
// The first layer is constrained in the ||.||_{p,inf} operator norm and every
// later layer in ||.||_{inf,inf}; GroupSort activations are 1-Lipschitz in
// every L^p norm, so the composition is 1-Lipschitz w.r.t. ||.||_p.
// Constraints are applied inside every forward pass; the stored weights are
// free parameters. Whole and PerRow divide by max(1, norm), UnitRow divides
// each row by max(kUnitRowFloor, norm), so rows near zero are not blown up
// to unit length by rounding noise.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "neemo/autodiff.hpp"

namespace neemo::lipnet {

/// Norm on the network input space.
enum class NormP { One, Two, Inf };

NormP parse_norm(const std::string& s);
std::string to_string(NormP p);

/// Rows of a UnitRow layer with norm below this are scaled by 1/kUnitRowFloor instead.
inline constexpr double kUnitRowFloor = 1e-3;

/// How a layer is pulled back onto the constraint set.
enum class Projection {
    Whole,   // whole matrix divided by max(1, operator norm)
    PerRow,  // each row divided by max(1, its own norm)
    UnitRow, // each row divided by max(kUnitRowFloor, its norm)
};

Projection parse_projection(const std::string& s);
std::string to_string(Projection p);

struct DenseLayer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
    bool is_first = false;
    NormP input_norm = NormP::Two;
};

/// Sorts each consecutive group of `group_size` entries ascending.
std::vector<double> group_sort(std::span<const double> v, int group_size);

/// ||W||_{inf,inf}: the largest row L1 norm.
double op_norm_inf_inf(const Eigen::MatrixXd& W);

/// ||W||_{p,inf}: the largest row L_q norm with 1/p + 1/q = 1.
double op_norm_p_inf(const Eigen::MatrixXd& W, NormP p);

/// Operator norm that bounds this layer: (p,inf) for the first layer, (inf,inf) otherwise.
double layer_norm(const DenseLayer& layer);

DenseLayer constrain_weights(DenseLayer layer, Projection projection = Projection::Whole);

struct Architecture {
    int input_dim = 2;
    std::vector<int> hidden{64, 64, 64, 64};
    int group_size = 2;
    NormP input_norm = NormP::Two;
    Projection projection = Projection::UnitRow;

    void validate() const;
};

/// Parameter-shaped gradient buffer.
struct LayerGrad {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;
};
using NetGrad = std::vector<LayerGrad>;

class LipschitzMLP {
public:
    LipschitzMLP() = default;
    LipschitzMLP(Architecture arch, std::vector<DenseLayer> layers);

    /// Uniform weights in [-1/in, 1/in], zero biases, then projected.
    static LipschitzMLP random(const Architecture& arch, std::uint64_t seed);
    /// All weights and biases zero.
    static LipschitzMLP zeros(const Architecture& arch);

    const Architecture& architecture() const noexcept { return arch_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }
    int input_dim() const noexcept { return arch_.input_dim; }
    std::size_t num_parameters() const;

    /// Layers as seen by the forward pass (constraints applied).
    std::vector<DenseLayer> effective_layers() const;

    /// Replaces the stored weights by their projections; the function is unchanged.
    void project();

    double forward(std::span<const double> x) const;

    /// Evaluates f on every column of X (input_dim x N).
    Eigen::VectorXd forward_batch(const Eigen::MatrixXd& X) const;

    struct BatchGrad {
        Eigen::VectorXd values;  // f(x_k)
        NetGrad params;          // d(sum_k seed_k f(x_k)) / d(raw parameters)
        Eigen::MatrixXd inputs;  // d(seed_k f(x_k)) / d(x_k), input_dim x N
    };

    /// Forward + reverse pass for the weighted sum sum_k seed_k f(x_k).
    BatchGrad backward_batch(const Eigen::MatrixXd& X, const Eigen::VectorXd& seed,
                             bool want_params = true) const;

    /// f on a tape. `params` must follow parameter_vector() ordering.
    ad::Var forward(ad::Tape& tape, std::span<const ad::Var> params, std::span<const ad::Var> x) const;

    /// Flat parameters: per layer, W row-major then b.
    std::vector<double> parameter_vector() const;
    void set_parameter_vector(std::span<const double> flat);
    static std::vector<double> flatten(const NetGrad& grad);

    void save(const std::filesystem::path& path) const;
    static LipschitzMLP load(const std::filesystem::path& path);
    std::string to_json() const;
    static LipschitzMLP from_json(const std::string& text);

private:
    Architecture arch_;
    std::vector<DenseLayer> layers_;
};

/// Largest |f(x)-f(y)| / ||x-y||_p over random pairs drawn uniformly in [lo, hi]^d.
double lipschitz_ratio_check(const LipschitzMLP& net, std::size_t n_pairs, std::uint64_t seed,
                             double lo = -1.0, double hi = 1.0);

/// ||v||_p for the given input norm.
double input_norm(std::span<const double> v, NormP p);

}  // namespace neemo::lipnet
