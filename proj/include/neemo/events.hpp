#pragma once

// Events (weighted particle clouds), their text formats and the synthetic
// generators used by the experiments.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "neemo/ot.hpp"
#include "neemo/shapes.hpp"

namespace neemo::events {

struct Event {
    Eigen::VectorXd energies;
    Eigen::MatrixXd positions;  // d x n
    std::optional<std::string> label;

    Eigen::Index size() const noexcept { return energies.size(); }
    Eigen::Index dim() const noexcept { return positions.rows(); }
    /// At least one particle, finite positive energies, finite coordinates.
    void validate() const;
};

/// Weights E_i / sum E, positions unchanged.
ot::DiscreteMeasure normalize(const Event& event);

enum class Format { Csv, Jsonl };
Format parse_format(const std::string& s);
/// csv for *.csv, jsonl for *.jsonl / *.json; throws otherwise.
Format format_for(const std::filesystem::path& path);

Event parse_csv(const std::string& text);
Event parse_jsonl(const std::string& text);
std::string to_csv(const Event& event);
std::string to_jsonl(const Event& event);

Event load_event(const std::filesystem::path& path, Format format);
Event load_event(const std::filesystem::path& path);
void save_event(const Event& event, const std::filesystem::path& path, Format format);
void save_event(const Event& event, const std::filesystem::path& path);

/// Uniform-random angles on each circle, equal energies, optional radial Gaussian jitter.
Event gen_circle_event(const std::vector<std::array<double, 3>>& circles, int points_per_circle, double jitter,
                       std::uint64_t seed);

struct TriangleEllipse {
    std::array<double, 6> triangle{};
    double cx = 0.0, cy = 0.0, a = 0.1, b = 0.1, rotation = 0.0;
};

/// Uniform-random arc positions on a triangle and an ellipse, equal energies.
Event gen_triangle_ellipse_event(const TriangleEllipse& params, int points_per_shape, std::uint64_t seed);

struct SubjetParams {
    int n_centers = 3;
    shapes::Box box{};
    double sigma = 0.05;
    int particles_per_center = 10;
};

/// Centers uniform in the box inset by 3 sigma; isotropic Gaussian particles around each.
Event gen_subjet_event(const SubjetParams& params, std::uint64_t seed);

/// Three circles in the unit box used for the three-circle fit.
std::vector<std::array<double, 3>> three_circle_layout();
/// Triangle plus ellipse in the unit box.
TriangleEllipse triangle_ellipse_layout();

}  // namespace neemo::events
