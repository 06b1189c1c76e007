#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "neemo/fitter.hpp"

namespace neemo::svg {

struct Frame {
    fit::GridSpec grid;
    std::vector<double> heatmap;   // row-major, may be empty
    Eigen::MatrixXd event_points;  // 2 x n
    Eigen::VectorXd event_weights;
    Eigen::MatrixXd sample_points;  // 2 x m
    Eigen::MatrixXd forces;         // 2 x m, arrows point along the descent step
    std::string title;
};

std::string render(const Frame& frame, int size_px = 600);
void write(const std::filesystem::path& path, const Frame& frame, int size_px = 600);

}  // namespace neemo::svg
