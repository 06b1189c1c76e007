#pragma once

// Self-check suites over the whole library: Lipschitz bounds, gradients
// against finite differences, the exact solver against brute force, and weak
// duality of random potentials.

#include <cstdint>
#include <string>
#include <vector>

#include "neemo/ot.hpp"

namespace neemo::checks {

struct CheckResult {
    std::string name;
    bool passed = false;
    double metric = 0.0;     // worst observed value
    double threshold = 0.0;  // pass iff metric <= threshold
    std::string detail;
};

/// Minimum cost over all basic feasible plans; exponential, meant for n, m <= 4.
double brute_force_emd(const ot::DiscreteMeasure& P, const ot::DiscreteMeasure& Q);

/// Random measure with `n` points in [0, 1]^d and weights in (0.1, 1].
ot::DiscreteMeasure random_measure(int n, int d, std::uint64_t seed);

/// Max |f(x) - f(y)| / ||x - y|| over random networks of mixed architectures.
CheckResult lipschitz_suite(int networks = 5, std::size_t pairs = 10000, std::uint64_t seed = 0);
/// Finite differences (step 1e-5) for network parameters, shape parameters and input points.
CheckResult gradient_suite(int configs = 5, std::uint64_t seed = 0);
/// exact_emd against brute force, the 1D CDF formula, symmetry and the triangle inequality.
CheckResult oracle_suite(int cases = 20, std::uint64_t seed = 0);
/// kr_objective of random feasible potentials never exceeds exact_emd + 1e-6.
CheckResult duality_suite(int instances = 20, std::uint64_t seed = 0);

CheckResult run_suite(const std::string& name, std::uint64_t seed = 0);
const std::vector<std::string>& suite_names();

}  // namespace neemo::checks
