#pragma once
// Executable symmetry and gradient checks on random fixtures, shared by the
// `check-invariance` command and the acceptance suite.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glassvae/model.hpp"
#include "glassvae/trajio.hpp"

namespace glassvae::inv {

struct CheckConfig {
    std::size_t n_fixtures = 20;
    std::size_t n_permutations = 5;
    std::size_t min_atoms = 16;
    std::size_t max_atoms = 32;
    double cutoff = 4.0;
    std::uint64_t seed = 0;
    double invariance_tol = 1e-6;  // relative
    double rotation_tol = 1e-12;   // absolute, Å
    double gradient_tol = 1e-4;    // relative
    double fd_step = 1e-5;
};

struct CheckResult {
    std::string property;
    bool pass = true;
    double max_error = 0;
    double tolerance = 0;
    std::size_t n_cases = 0;
    // First fixture seed that violated the property.
    std::optional<std::uint64_t> failing_seed;
};

// Cu/Zr fixture of n atoms in a cubic box scaled to a fixed number density,
// with a minimum pair separation of 1.5 Å. Deterministic in the seed.
trajio::AtomicConfiguration random_fixture(std::uint64_t seed, std::size_t n_atoms);

// Fixture i uses seed config.seed + i and n_atoms cycling over [min_atoms, max_atoms].
std::uint64_t fixture_seed(const CheckConfig& config, std::size_t i);

// Encoder μ, log σ² and s under node permutation and wrapped translation.
CheckResult check_permutation(const model::ModelParams& params, const CheckConfig& config);
CheckResult check_translation(const model::ModelParams& params, const CheckConfig& config);
// Edge distances under a random rotation of a fixture placed in a free (large) cell.
CheckResult check_rotation(const CheckConfig& config);
// Cutoff edge set against the 27-image brute force.
CheckResult check_edge_sets(const CheckConfig& config);
// Every loss term against finite differences in the model outputs it reads.
CheckResult check_output_gradients(const CheckConfig& config);
// Full objective against finite differences in every parameter of a 2-layer toy model.
CheckResult check_parameter_gradients(const CheckConfig& config);

std::vector<CheckResult> run_all(const model::ModelParams& params, const CheckConfig& config);

// "PASS <property> cases=.. max_err=.. tol=.." with "seed=.." on failure.
std::string format(const CheckResult& result);

}  // namespace glassvae::inv
