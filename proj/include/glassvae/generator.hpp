#pragma once
// Random and energy-targeted structure generation from the latent space.
//
// Ê(z) here is the energy head applied to z ∥ s_anchor: the refined (or
// sampled) code stands in for μ while the anchor's edge descriptor is held fixed.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "glassvae/model.hpp"
#include "glassvae/periodic_graph.hpp"
#include "glassvae/trajio.hpp"

namespace glassvae::gen {

struct GenConfig {
    double gamma = 0.5;
    std::size_t n_samples = 10;
    std::optional<double> e_min, e_max;  // eV/atom
    double lambda_z = 1e-3;
    std::size_t steps = 200;
    double refine_lr = 1e-2;
    std::uint64_t seed = 0;
    bool prior = false;  // random mode draws z ~ N(0, I) instead of around the anchor
    // Conditional mode ends as soon as both hinges are zero.
    bool stop_when_inside = true;

    void validate() const;
    bool operator==(const GenConfig&) const = default;
};

struct Sample {
    model::LatentCode code;  // code.z is the sampled latent
    model::ReconstructionOutput structure;
    double energy_norm = 0;
    double energy_ev_per_atom = 0;
};

// Throws ArgumentError for gamma < 0.
std::vector<Sample> sample_random(const model::ModelParams& params, const graph::ConfigGraph& anchor,
                                  const GenConfig& config, const trajio::EnergyNormalizer& normalizer,
                                  std::mt19937_64& rng);

struct Refinement {
    std::vector<double> z;
    model::ReconstructionOutput structure;
    double energy_norm = 0;
    double energy_ev_per_atom = 0;
    bool in_target = false;
    std::size_t steps_taken = 0;
    // L(z_t) = hinge² terms + λ‖z_t‖², one entry per iterate including z_0.
    std::vector<double> objective;
    std::vector<double> hinge;        // hinge part alone
    std::vector<double> energy_trace;  // Ê(z_t), normalized
    std::vector<double> z_norm;
};

// Backtracking gradient descent on L(z) from z_0 = μ(anchor). Requires e_min
// and e_max. Throws RefinementError on a non-finite objective.
Refinement generate_conditional(const model::ModelParams& params, const graph::ConfigGraph& anchor,
                                const GenConfig& config, const trajio::EnergyNormalizer& normalizer);

// Normalized Ê(z ∥ s) and its gradient with respect to z.
double latent_energy(const model::ModelParams& params, std::span<const double> z, std::span<const double> s,
                     std::vector<double>* grad = nullptr);

struct LatentRow {
    std::int64_t frame_id = 0;
    std::vector<double> mu;
    double energy = 0;  // eV/atom, NaN when unknown
};

std::vector<LatentRow> export_latents(const model::ModelParams& params, std::span<const graph::ConfigGraph> graphs,
                                      const trajio::EnergyNormalizer& normalizer);
// Header: frame_id,mu_0..mu_{d-1},energy_ev_per_atom
void write_latents_csv(std::ostream& out, std::span<const LatentRow> rows);

// Decoded structure as a configuration on the anchor's box and species
// (argmax of node_probs), positions wrapped into the box.
trajio::AtomicConfiguration to_configuration(const model::ReconstructionOutput& out, const graph::ConfigGraph& anchor,
                                             const trajio::SpeciesMap& species, std::int64_t frame_id);

}  // namespace glassvae::gen
