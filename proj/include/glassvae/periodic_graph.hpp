#pragma once
// Attributed cutoff graphs under periodic boundaries, and radial
// distribution histograms.

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "glassvae/trajio.hpp"
#include "glassvae/types.hpp"

namespace glassvae::graph {

inline constexpr double kDefaultCutoff = 5.0;  // Å

struct EdgeAttr {
    Vec3 delta{};      // Δr_ij = r_i - r_j under the minimum image (Å)
    double dist = 0;   // ‖Δr_ij‖₂
};

// Δ = (r_i - r_j + L/2) mod L - L/2 per axis; every component lands in [-L/2, L/2).
EdgeAttr min_image_displacement(const Vec3& r_i, const Vec3& r_j, const Vec3& box);

struct ConfigGraph {
    std::size_t n_nodes = 0;
    std::size_t n_species = 0;
    std::vector<double> node_features;  // n_nodes × n_species one-hot, row-major
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_index;  // directed (i, j)
    std::vector<EdgeAttr> edge_attrs;
    Vec3 box{};
    std::vector<Vec3> reference_positions;
    std::optional<double> energy_norm;  // unset when the configuration had no energy
    std::int64_t frame_id = 0;
    double temperature_tag = 0.0;

    std::size_t n_edges() const noexcept { return edge_index.size(); }
    // Column of the hot entry in row i.
    std::size_t species_of(std::size_t i) const;
};

// Edges are all ordered pairs i != j with minimum-image distance <= cutoff.
// Both directions are stored, (i, j) before (j, i) for i < j adjacent in the
// list, and Δr_ji is the exact negation of Δr_ij.
// Throws ArgumentError when cutoff > min(box)/2 or two atoms coincide.
ConfigGraph build_graph(const trajio::AtomicConfiguration& config, double cutoff,
                        const trajio::EnergyNormalizer& normalizer, const trajio::SpeciesMap& species);

nlohmann::json to_json(const ConfigGraph& graph);

// ---------------------------------------------------------------------------
// Radial distribution histograms

enum class RdfMode { hard, soft };

struct RdfConfig {
    std::optional<double> r_max;         // default: min(box)/2
    std::size_t bins = 64;
    RdfMode mode = RdfMode::soft;
    std::optional<double> kernel_width;  // default: one bin width
};

struct RdfHistogram {
    std::vector<double> bin_centers;  // Å
    std::vector<double> values;
    double r_max = 0;
    double kernel_width = 0;
};

// Unordered pairs i < j with 0 < d <= r_max contribute. Hard mode counts each
// pair in the bin (bΔ, (b+1)Δ] containing it; soft mode spreads each pair over
// all bins with Gaussian weights exp(-(d - c_b)² / 2σ²) normalized to sum 1.
RdfHistogram compute_rdf(std::span<const Vec3> positions, const Vec3& box, double r_max, std::size_t bins, RdfMode mode,
                         double kernel_width);

RdfHistogram compute_rdf(std::span<const Vec3> positions, const Vec3& box, const RdfConfig& config);

// Resolved (r_max, kernel_width) for a box; validates r_max <= min(box)/2 and bins >= 2.
std::pair<double, double> resolve_rdf(const RdfConfig& config, const Vec3& box);

// Normalized Gaussian weights of one distance over `out.size()` bins of width
// r_max / bins. Stable for arbitrarily small sigma.
void soft_bin_weights(double dist, double bin_width, double sigma, std::span<double> out);

// Hard bin of a distance in (0, r_max], or -1 outside.
long hard_bin(double dist, double r_max, std::size_t bins);

}  // namespace glassvae::graph
