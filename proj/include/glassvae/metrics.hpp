#pragma once
// Regression metrics, radial-histogram comparison and CSV exports.

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "glassvae/periodic_graph.hpp"
#include "glassvae/types.hpp"

namespace glassvae::metrics {

struct MetricsReport {
    double energy_rmse = 0;  // eV/atom
    double energy_r2 = 0;    // NaN when the truth has zero variance
    double dist_rmse = 0;    // Å
    double dist_r2 = 0;
    double node_bce = 0;
    double species_accuracy = 0;  // argmax of node_probs vs true species
    std::size_t n_samples = 0;
    std::size_t n_edges = 0;
};

nlohmann::json to_json(const MetricsReport& r);

double rmse(std::span<const double> pred, std::span<const double> truth);
// 1 - SS_res / SS_tot. Throws ArgumentError when the truth is constant.
double r2(std::span<const double> pred, std::span<const double> truth);

// CSV with header `true,pred`.
void parity_export(std::span<const double> pred, std::span<const double> truth, const std::filesystem::path& path);

struct RdfComparison {
    graph::RdfHistogram original;
    graph::RdfHistogram reconstructed;
    double gap = 0;  // ℓ₂ norm of the difference
};

RdfComparison rdf_compare(std::span<const Vec3> original, std::span<const Vec3> reconstructed, const Vec3& box,
                          const graph::RdfConfig& config);
// CSV with header `bin_center,g_true,g_recon`.
void write_rdf_csv(const RdfComparison& cmp, const std::filesystem::path& path);

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

}  // namespace glassvae::metrics
