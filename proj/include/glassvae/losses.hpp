#pragma once
// Five-term training objective: node BCE, edge distance + direction, energy
// MSE, Gaussian KL and soft radial-histogram matching.
//
// Each term has a value-level form (plain vectors, used by tests and
// evaluation) and a tape form used during training.

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "glassvae/autodiff.hpp"
#include "glassvae/model.hpp"
#include "glassvae/periodic_graph.hpp"
#include "glassvae/types.hpp"

namespace glassvae::loss {

inline constexpr double kProbEps = 1e-7;

enum class NodeLossKind { bce, categorical };

struct LossWeights {
    double alpha_node = 1.0;
    double alpha_edge = 100.0;
    double alpha_energy = 300.0;
    double beta_kl = 1e-4;
    double alpha_rdf = 10.0;
    double lambda_cos = 1.0;
    NodeLossKind node_kind = NodeLossKind::bce;

    // Throws ArgumentError when any weight is negative or non-finite.
    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

struct LossBreakdown {
    double node = 0, edge = 0, energy = 0, kl = 0, rdf = 0, total = 0;
};

// --- value level -----------------------------------------------------------

// Mean per-entry BCE over N x S entries, probabilities clamped to [eps, 1-eps].
double node_loss(std::span<const double> probs, std::span<const double> onehot, std::size_t n_species);
// Mean over edges of (d̂ - d)² + λ (1 - cos(Δr̂, Δr)). Zero-length directions
// count as orthogonal; `degenerate` (if given) receives how many edges that hit.
double edge_loss(std::span<const Vec3> delta_hat, std::span<const double> dist_hat, std::span<const Vec3> delta,
                 std::span<const double> dist, double lambda_cos, std::size_t* degenerate = nullptr);
double energy_loss(std::span<const double> e_hat, std::span<const double> e_true);
// −½ Σ_k (1 + logσ²_k − μ_k² − σ²_k)
double kl_loss(std::span<const double> mu, std::span<const double> log_var);
// Squared ℓ₂ between soft histograms of predicted and true positions.
double rdf_loss(std::span<const Vec3> positions_hat, std::span<const Vec3> positions_true, const Vec3& box,
                const graph::RdfConfig& config);
// Weighted sum. Throws DivergenceError naming the first non-finite part.
LossBreakdown total_loss(const LossBreakdown& parts, const LossWeights& weights);

// --- tape level ------------------------------------------------------------

struct LossVars {
    ad::Var node, edge, energy, kl, rdf, total;
};

ad::Var node_loss(ad::Var probs, ad::Var onehot, NodeLossKind kind = NodeLossKind::bce);
ad::Var edge_loss(ad::Var delta_hat, ad::Var dist_hat, ad::Var delta, ad::Var dist, double lambda_cos);
ad::Var energy_loss(ad::Var e_hat, ad::Var e_true);
// Per-sample KL summed over k, averaged over rows.
ad::Var kl_loss(ad::Var mu, ad::Var log_var);
// Batch mean of per-graph squared histogram gaps. r_max is shared across the batch.
ad::Var rdf_loss(ad::Var positions_hat, const model::GraphBatch& batch, double r_max, std::size_t bins, double sigma);

// Largest r_max valid for every box in the batch, and the resolved kernel width.
std::pair<double, double> batch_rdf_params(const model::GraphBatch& batch, const graph::RdfConfig& config);

// Builds all five terms for a forward pass. Graphs without an energy target
// are left out of the energy term (zero if none has one).
LossVars objective(const model::ForwardVars& f, const model::GraphBatch& batch, const LossWeights& weights,
                   const graph::RdfConfig& rdf);

// Reads values and checks finiteness (DivergenceError naming the term).
LossBreakdown breakdown(const LossVars& vars);

nlohmann::json to_json(const LossBreakdown& b);

}  // namespace glassvae::loss
