#pragma once
// Hierarchical dual-path graph VAE.
//
// Node path: one-hot embedding, L rounds of mean-aggregated message passing
// with residual updates, pooled to a graph vector, then linear heads for μ and
// log σ². Edge path: L_e residual MLP blocks over (Δr, d), pooled to the
// descriptor s. The decoder broadcasts z to every node alongside a learned
// per-slot embedding (slots follow template atom order); species logits also
// get a per-slot offset of their own. The energy head reads μ ∥ s.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "glassvae/autodiff.hpp"
#include "glassvae/periodic_graph.hpp"

namespace glassvae::model {

enum class Pooling { mean, sum };

struct ModelConfig {
    std::size_t hidden_dim = 32;
    std::size_t latent_dim = 16;
    std::size_t n_mp_layers = 2;
    std::size_t n_edge_blocks = 2;
    std::size_t species_count = 2;
    std::size_t edge_attr_dim = 4;
    std::vector<std::size_t> energy_head_dims{32};
    // Atoms per template; sizes the per-slot decoder embedding.
    std::size_t n_atoms = 16;
    std::size_t slot_dim = 8;
    Pooling pooling = Pooling::mean;
    // Ê = energy_offset + energy_scale · head(μ ∥ s), centred on the 0–100 scale.
    double energy_offset = 50.0;
    double energy_scale = 50.0;
    // Edge inputs (Δx, Δy, Δz, d) enter every MLP as (a - shift) / scale.
    std::vector<double> edge_shift{0, 0, 0, 0};
    std::vector<double> edge_scale{1, 1, 1, 1};
    // Fit edge_shift/edge_scale on the training graphs when training starts fresh.
    bool standardize_edges = true;
    std::uint64_t seed = 0;

    // Throws ArgumentError on zero dims or latent_dim outside [8, 64].
    void validate() const;
    // Soft warnings (latent_dim outside [16, 32]).
    std::vector<std::string> warnings() const;
    bool operator==(const ModelConfig&) const = default;
};

struct NamedTensor {
    std::string name;
    ad::Tensor value;
    bool operator==(const NamedTensor&) const = default;
};

class ModelParams {
public:
    ModelParams() = default;
    // Glorot-uniform weights, zero biases, uniform slot embeddings; seeded by config.seed.
    static ModelParams init(const ModelConfig& config);

    const ModelConfig& config() const noexcept { return config_; }
    std::vector<NamedTensor>& tensors() noexcept { return tensors_; }
    const std::vector<NamedTensor>& tensors() const noexcept { return tensors_; }
    ad::Tensor& get(std::string_view name);
    const ad::Tensor& get(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;
    std::size_t parameter_count() const;

    // Builds an empty container for `config` with every tensor zero-filled.
    static ModelParams zeros(const ModelConfig& config);

    bool operator==(const ModelParams&) const = default;

private:
    ModelConfig config_;
    std::vector<NamedTensor> tensors_;
};

// Several graphs packed into one disjoint union, node and edge indices offset.
struct GraphBatch {
    std::size_t n_graphs = 0;
    std::size_t n_nodes = 0;
    std::size_t n_edges = 0;
    std::size_t n_species = 0;
    ad::Tensor node_features;  // [N x S]
    ad::Tensor edge_attrs;     // [E x 4] (Δr, d)
    ad::Tensor ref_positions;  // [N x 3]
    ad::Tensor edge_box;       // [E x 3]
    std::vector<std::uint32_t> node_graph, node_slot;
    std::vector<std::uint32_t> edge_src, edge_dst, edge_graph;
    // Unordered atom pairs (i < j) per graph, for radial histograms.
    std::vector<std::uint32_t> pair_i, pair_j, pair_graph;
    ad::Tensor pair_box;  // [P x 3]
    std::vector<Vec3> boxes;
    std::vector<double> energy;  // normalized targets, NaN where unknown
    std::vector<std::size_t> nodes_per_graph;
};

// Per-feature mean and standard deviation of edge attributes over all edges.
void fit_edge_standardization(ModelConfig& config, std::span<const graph::ConfigGraph> graphs);

GraphBatch make_batch(std::span<const graph::ConfigGraph* const> graphs);
GraphBatch make_batch(const graph::ConfigGraph& graph);

struct LatentCode {
    std::vector<double> mu;
    std::vector<double> log_var;
    std::vector<double> z;
    std::vector<double> eps;  // noise used for z
    std::vector<double> s;    // edge-path descriptor
    bool operator==(const LatentCode&) const = default;
};

struct ReconstructionOutput {
    std::size_t n_nodes = 0;
    std::size_t n_species = 0;
    std::vector<double> node_probs;  // n_nodes x n_species
    std::vector<Vec3> edge_delta_hat;
    std::vector<double> edge_dist_hat;
    std::vector<Vec3> positions_hat;
    double energy_hat = 0.0;  // normalized
};

// --- tape-level building blocks -------------------------------------------

// Parameters mirrored as leaves on one tape, in ModelParams order.
class ParamBinding {
public:
    ParamBinding(ad::Tape& tape, const ModelParams& params, bool requires_grad);
    ad::Var operator()(std::string_view name) const;
    const std::vector<ad::Var>& vars() const noexcept { return vars_; }
    const ModelParams& params() const noexcept { return *params_; }
    ad::Tape& tape() const noexcept { return *tape_; }

private:
    ad::Tape* tape_;
    const ModelParams* params_;
    std::vector<ad::Var> vars_;
};

struct EncoderVars {
    ad::Var mu;       // [B x d_z]
    ad::Var log_var;  // [B x d_z]
    ad::Var s;        // [B x H]
};

struct DecoderVars {
    ad::Var node_probs;  // [N x S]
    ad::Var positions;   // [N x 3]
    ad::Var edge_delta;  // [E x 3]
    ad::Var edge_dist;   // [E x 1]
};

struct ForwardVars {
    EncoderVars enc;
    ad::Var z;
    DecoderVars dec;
    ad::Var energy;  // [B x 1], normalized
};

// Throws DegenerateGraphError when a graph in the batch has no edges.
EncoderVars encode_vars(const ParamBinding& p, const GraphBatch& batch);
ad::Var reparameterize(ad::Var mu, ad::Var log_var, const ad::Tensor& eps);
DecoderVars decode_vars(const ParamBinding& p, ad::Var z, const GraphBatch& batch);
ad::Var energy_vars(const ParamBinding& p, ad::Var code, ad::Var s);
// Full pass. eps is [B x d_z]; zeros give z = μ.
ForwardVars forward(const ParamBinding& p, const GraphBatch& batch, const ad::Tensor& eps);

// --- value-level API -------------------------------------------------------

LatentCode encode(const graph::ConfigGraph& graph, const ModelParams& params, std::mt19937_64& rng);
// Deterministic variant: eps = 0, z = μ.
LatentCode encode_mean(const graph::ConfigGraph& graph, const ModelParams& params);
// Throws ShapeError when the code or template does not fit the parameters.
ReconstructionOutput decode(const LatentCode& code, const graph::ConfigGraph& templ, const ModelParams& params);
// Ê(μ ∥ s) on the normalized scale; ignores z.
double predict_energy(const LatentCode& code, const ModelParams& params);

}  // namespace glassvae::model
