#pragma once
// Mini-batch training with Adam and global-norm clipping, plus evaluation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glassvae/autodiff.hpp"
#include "glassvae/losses.hpp"
#include "glassvae/metrics.hpp"
#include "glassvae/model.hpp"
#include "glassvae/periodic_graph.hpp"
#include "glassvae/trajio.hpp"

namespace glassvae::train {

struct TrainConfig {
    std::size_t epochs = 100;  // total, counting epochs done before a resume
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 1.0;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 0;  // epochs; 0 writes only the final checkpoint
    std::size_t early_stop_patience = 0;  // epochs without improvement; 0 disables

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct AdamState {
    std::vector<ad::Tensor> m, v;
    std::uint64_t step = 0;

    static AdamState zeros_like(const model::ModelParams& params);
    bool operator==(const AdamState&) const = default;
};

// One bias-corrected Adam update of every tensor in `params`.
void adam_step(std::span<ad::Tensor> params, std::span<const ad::Tensor> grads, AdamState& state, double lr,
               double beta1, double beta2, double eps);

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    loss::LossBreakdown loss;  // batch means
    std::uint64_t step = 0;    // optimizer steps after this epoch
    double max_grad_norm = 0;  // before clipping
    double max_clipped_norm = 0;
};

struct TrainState {
    model::ModelParams params;
    AdamState adam;
    std::size_t epoch = 0;
};

struct TrainOptions {
    loss::LossWeights weights;
    graph::RdfConfig rdf;
    // Carried into checkpoints so that eval/generate can rebuild graphs.
    double cutoff = graph::kDefaultCutoff;
    trajio::EnergyNormalizer normalizer;
    trajio::SpeciesMap species;
    // When set, train_log.csv and checkpoints go here.
    std::optional<std::filesystem::path> out_dir;
    std::optional<TrainState> resume;
    std::ostream* progress = nullptr;
    std::function<void(const EpochLog&)> on_epoch;
    // Fault injection: poison the named loss term from this optimizer step on.
    std::optional<std::string> inject_nan_term;
    std::uint64_t inject_nan_step = 0;
};

struct TrainResult {
    TrainState state;
    std::vector<EpochLog> log;
    std::optional<std::filesystem::path> checkpoint;
    bool early_stopped = false;
};

// Graphs for the given split (all configurations when `which` is empty).
std::vector<graph::ConfigGraph> build_graphs(const trajio::Dataset& dataset, std::optional<trajio::Split> which,
                                             double cutoff);

// Throws ArgumentError for an empty training set and DivergenceError (with the
// last good checkpoint in the message, when one was written) on a non-finite loss.
TrainResult train(std::span<const graph::ConfigGraph> graphs, const model::ModelConfig& model_config,
                  const TrainConfig& config, const TrainOptions& options);

// Energy metrics in eV/atom, distance metrics over every edge, node BCE per
// entry. Uses z = μ. Throws ArgumentError for an empty split.
metrics::MetricsReport evaluate(std::span<const graph::ConfigGraph> graphs, const model::ModelParams& params,
                                const trajio::EnergyNormalizer& normalizer);

struct Predictions {
    std::vector<double> energy_true, energy_pred;  // eV/atom, graphs with energies only
    std::vector<double> dist_true, dist_pred;      // Å, every edge
    std::vector<double> node_probs, node_onehot;
    std::size_t n_species = 0;
};

Predictions predict(std::span<const graph::ConfigGraph> graphs, const model::ModelParams& params,
                    const trajio::EnergyNormalizer& normalizer, std::size_t batch_size = 64);

// Columns: epoch,node,edge,energy,kl,rdf,total
void append_log_row(std::ostream& out, const EpochLog& row);
inline constexpr const char* kLogHeader = "epoch,node,edge,energy,kl,rdf,total";

}  // namespace glassvae::train
