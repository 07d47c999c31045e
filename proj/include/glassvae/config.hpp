#pragma once
// JSON forms of every config struct, and the sectioned run configuration
// (data / model / train / loss / rdf / generate) read by the CLI.

#include <filesystem>

#include <json.hpp>

#include "glassvae/generator.hpp"
#include "glassvae/losses.hpp"
#include "glassvae/model.hpp"
#include "glassvae/periodic_graph.hpp"
#include "glassvae/trainer.hpp"
#include "glassvae/trajio.hpp"

namespace glassvae::config {

struct DataConfig {
    double cutoff = graph::kDefaultCutoff;
    double split_ratio = 0.8;
    std::size_t max_per_temperature = 0;  // 0 keeps everything
    bool operator==(const DataConfig&) const = default;
};

struct RunConfig {
    DataConfig data;
    model::ModelConfig model;
    train::TrainConfig train;
    loss::LossWeights loss;
    graph::RdfConfig rdf;
    gen::GenConfig generate;
    std::uint64_t seed = 0;
};

// Missing keys keep their defaults; unknown keys raise ArgumentError.
RunConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
// Accepts a plain config file or a run manifest (uses its "config" member).
RunConfig load(const std::filesystem::path& path);

nlohmann::json to_json(const model::ModelConfig& c);
model::ModelConfig model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const train::TrainConfig& c);
train::TrainConfig train_from_json(const nlohmann::json& j);
nlohmann::json to_json(const loss::LossWeights& c);
loss::LossWeights loss_from_json(const nlohmann::json& j);
nlohmann::json to_json(const graph::RdfConfig& c);
graph::RdfConfig rdf_from_json(const nlohmann::json& j);
nlohmann::json to_json(const gen::GenConfig& c);
gen::GenConfig gen_from_json(const nlohmann::json& j);
nlohmann::json to_json(const trajio::EnergyNormalizer& n);
trajio::EnergyNormalizer normalizer_from_json(const nlohmann::json& j);
nlohmann::json to_json(const trajio::SpeciesMap& s);
trajio::SpeciesMap species_from_json(const nlohmann::json& j);

}  // namespace glassvae::config
