#pragma once
// Binary checkpoint container.
//
// Layout: 8-byte magic "GVAECKPT", u32 version, u64 header length, UTF-8 JSON
// header (configs, tensor manifest, optimizer step), then every tensor's raw
// little-endian float64 data in manifest order: parameters, Adam m, Adam v.

#include <cstddef>
#include <filesystem>

#include "glassvae/losses.hpp"
#include "glassvae/model.hpp"
#include "glassvae/periodic_graph.hpp"
#include "glassvae/trainer.hpp"
#include "glassvae/trajio.hpp"

namespace glassvae::ckpt {

inline constexpr std::uint32_t kVersion = 1;

struct Checkpoint {
    model::ModelParams params;
    train::AdamState adam;
    std::size_t epoch = 0;
    train::TrainConfig train;
    loss::LossWeights weights;
    graph::RdfConfig rdf;
    double cutoff = graph::kDefaultCutoff;
    trajio::EnergyNormalizer normalizer;
    trajio::SpeciesMap species;
};

// Writes atomically (temp file then rename).
void save(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws IoError when unreadable, FormatError on bad magic/version/sizes.
Checkpoint load(const std::filesystem::path& path);

}  // namespace glassvae::ckpt
