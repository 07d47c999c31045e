#pragma once
// Trajectory ingestion: LAMMPS text dumps, energy tables, normalization and
// train/test assembly.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glassvae/types.hpp"

namespace glassvae::trajio {

// One snapshot in an orthorhombic periodic box. Positions are wrapped into
// [0, L) per axis on ingestion.
struct AtomicConfiguration {
    std::vector<Vec3> positions;     // Å
    std::vector<std::string> species;
    Vec3 box{};                      // edge lengths Lx, Ly, Lz (Å)
    std::optional<double> energy;    // total potential energy (eV), unset until joined
    double temperature_tag = 0.0;    // K, metadata only
    std::int64_t frame_id = 0;

    std::size_t size() const noexcept { return positions.size(); }
    bool operator==(const AtomicConfiguration&) const = default;
};

// LAMMPS integer atom type -> element label. The declared species set is
// ordered by type id; that order fixes the one-hot columns.
class SpeciesMap {
public:
    SpeciesMap() = default;
    explicit SpeciesMap(std::map<int, std::string> type_to_label);

    // Parses `type=Label` lines; '#' starts a comment.
    static SpeciesMap parse(std::istream& in);
    static SpeciesMap load(const std::filesystem::path& path);

    const std::string& label(int type) const;
    int type_of(const std::string& label) const;
    // Column of `label` in the one-hot encoding.
    std::size_t index_of(const std::string& label) const;
    bool contains(const std::string& label) const;

    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::map<int, std::string>& types() const noexcept { return type_to_label_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }

private:
    std::map<int, std::string> type_to_label_;
    std::vector<std::string> labels_;
};

// Throws ArgumentError if N < 2, a coordinate is non-finite or outside
// [0, L), a box edge is not positive, or a label is outside `species`.
void validate(const AtomicConfiguration& config, const SpeciesMap* species = nullptr);

std::vector<AtomicConfiguration> parse_dump(std::istream& in, const SpeciesMap& species,
                                            double temperature_tag = 0.0);

// Writes frames as a LAMMPS text dump with box bounds [0, L). Reparsing the
// output reproduces positions, species, box and frame ids exactly.
void write_dump(std::ostream& out, std::span<const AtomicConfiguration> configs, const SpeciesMap& species);

using EnergyTable = std::map<std::int64_t, double>;

// Two-column CSV `frame_id,energy_eV`; an optional non-numeric header row is skipped.
EnergyTable parse_energy_csv(std::istream& in);

std::vector<AtomicConfiguration> join_energies(std::vector<AtomicConfiguration> configs, const EnergyTable& table);

// Linear map of [e_min, e_max] onto [lo, hi]. A degenerate range maps
// everything to lo.
class EnergyNormalizer {
public:
    EnergyNormalizer() = default;
    EnergyNormalizer(double e_min, double e_max, double lo = 0.0, double hi = 100.0);

    double normalize(double energy) const noexcept;
    double denormalize(double value) const noexcept;
    // d(normalized)/d(eV); zero for a degenerate range.
    double scale() const noexcept;

    double e_min() const noexcept { return e_min_; }
    double e_max() const noexcept { return e_max_; }
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    bool degenerate() const noexcept { return !(e_max_ > e_min_); }

private:
    double e_min_ = 0.0;
    double e_max_ = 0.0;
    double lo_ = 0.0;
    double hi_ = 100.0;
};

EnergyNormalizer fit_normalizer(std::span<const double> train_energies);

enum class Split : std::uint8_t { train, test };

struct Dataset {
    std::vector<AtomicConfiguration> configs;
    EnergyNormalizer energy_norm;
    std::vector<Split> split;  // parallel to configs
    SpeciesMap species;         // may be empty for datasets built in memory

    std::vector<std::size_t> indices(Split which) const;
    std::vector<std::size_t> train_indices() const { return indices(Split::train); }
    std::vector<std::size_t> test_indices() const { return indices(Split::test); }
};

// Stratified by temperature tag: every stratum gets its share within one
// element and the global train count is round(ratio * n). The normalizer is
// fit on the train part only. Requires energies to be set.
Dataset split_dataset(std::vector<AtomicConfiguration> configs, double ratio, std::uint64_t seed);

// Keeps at most `max_per_temperature` randomly chosen frames per temperature
// tag, preserving input order among the survivors.
std::vector<AtomicConfiguration> cap_per_temperature(std::vector<AtomicConfiguration> configs,
                                                     std::size_t max_per_temperature, std::uint64_t seed);

// JSON-lines, one configuration per line.
void write_jsonl(std::ostream& out, std::span<const AtomicConfiguration> configs);
std::vector<AtomicConfiguration> read_jsonl(std::istream& in);

// `<path>` holds the JSONL configurations; `<path>.meta.json` the normalizer
// and split assignment.
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace glassvae::trajio
