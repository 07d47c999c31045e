#pragma once
// Synthetic harmonic clusters: a B2 (CsCl-type) Cu/Zr lattice with Gaussian
// thermal jitter and an analytic pair energy over nearest-neighbour bonds,
//   E = N·e0 + ½ k Σ_bonds (d - d0)²,
// where d0 is the ideal nearest-neighbour distance (√3/2 · a).

#include <cstdint>
#include <utility>
#include <vector>

#include "glassvae/trajio.hpp"

namespace glassvae::synth {

struct SynthConfig {
    std::size_t cells = 2;  // per axis; 2 atoms per cell
    double lattice = 4.0;   // Å
    std::vector<double> temperatures{300, 500, 700, 900};
    std::size_t n_frames = 200;  // spread round-robin over temperatures
    double jitter_at_300k = 0.05;  // Å, scales with √(T/300)
    double e0 = -4.9;             // eV/atom
    double k_bond = 2.0;          // eV/Å²
    std::uint64_t seed = 0;
};

trajio::SpeciesMap species();  // 1 = Cu, 2 = Zr

// Ideal sites in id order and their species.
std::vector<std::pair<Vec3, std::string>> lattice_sites(const SynthConfig& config);
// Nearest-neighbour site pairs (i < j).
std::vector<std::pair<std::size_t, std::size_t>> bonds(const SynthConfig& config);

double harmonic_energy(const trajio::AtomicConfiguration& config, const SynthConfig& synth);

std::vector<trajio::AtomicConfiguration> generate(const SynthConfig& config);

}  // namespace glassvae::synth
