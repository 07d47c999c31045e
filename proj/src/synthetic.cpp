#include "glassvae/synthetic.hpp"

#include <cmath>
#include <random>

#include "glassvae/errors.hpp"
#include "glassvae/periodic_graph.hpp"

namespace glassvae::synth {

trajio::SpeciesMap species() { return trajio::SpeciesMap({{1, "Cu"}, {2, "Zr"}}); }

std::vector<std::pair<Vec3, std::string>> lattice_sites(const SynthConfig& c) {
    if (c.cells == 0 || !(c.lattice > 0.0)) throw ArgumentError("lattice needs cells >= 1 and a positive spacing");
    std::vector<std::pair<Vec3, std::string>> sites;
    for (std::size_t x = 0; x < c.cells; ++x)
        for (std::size_t y = 0; y < c.cells; ++y)
            for (std::size_t z = 0; z < c.cells; ++z) {
                const Vec3 corner{x * c.lattice, y * c.lattice, z * c.lattice};
                sites.emplace_back(corner, "Cu");
                sites.emplace_back(corner + Vec3{c.lattice / 2, c.lattice / 2, c.lattice / 2}, "Zr");
            }
    return sites;
}

std::vector<std::pair<std::size_t, std::size_t>> bonds(const SynthConfig& c) {
    const auto sites = lattice_sites(c);
    const double box = c.lattice * static_cast<double>(c.cells);
    const double d0 = std::sqrt(3.0) / 2.0 * c.lattice;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < sites.size(); ++i)
        for (std::size_t j = i + 1; j < sites.size(); ++j) {
            const double d = graph::min_image_displacement(sites[i].first, sites[j].first, {box, box, box}).dist;
            if (std::abs(d - d0) < 1e-9) out.emplace_back(i, j);
        }
    return out;
}

double harmonic_energy(const trajio::AtomicConfiguration& config, const SynthConfig& c) {
    const double d0 = std::sqrt(3.0) / 2.0 * c.lattice;
    double e = c.e0 * static_cast<double>(config.size());
    for (const auto& [i, j] : bonds(c)) {
        const double d = graph::min_image_displacement(config.positions[i], config.positions[j], config.box).dist;
        e += 0.5 * c.k_bond * (d - d0) * (d - d0);
    }
    return e;
}

std::vector<trajio::AtomicConfiguration> generate(const SynthConfig& c) {
    if (c.temperatures.empty()) throw ArgumentError("at least one temperature is required");
    const auto sites = lattice_sites(c);
    const double box = c.lattice * static_cast<double>(c.cells);
    std::mt19937_64 rng(c.seed);
    std::vector<trajio::AtomicConfiguration> out;
    out.reserve(c.n_frames);
    for (std::size_t f = 0; f < c.n_frames; ++f) {
        const double t = c.temperatures[f % c.temperatures.size()];
        std::normal_distribution<double> jitter(0.0, c.jitter_at_300k * std::sqrt(t / 300.0));
        trajio::AtomicConfiguration a;
        a.box = {box, box, box};
        a.frame_id = static_cast<std::int64_t>(f);
        a.temperature_tag = t;
        for (const auto& [site, label] : sites) {
            Vec3 r{};
            for (int k = 0; k < 3; ++k) r[k] = wrap_coordinate(site[k] + jitter(rng), box);
            a.positions.push_back(r);
            a.species.push_back(label);
        }
        a.energy = harmonic_energy(a, c);
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace glassvae::synth
