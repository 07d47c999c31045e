#include "glassvae/periodic_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "glassvae/errors.hpp"

namespace glassvae::graph {

EdgeAttr min_image_displacement(const Vec3& r_i, const Vec3& r_j, const Vec3& box) {
    EdgeAttr e;
    for (int a = 0; a < 3; ++a) {
        const double length = box[a];
        if (!(length > 0.0)) throw ArgumentError("min_image_displacement: box components must be positive");
        const double half = 0.5 * length;
        const double shifted = r_i[a] - r_j[a] + half;
        double c = shifted - length * std::floor(shifted / length) - half;
        if (c >= half) c -= length;
        if (c < -half) c = -half;
        e.delta[a] = c;
    }
    e.dist = norm(e.delta);
    return e;
}

std::size_t ConfigGraph::species_of(std::size_t i) const {
    for (std::size_t s = 0; s < n_species; ++s)
        if (node_features[i * n_species + s] == 1.0) return s;
    return n_species;
}

ConfigGraph build_graph(const trajio::AtomicConfiguration& config, double cutoff, const trajio::EnergyNormalizer& normalizer,
                        const trajio::SpeciesMap& species) {
    trajio::validate(config, &species);
    if (!(cutoff > 0.0)) throw ArgumentError("cutoff must be positive");
    const double min_box = std::min({config.box[0], config.box[1], config.box[2]});
    if (cutoff > 0.5 * min_box) {
        throw ArgumentError("invalid cutoff " + std::to_string(cutoff) + " Å: exceeds half the smallest box edge (" +
                            std::to_string(0.5 * min_box) + " Å), periodic images would be ambiguous");
    }

    ConfigGraph g;
    g.n_nodes = config.size();
    g.n_species = species.size();
    g.box = config.box;
    g.reference_positions = config.positions;
    g.frame_id = config.frame_id;
    g.temperature_tag = config.temperature_tag;
    if (config.energy) g.energy_norm = normalizer.normalize(*config.energy);

    g.node_features.assign(g.n_nodes * g.n_species, 0.0);
    for (std::size_t i = 0; i < g.n_nodes; ++i) g.node_features[i * g.n_species + species.index_of(config.species[i])] = 1.0;

    for (std::size_t i = 0; i < g.n_nodes; ++i) {
        for (std::size_t j = i + 1; j < g.n_nodes; ++j) {
            const EdgeAttr e = min_image_displacement(config.positions[i], config.positions[j], config.box);
            if (e.dist == 0.0) {
                throw ArgumentError("frame " + std::to_string(config.frame_id) + ": atoms " + std::to_string(i) + " and " +
                                    std::to_string(j) + " coincide");
            }
            if (e.dist > cutoff) continue;
            g.edge_index.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
            g.edge_attrs.push_back(e);
            g.edge_index.emplace_back(static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(i));
            g.edge_attrs.push_back(EdgeAttr{{-e.delta[0], -e.delta[1], -e.delta[2]}, e.dist});
        }
    }
    return g;
}

nlohmann::json to_json(const ConfigGraph& g) {
    nlohmann::json j;
    j["frame_id"] = g.frame_id;
    j["n_nodes"] = g.n_nodes;
    j["n_species"] = g.n_species;
    auto& nf = j["node_features"] = nlohmann::json::array();
    for (std::size_t i = 0; i < g.n_nodes; ++i)
        nf.push_back(std::vector<double>(g.node_features.begin() + static_cast<long>(i * g.n_species),
                                         g.node_features.begin() + static_cast<long>((i + 1) * g.n_species)));
    auto& ei = j["edge_index"] = nlohmann::json::array();
    auto& ea = j["edge_attrs"] = nlohmann::json::array();
    for (std::size_t e = 0; e < g.n_edges(); ++e) {
        ei.push_back({g.edge_index[e].first, g.edge_index[e].second});
        const auto& a = g.edge_attrs[e];
        ea.push_back({a.delta[0], a.delta[1], a.delta[2], a.dist});
    }
    j["box"] = g.box;
    j["energy_norm"] = g.energy_norm ? nlohmann::json(*g.energy_norm) : nlohmann::json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------

std::pair<double, double> resolve_rdf(const RdfConfig& config, const Vec3& box) {
    const double half = 0.5 * std::min({box[0], box[1], box[2]});
    const double r_max = config.r_max.value_or(half);
    if (!(r_max > 0.0)) throw ArgumentError("rdf r_max must be positive");
    if (r_max > half * (1.0 + 1e-12))
        throw ArgumentError("rdf r_max " + std::to_string(r_max) + " Å exceeds half the smallest box edge (" +
                            std::to_string(half) + " Å)");
    if (config.bins < 2) throw ArgumentError("rdf needs at least 2 bins");
    const double width = config.kernel_width.value_or(r_max / static_cast<double>(config.bins));
    if (!(width > 0.0)) throw ArgumentError("rdf kernel width must be positive");
    return {r_max, width};
}

long hard_bin(double dist, double r_max, std::size_t bins) {
    if (!(dist > 0.0) || dist > r_max) return -1;
    const double bin_width = r_max / static_cast<double>(bins);
    auto b = static_cast<long>(std::ceil(dist / bin_width)) - 1;
    return std::clamp(b, 0L, static_cast<long>(bins) - 1);
}

void soft_bin_weights(double dist, double bin_width, double sigma, std::span<double> out) {
    const double inv = 1.0 / (2.0 * sigma * sigma);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < out.size(); ++b) {
        const double u = dist - (static_cast<double>(b) + 0.5) * bin_width;
        out[b] = -u * u * inv;
        best = std::max(best, out[b]);
    }
    double total = 0.0;
    for (double& w : out) {
        w = std::exp(w - best);
        total += w;
    }
    for (double& w : out) w /= total;
}

RdfHistogram compute_rdf(std::span<const Vec3> positions, const Vec3& box, double r_max, std::size_t bins, RdfMode mode,
                         double kernel_width) {
    RdfConfig cfg;
    cfg.r_max = r_max;
    cfg.bins = bins;
    cfg.kernel_width = kernel_width;
    resolve_rdf(cfg, box);

    RdfHistogram h;
    h.r_max = r_max;
    h.kernel_width = kernel_width;
    const double bin_width = r_max / static_cast<double>(bins);
    h.bin_centers.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) h.bin_centers[b] = (static_cast<double>(b) + 0.5) * bin_width;
    h.values.assign(bins, 0.0);

    std::vector<double> w(bins);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        for (std::size_t j = i + 1; j < positions.size(); ++j) {
            const double d = min_image_displacement(positions[i], positions[j], box).dist;
            if (!(d > 0.0) || d > r_max) continue;
            if (mode == RdfMode::hard) {
                h.values[static_cast<std::size_t>(hard_bin(d, r_max, bins))] += 1.0;
            } else {
                soft_bin_weights(d, bin_width, kernel_width, w);
                for (std::size_t b = 0; b < bins; ++b) h.values[b] += w[b];
            }
        }
    }
    return h;
}

RdfHistogram compute_rdf(std::span<const Vec3> positions, const Vec3& box, const RdfConfig& config) {
    const auto [r_max, width] = resolve_rdf(config, box);
    return compute_rdf(positions, box, r_max, config.bins, config.mode, width);
}

}  // namespace glassvae::graph
