#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "glassvae/errors.hpp"
#include "glassvae/periodic_graph.hpp"
#include "test_support.hpp"

using namespace glassvae;
using namespace glassvae::graph;

namespace {

trajio::AtomicConfiguration pair_config(double distance, double box = 12.0) {
    trajio::AtomicConfiguration c;
    c.box = {box, box, box};
    c.positions = {{1.0, 2.0, 3.0}, {std::fmod(1.0 - distance + box, box), 2.0, 3.0}};
    c.species = {"Cu", "Zr"};
    c.energy = -9.0;
    return c;
}

// All pairs i != j whose closest periodic image among the 27 neighbouring
// cells lies within the cutoff.
std::set<std::pair<std::uint32_t, std::uint32_t>> brute_force_edges(const trajio::AtomicConfiguration& c, double cutoff) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (i == j) continue;
            double best = 1e300;
            for (int nx = -1; nx <= 1; ++nx)
                for (int ny = -1; ny <= 1; ++ny)
                    for (int nz = -1; nz <= 1; ++nz) {
                        const Vec3 d{c.positions[i][0] - c.positions[j][0] + nx * c.box[0],
                                     c.positions[i][1] - c.positions[j][1] + ny * c.box[1],
                                     c.positions[i][2] - c.positions[j][2] + nz * c.box[2]};
                        best = std::min(best, norm(d));
                    }
            if (best <= cutoff) edges.emplace(i, j);
        }
    return edges;
}

trajio::AtomicConfiguration translated(trajio::AtomicConfiguration c, const Vec3& t) {
    for (auto& r : c.positions)
        for (int a = 0; a < 3; ++a) r[a] = wrap_coordinate(r[a] + t[a], c.box[a]);
    return c;
}

}  // namespace

TEST_CASE("min_image_displacement examples") {
    const Vec3 box{10, 10, 10};
    auto same = min_image_displacement({3, 4, 5}, {3, 4, 5}, box);
    CHECK(same.delta == Vec3{0, 0, 0});
    CHECK(same.dist == 0.0);

    auto wrapped = min_image_displacement({9.5, 0, 0}, {0.5, 0, 0}, box);
    CHECK(wrapped.delta[0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(wrapped.delta[1] == 0.0);
    CHECK(wrapped.dist == doctest::Approx(1.0).epsilon(1e-14));

    CHECK_THROWS_AS(min_image_displacement({0, 0, 0}, {1, 1, 1}, {10, 0, 10}), ArgumentError);
}

TEST_CASE("min_image_displacement: range, norm and translation properties") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 2000; ++k) {
        const Vec3 box{3.0 + 10 * u(rng), 3.0 + 10 * u(rng), 3.0 + 10 * u(rng)};
        const Vec3 ri{u(rng) * box[0], u(rng) * box[1], u(rng) * box[2]};
        const Vec3 rj{u(rng) * box[0], u(rng) * box[1], u(rng) * box[2]};
        const auto e = min_image_displacement(ri, rj, box);
        for (int a = 0; a < 3; ++a) {
            CHECK(e.delta[a] >= -box[a] / 2);
            CHECK(e.delta[a] < box[a] / 2);
        }
        CHECK(e.dist == norm(e.delta));
        const Vec3 t{u(rng) * 50 - 25, u(rng) * 50 - 25, u(rng) * 50 - 25};
        Vec3 ti{}, tj{};
        for (int a = 0; a < 3; ++a) {
            ti[a] = wrap_coordinate(ri[a] + t[a], box[a]);
            tj[a] = wrap_coordinate(rj[a] + t[a], box[a]);
        }
        const auto et = min_image_displacement(ti, tj, box);
        for (int a = 0; a < 3; ++a) CHECK(std::abs(et.delta[a] - e.delta[a]) < 1e-12);
    }
}

TEST_CASE("build_graph: two-atom examples") {
    auto species = testing::cuzr_species();
    trajio::EnergyNormalizer norm(-10.0, -8.0);
    auto near = build_graph(pair_config(3.0), 5.0, norm, species);
    CHECK(near.n_edges() == 2);
    CHECK(near.edge_attrs[0].dist == doctest::Approx(3.0).epsilon(1e-13));
    CHECK(*near.energy_norm == doctest::Approx(50.0));
    CHECK(near.species_of(0) == 0);
    CHECK(near.species_of(1) == 1);

    auto far = build_graph(pair_config(6.0, 13.0), 5.0, norm, species);
    CHECK(far.n_edges() == 0);
}

TEST_CASE("build_graph rejects a cutoff beyond half the box") {
    auto species = testing::cuzr_species();
    CHECK_THROWS_AS(build_graph(pair_config(3.0, 9.0), 5.0, {}, species), ArgumentError);
    CHECK_NOTHROW(build_graph(pair_config(3.0, 10.0), 5.0, {}, species));
}

TEST_CASE("build_graph edge set equals the 27-image brute force") {
    auto species = testing::cuzr_species();
    std::mt19937_64 rng(1001);
    for (int trial = 0; trial < 50; ++trial) {
        CAPTURE(trial);
        const Vec3 box{10.0 + trial % 3, 10.5, 11.0 + 0.1 * trial};
        auto c = testing::random_config(16, box, rng, 0.5);
        auto g = build_graph(c, 5.0, {}, species);
        std::set<std::pair<std::uint32_t, std::uint32_t>> got(g.edge_index.begin(), g.edge_index.end());
        CHECK(got.size() == g.n_edges());
        CHECK(got == brute_force_edges(c, 5.0));
    }
}

TEST_CASE("ConfigGraph structural invariants") {
    auto species = testing::cuzr_species();
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        auto c = testing::random_config(24, {9, 9, 9}, rng);
        auto g = build_graph(c, 4.0, {}, species);
        for (std::size_t i = 0; i < g.n_nodes; ++i) {
            double row = 0;
            for (std::size_t s = 0; s < g.n_species; ++s) {
                const double v = g.node_features[i * g.n_species + s];
                CHECK((v == 0.0 || v == 1.0));
                row += v;
            }
            CHECK(row == 1.0);
        }
        std::map<std::pair<std::uint32_t, std::uint32_t>, EdgeAttr> by_pair;
        for (std::size_t e = 0; e < g.n_edges(); ++e) {
            const auto& a = g.edge_attrs[e];
            CHECK(a.dist > 0.0);
            CHECK(a.dist <= 4.0);
            CHECK(std::abs(a.dist - norm(a.delta)) <= 1e-12 * a.dist);
            by_pair[g.edge_index[e]] = a;
        }
        for (const auto& [ij, a] : by_pair) {
            auto it = by_pair.find({ij.second, ij.first});
            REQUIRE(it != by_pair.end());
            for (int k = 0; k < 3; ++k) CHECK(it->second.delta[k] == -a.delta[k]);
        }
    }
}

TEST_CASE("translation leaves every edge attribute unchanged to 1e-12") {
    auto species = testing::cuzr_species();
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto c = testing::random_config(20, {10, 11, 12}, rng);
        auto g = build_graph(c, 5.0, {}, species);
        auto gt = build_graph(translated(c, {u(rng), u(rng), u(rng)}), 5.0, {}, species);
        REQUIRE(g.edge_index == gt.edge_index);
        for (std::size_t e = 0; e < g.n_edges(); ++e) {
            for (int k = 0; k < 3; ++k) CHECK(std::abs(g.edge_attrs[e].delta[k] - gt.edge_attrs[e].delta[k]) <= 1e-12);
            CHECK(std::abs(g.edge_attrs[e].dist - gt.edge_attrs[e].dist) <= 1e-12);
        }
    }
}

TEST_CASE("rotation in a free cell preserves distances and rotates displacements") {
    auto species = testing::cuzr_species();
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n(0.0, 1.0);
    const double big = 1000.0;
    for (int trial = 0; trial < 20; ++trial) {
        // Random orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
        std::array<Vec3, 3> q{};
        for (int r = 0; r < 3; ++r) {
            Vec3 v{n(rng), n(rng), n(rng)};
            for (int p = 0; p < r; ++p) v = v - dot(v, q[p]) * q[p];
            q[r] = (1.0 / norm(v)) * v;
        }
        auto c = testing::random_config(16, {6, 6, 6}, rng);
        c.box = {big, big, big};
        auto rotated = c;
        for (std::size_t i = 0; i < c.size(); ++i) {
            Vec3 centered{c.positions[i][0] - 3, c.positions[i][1] - 3, c.positions[i][2] - 3};
            for (int a = 0; a < 3; ++a) c.positions[i][a] = big / 2 + centered[a];
            for (int a = 0; a < 3; ++a) rotated.positions[i][a] = big / 2 + dot(q[a], centered);
        }
        auto g = build_graph(c, 4.0, {}, species);
        auto gr = build_graph(rotated, 4.0, {}, species);
        REQUIRE(g.edge_index == gr.edge_index);
        for (std::size_t e = 0; e < g.n_edges(); ++e) {
            CHECK(std::abs(g.edge_attrs[e].dist - gr.edge_attrs[e].dist) <= 1e-12);
            for (int a = 0; a < 3; ++a) CHECK(std::abs(dot(q[a], g.edge_attrs[e].delta) - gr.edge_attrs[e].delta[a]) <= 1e-12);
        }
    }
}

TEST_CASE("graph JSON export") {
    auto g = build_graph(pair_config(3.0), 5.0, trajio::EnergyNormalizer(-10, -8), testing::cuzr_species());
    auto j = to_json(g);
    CHECK(j["edge_index"].size() == 2);
    CHECK(j["edge_attrs"][0].size() == 4);
    CHECK(j["node_features"][1] == std::vector<double>{0, 1});
    CHECK(j["energy_norm"].get<double>() == doctest::Approx(50.0));
}

TEST_CASE("compute_rdf: one pair in one hard bin") {
    std::vector<Vec3> pos{{1, 1, 1}, {3.5, 1, 1}};
    auto h = compute_rdf(pos, {10, 10, 10}, 5.0, 10, RdfMode::hard, 0.5);
    CHECK(h.bin_centers.front() == doctest::Approx(0.25));
    CHECK(h.bin_centers.back() == doctest::Approx(4.75));
    for (std::size_t b = 0; b < 10; ++b) CHECK(h.values[b] == (b == 4 ? 1.0 : 0.0));
}

TEST_CASE("compute_rdf: r_max beyond half box is rejected") {
    std::vector<Vec3> pos{{1, 1, 1}, {3.5, 1, 1}};
    CHECK_THROWS_AS(compute_rdf(pos, {10, 10, 8}, 5.0, 10, RdfMode::hard, 0.5), ArgumentError);
    CHECK_THROWS_AS(compute_rdf(pos, {10, 10, 10}, 5.0, 1, RdfMode::hard, 0.5), ArgumentError);
}

TEST_CASE("soft histogram converges to the hard histogram as the kernel narrows") {
    std::mt19937_64 rng(64);
    for (int trial = 0; trial < 20; ++trial) {
        auto c = testing::random_config(32, {10, 10, 10}, rng, 0.3);
        const double r_max = 5.0;
        const std::size_t bins = 64;
        const double width = 1e-4 * r_max / bins;
        auto hard = compute_rdf(c.positions, c.box, r_max, bins, RdfMode::hard, width);
        auto soft = compute_rdf(c.positions, c.box, r_max, bins, RdfMode::soft, width);
        double linf = 0, total = 0;
        for (std::size_t b = 0; b < bins; ++b) {
            linf = std::max(linf, std::abs(hard.values[b] - soft.values[b]));
            total += soft.values[b];
        }
        CHECK(linf < 1e-6);
        double hard_total = 0;
        for (double v : hard.values) hard_total += v;
        CHECK(total == doctest::Approx(hard_total).epsilon(1e-12));
    }
}

TEST_CASE("ideal-gas histogram follows the shell volume") {
    std::mt19937_64 rng(512);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<Vec3> pos(512);
    for (auto& r : pos) r = {u(rng), u(rng), u(rng)};
    const double L = 10.0, r_max = 5.0;
    const std::size_t bins = 16;
    auto h = compute_rdf(pos, {L, L, L}, r_max, bins, RdfMode::hard, r_max / bins);
    const double pairs = 512.0 * 511.0 / 2.0;
    const double dr = r_max / bins;
    int checked = 0;
    for (std::size_t b = 0; b < bins; ++b) {
        const double lo = b * dr, hi = lo + dr;
        const double expected = pairs * (4.0 / 3.0) * std::numbers::pi * (hi * hi * hi - lo * lo * lo) / (L * L * L);
        if (expected < 1000.0) continue;
        CAPTURE(b);
        CHECK(std::abs(h.values[b] - expected) / expected < 0.10);
        ++checked;
    }
    CHECK(checked >= 8);
}
