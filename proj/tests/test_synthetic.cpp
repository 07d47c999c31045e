#include <doctest.h>

#include <cmath>
#include <set>

#include "glassvae/errors.hpp"
#include "glassvae/periodic_graph.hpp"
#include "glassvae/synthetic.hpp"

using namespace glassvae;
using namespace glassvae::synth;

TEST_CASE("B2 lattice sites and bonds") {
    SynthConfig c;
    const auto sites = lattice_sites(c);
    REQUIRE(sites.size() == 16);
    std::size_t cu = 0;
    for (const auto& [r, label] : sites) cu += label == "Cu";
    CHECK(cu == 8);
    // Every site has 8 nearest neighbours of the other species: 16·8/2 bonds.
    const auto b = bonds(c);
    CHECK(b.size() == 64);
    std::vector<int> degree(16, 0);
    for (const auto& [i, j] : b) {
        CHECK(i < j);
        CHECK(sites[i].second != sites[j].second);
        ++degree[i];
        ++degree[j];
    }
    for (int d : degree) CHECK(d == 8);
    c.cells = 3;
    CHECK(bonds(c).size() == 54 * 8 / 2);
}

TEST_CASE("harmonic energy examples") {
    SynthConfig c;
    c.jitter_at_300k = 0.0;
    c.n_frames = 4;
    const auto frames = generate(c);
    for (const auto& f : frames) CHECK(*f.energy == doctest::Approx(16 * -4.9).epsilon(1e-14));

    // Stretch one bond by moving a single atom along it: ½k·δ² for that bond
    // plus the changes in the atom's other seven bonds.
    auto f = frames[0];
    const double d0 = std::sqrt(3.0) / 2.0 * c.lattice;
    f.positions[0] = {0.0, 0.0, 0.0};
    const double e_ideal = harmonic_energy(f, c);
    f.positions[1] = {2.0 + 0.01, 2.0 + 0.01, 2.0 + 0.01};
    double expect = 16 * -4.9;
    for (const auto& [i, j] : bonds(c)) {
        if (i != 1 && j != 1) continue;
        const double d = graph::min_image_displacement(f.positions[i], f.positions[j], f.box).dist;
        expect += 0.5 * c.k_bond * (d - d0) * (d - d0);
    }
    CHECK(e_ideal == doctest::Approx(16 * -4.9).epsilon(1e-14));
    CHECK(harmonic_energy(f, c) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(harmonic_energy(f, c) > e_ideal);
}

TEST_CASE("generated frames: tags, wrapping, determinism and jitter scaling") {
    SynthConfig c;
    c.n_frames = 400;
    c.seed = 5;
    const auto a = generate(c);
    CHECK(a == generate(c));
    REQUIRE(a.size() == 400);
    std::set<std::int64_t> ids;
    for (std::size_t f = 0; f < a.size(); ++f) {
        CHECK(a[f].temperature_tag == c.temperatures[f % 4]);
        ids.insert(a[f].frame_id);
        for (const auto& r : a[f].positions)
            for (int k = 0; k < 3; ++k) {
                CHECK(r[k] >= 0.0);
                CHECK(r[k] < 8.0);
            }
    }
    CHECK(ids.size() == 400);

    // RMS displacement from the ideal site grows as √T.
    const auto sites = lattice_sites(c);
    auto rms = [&](double t) {
        double acc = 0;
        std::size_t n = 0;
        for (const auto& f : a) {
            if (f.temperature_tag != t) continue;
            for (std::size_t i = 0; i < f.size(); ++i) {
                const auto d = graph::min_image_displacement(f.positions[i], sites[i].first, f.box).dist;
                acc += d * d;
                ++n;
            }
        }
        return std::sqrt(acc / n);
    };
    CHECK(rms(300) == doctest::Approx(0.05 * std::sqrt(3.0)).epsilon(0.05));
    CHECK(rms(900) / rms(300) == doctest::Approx(std::sqrt(3.0)).epsilon(0.05));
}

TEST_CASE("synthetic config errors") {
    SynthConfig c;
    c.temperatures.clear();
    CHECK_THROWS_AS(generate(c), ArgumentError);
    c = SynthConfig{};
    c.cells = 0;
    CHECK_THROWS_AS(lattice_sites(c), ArgumentError);
}
