#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "glassvae/errors.hpp"
#include "glassvae/trajio.hpp"
#include "test_support.hpp"

using namespace glassvae;
using namespace glassvae::trajio;

namespace {

const char* kThreeAtomDump =
    "ITEM: TIMESTEP\n"
    "42\n"
    "ITEM: NUMBER OF ATOMS\n"
    "3\n"
    "ITEM: BOX BOUNDS pp pp pp\n"
    "0.0 10.0\n"
    "0.0 10.0\n"
    "0.0 10.0\n"
    "ITEM: ATOMS id type x y z\n"
    "3 2 7.5 8.25 9.0\n"
    "1 1 1.0 2.0 3.0\n"
    "2 1 4.5 0.5 6.0\n";

std::string make_dump(std::size_t frames, std::size_t atoms, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-5.0, 20.0);
    std::ostringstream out;
    for (std::size_t f = 0; f < frames; ++f) {
        out << "ITEM: TIMESTEP\n" << f * 100 << "\nITEM: NUMBER OF ATOMS\n" << atoms << "\n";
        out << "ITEM: BOX BOUNDS pp pp pp\n-1.5 14.5\n-1.5 14.5\n-1.5 14.5\n";
        out << "ITEM: ATOMS id type x y z vx\n";
        std::vector<std::size_t> ids(atoms);
        for (std::size_t i = 0; i < atoms; ++i) ids[i] = i + 1;
        std::shuffle(ids.begin(), ids.end(), rng);
        for (auto id : ids) out << id << ' ' << (id % 2 ? 1 : 2) << ' ' << u(rng) << ' ' << u(rng) << ' ' << u(rng) << " 0.0\n";
    }
    return out.str();
}

AtomicConfiguration with_energy(std::int64_t id, double e, double tag = 300.0) {
    AtomicConfiguration c;
    c.frame_id = id;
    c.energy = e;
    c.temperature_tag = tag;
    c.box = {10, 10, 10};
    c.positions = {{1, 1, 1}, {2, 2, 2}};
    c.species = {"Cu", "Zr"};
    return c;
}

}  // namespace

TEST_CASE("species map parsing") {
    std::istringstream in("# CuZr\n1 = Cu\n\n2=Zr  # big one\n");
    auto m = SpeciesMap::parse(in);
    CHECK(m.labels() == std::vector<std::string>{"Cu", "Zr"});
    CHECK(m.label(2) == "Zr");
    CHECK(m.index_of("Zr") == 1);
    CHECK_THROWS_AS(m.label(3), LookupError);

    std::istringstream bad("1=Cu\nx=Zr\n");
    CHECK_THROWS_AS(SpeciesMap::parse(bad), ParseError);
}

TEST_CASE("parse_dump: hand-written 3-atom frame") {
    std::istringstream in(kThreeAtomDump);
    auto frames = parse_dump(in, testing::cuzr_species(), 650.0);
    REQUIRE(frames.size() == 1);
    const auto& c = frames[0];
    CHECK(c.frame_id == 42);
    CHECK(c.temperature_tag == 650.0);
    CHECK(c.box == Vec3{10, 10, 10});
    CHECK_FALSE(c.energy.has_value());
    CHECK(c.species == std::vector<std::string>{"Cu", "Cu", "Zr"});
    CHECK(c.positions[0] == Vec3{1.0, 2.0, 3.0});
    CHECK(c.positions[1] == Vec3{4.5, 0.5, 6.0});
    CHECK(c.positions[2] == Vec3{7.5, 8.25, 9.0});
}

TEST_CASE("parse_dump: empty stream") {
    std::istringstream in("");
    CHECK(parse_dump(in, testing::cuzr_species()).empty());
}

TEST_CASE("parse_dump: two frames of 108 atoms, wrapped and ordered by id") {
    std::istringstream in(make_dump(2, 108, 3));
    auto frames = parse_dump(in, testing::cuzr_species());
    REQUIRE(frames.size() == 2);
    for (const auto& c : frames) {
        CHECK(c.size() == 108);
        CHECK(c.box == Vec3{16, 16, 16});
        CHECK_NOTHROW(validate(c, nullptr));
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(c.species[i] == ((i + 1) % 2 ? "Cu" : "Zr"));
    }
    CHECK(frames[1].frame_id == 100);
}

TEST_CASE("parse_dump: scaled coordinates") {
    std::istringstream in(
        "ITEM: TIMESTEP\n0\nITEM: NUMBER OF ATOMS\n2\nITEM: BOX BOUNDS pp pp pp\n0 4\n0 8\n0 10\n"
        "ITEM: ATOMS id type xs ys zs\n1 1 0.5 0.25 0.1\n2 2 1.25 -0.5 0.0\n");
    auto f = parse_dump(in, testing::cuzr_species());
    CHECK(f[0].positions[0] == Vec3{2.0, 2.0, 1.0});
    CHECK(f[0].positions[1] == Vec3{1.0, 4.0, 0.0});
}

TEST_CASE("parse_dump: error paths") {
    auto species = testing::cuzr_species();
    SUBCASE("malformed header names the line") {
        std::istringstream in("ITEM: TIMESTEP\n0\nITEM: NUMBER OF ATOMZ\n3\n");
        try {
            parse_dump(in, species);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    SUBCASE("fewer atom rows than declared") {
        std::string text = kThreeAtomDump;
        text = text.substr(0, text.rfind("2 1 4.5"));
        std::istringstream in(text);
        CHECK_THROWS_AS(parse_dump(in, species), FormatError);
    }
    SUBCASE("next frame begins before the atom block ends") {
        std::string text = kThreeAtomDump;
        text.replace(text.find("NUMBER OF ATOMS\n3"), 17, "NUMBER OF ATOMS\n4");
        text += kThreeAtomDump;
        std::istringstream in(text);
        CHECK_THROWS_AS(parse_dump(in, species), FormatError);
    }
    SUBCASE("triclinic box is rejected") {
        std::string text = kThreeAtomDump;
        text.replace(text.find("BOX BOUNDS pp pp pp"), 19, "BOX BOUNDS xy xz yz pp pp pp");
        std::istringstream in(text);
        CHECK_THROWS_AS(parse_dump(in, species), FormatError);
    }
    SUBCASE("tilt factors in bounds rows are rejected") {
        std::string text = kThreeAtomDump;
        text.replace(text.find("0.0 10.0\n"), 9, "0.0 10.0 0.5\n");
        std::istringstream in(text);
        CHECK_THROWS_AS(parse_dump(in, species), FormatError);
    }
    SUBCASE("unknown atom type") {
        std::string text = kThreeAtomDump;
        text.replace(text.find("3 2 7.5"), 7, "3 5 7.5");
        std::istringstream in(text);
        CHECK_THROWS_AS(parse_dump(in, species), LookupError);
    }
}

TEST_CASE("write_dump then parse_dump reproduces configurations field-for-field") {
    std::mt19937_64 rng(99);
    auto species = testing::cuzr_species();
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<AtomicConfiguration> configs;
        for (int f = 0; f < 3; ++f) {
            auto c = testing::random_config(5 + trial, {7.3 + trial, 9.1, 11.9}, rng, 0.1);
            c.frame_id = trial * 10 + f;
            c.temperature_tag = 500.0;
            configs.push_back(c);
        }
        std::stringstream buf;
        write_dump(buf, configs, species);
        auto back = parse_dump(buf, species, 500.0);
        CHECK(back == configs);
    }
}

TEST_CASE("join_energies matches by frame id") {
    std::vector<AtomicConfiguration> configs;
    for (std::int64_t id : {0, 1, 2, 3, 4}) configs.push_back(with_energy(id, 0.0));
    for (auto& c : configs) c.energy.reset();

    SUBCASE("direct assignment") {
        auto out = join_energies({configs[0]}, EnergyTable{{0, -4.9}});
        CHECK(*out[0].energy == -4.9);
    }
    SUBCASE("shuffled table") {
        std::istringstream csv("frame_id,energy_eV\n3,-3.0\n0,0.5\n4,-4.0\n2,-2.0\n1,-1.0\n");
        auto out = join_energies(configs, parse_energy_csv(csv));
        CHECK(*out[0].energy == 0.5);
        for (std::size_t i = 1; i < out.size(); ++i) CHECK(*out[i].energy == -static_cast<double>(i));
    }
    SUBCASE("missing id is named") {
        configs.push_back(with_energy(7, 0.0));
        try {
            join_energies(configs, EnergyTable{{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}});
            FAIL("expected LookupError");
        } catch (const LookupError& e) {
            CHECK(std::string(e.what()).find('7') != std::string::npos);
        }
    }
}

TEST_CASE("energy csv errors name the line") {
    std::istringstream csv("frame_id,energy_eV\n1,-4.0\n2;-3.0\n");
    try {
        parse_energy_csv(csv);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("fit_normalizer") {
    const std::vector<double> e{-5.0, -4.0};
    auto n = fit_normalizer(e);
    CHECK(n.normalize(-5.0) == 0.0);
    CHECK(n.normalize(-4.0) == 100.0);
    CHECK(n.normalize(-4.5) == doctest::Approx(50.0).epsilon(1e-12));

    const std::vector<double> flat{-5.0, -5.0};
    auto d = fit_normalizer(flat);
    CHECK(d.degenerate());
    CHECK(d.normalize(-5.0) == 0.0);
    CHECK(d.normalize(3.0) == 0.0);

    CHECK_THROWS_AS(fit_normalizer(std::vector<double>{}), ArgumentError);
}

TEST_CASE("normalizer round trip holds to 1e-9 relative on random ranges") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> lo(-600.0, -400.0), width(1e-3, 50.0), t(-0.5, 1.5);
    for (int k = 0; k < 1000; ++k) {
        const double a = lo(rng);
        const double b = a + width(rng);
        EnergyNormalizer n(a, b);
        const double e = a + t(rng) * (b - a);
        CHECK(std::abs(n.denormalize(n.normalize(e)) - e) <= 1e-9 * std::abs(e));
    }
}

TEST_CASE("split_dataset") {
    SUBCASE("10 configs at 0.8 give 8/2") {
        std::vector<AtomicConfiguration> configs;
        for (int i = 0; i < 10; ++i) configs.push_back(with_energy(i, -i));
        auto ds = split_dataset(configs, 0.8, 1);
        CHECK(ds.train_indices().size() == 8);
        CHECK(ds.test_indices().size() == 2);
    }
    SUBCASE("stratified by temperature tag") {
        std::vector<AtomicConfiguration> configs;
        for (int t = 0; t < 5; ++t)
            for (int i = 0; i < 10; ++i) configs.push_back(with_energy(t * 10 + i, -i - t, 300.0 + 100.0 * t));
        auto ds = split_dataset(configs, 0.8, 17);
        std::map<double, int> train_per_tag, test_per_tag;
        for (std::size_t i = 0; i < ds.configs.size(); ++i)
            (ds.split[i] == Split::train ? train_per_tag : test_per_tag)[ds.configs[i].temperature_tag]++;
        for (int t = 0; t < 5; ++t) {
            CHECK(train_per_tag[300.0 + 100.0 * t] == 8);
            CHECK(test_per_tag[300.0 + 100.0 * t] == 2);
        }
    }
    SUBCASE("deterministic, disjoint and covering; normalizer fit on train only") {
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(-500, -400);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<AtomicConfiguration> configs;
            const int n = 2 + trial * 3;
            for (int i = 0; i < n; ++i) configs.push_back(with_energy(i, u(rng), 100.0 * (i % 3)));
            const double ratio = 0.1 + 0.04 * trial;
            auto a = split_dataset(configs, ratio, 1234 + trial);
            auto b = split_dataset(configs, ratio, 1234 + trial);
            CHECK(a.split == b.split);
            auto tr = a.train_indices(), te = a.test_indices();
            CHECK(tr.size() + te.size() == static_cast<std::size_t>(n));
            std::set<std::size_t> all(tr.begin(), tr.end());
            all.insert(te.begin(), te.end());
            CHECK(all.size() == static_cast<std::size_t>(n));
            CHECK(std::abs(static_cast<double>(tr.size()) - ratio * n) <= 1.0);
            double mn = 1e300, mx = -1e300;
            for (auto i : tr) {
                mn = std::min(mn, *a.configs[i].energy);
                mx = std::max(mx, *a.configs[i].energy);
            }
            CHECK(a.energy_norm.e_min() == mn);
            CHECK(a.energy_norm.e_max() == mx);
        }
    }
    SUBCASE("argument errors") {
        CHECK_THROWS_AS(split_dataset({with_energy(0, 1)}, 0.8, 1), ArgumentError);
        CHECK_THROWS_AS(split_dataset({with_energy(0, 1), with_energy(1, 2)}, 1.0, 1), ArgumentError);
        auto c = with_energy(1, 2);
        c.energy.reset();
        CHECK_THROWS_AS(split_dataset({with_energy(0, 1), c}, 0.5, 1), ArgumentError);
    }
}

TEST_CASE("cap_per_temperature keeps at most k frames per tag") {
    std::vector<AtomicConfiguration> configs;
    for (int i = 0; i < 30; ++i) configs.push_back(with_energy(i, 0, i < 20 ? 300.0 : 400.0));
    auto kept = cap_per_temperature(configs, 5, 3);
    CHECK(kept.size() == 10);
    CHECK(std::is_sorted(kept.begin(), kept.end(), [](auto& a, auto& b) { return a.frame_id < b.frame_id; }));
}

TEST_CASE("dataset JSONL save/load round trip") {
    std::vector<AtomicConfiguration> configs;
    std::mt19937_64 rng(12);
    for (int i = 0; i < 6; ++i) {
        auto c = testing::random_config(4, {8, 8, 8}, rng);
        c.frame_id = i;
        c.energy = -4.9 * 4 + 0.013 * i;
        c.temperature_tag = 700;
        configs.push_back(c);
    }
    auto ds = split_dataset(configs, 0.5, 9);
    ds.species = testing::cuzr_species();
    auto path = std::filesystem::temp_directory_path() / "glassvae_ds_roundtrip.jsonl";
    save_dataset(path, ds);
    auto back = load_dataset(path);
    CHECK(back.configs == ds.configs);
    CHECK(back.species.types() == ds.species.types());
    CHECK(back.split == ds.split);
    CHECK(back.energy_norm.e_min() == ds.energy_norm.e_min());
    CHECK(back.energy_norm.e_max() == ds.energy_norm.e_max());
}

TEST_CASE("validate rejects broken configurations") {
    auto c = with_energy(0, 0);
    CHECK_NOTHROW(validate(c, nullptr));
    auto one = c;
    one.positions.pop_back();
    one.species.pop_back();
    CHECK_THROWS_AS(validate(one, nullptr), ArgumentError);
    auto outside = c;
    outside.positions[0][1] = 10.0;
    CHECK_THROWS_AS(validate(outside, nullptr), ArgumentError);
    auto alien = c;
    alien.species[0] = "Al";
    auto species = testing::cuzr_species();
    CHECK_THROWS_AS(validate(alien, &species), ArgumentError);
}
