#include <doctest.h>

#include <fstream>
#include <iterator>
#include <string>

#include "glassvae/checkpoint.hpp"
#include "glassvae/errors.hpp"
#include "test_support.hpp"

using namespace glassvae;
using glassvae::testing::scratch_dir;
using glassvae::testing::tiny_model;

namespace {

ckpt::Checkpoint sample_checkpoint() {
    ckpt::Checkpoint c;
    auto mc = tiny_model(9);
    mc.edge_shift = {0.1, -0.2, 0.3, 3.4};
    mc.edge_scale = {1.9, 2.0, 2.1, 0.1};
    c.params = model::ModelParams::init(mc);
    c.adam = train::AdamState::zeros_like(c.params);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& t : c.adam.m)
        for (double& v : t.values()) v = n(rng);
    for (auto& t : c.adam.v)
        for (double& v : t.values()) v = std::abs(n(rng)) * 1e-7;
    c.adam.step = 1234;
    c.epoch = 17;
    c.train.epochs = 300;
    c.train.learning_rate = 3e-4;
    c.weights.alpha_rdf = 2.5;
    c.rdf.bins = 40;
    c.rdf.r_max = 3.9;
    c.cutoff = 3.8;
    c.normalizer = trajio::EnergyNormalizer(-80.1234567890123, -77.5);
    c.species = trajio::SpeciesMap({{1, "Cu"}, {2, "Zr"}});
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
    const auto dir = scratch_dir("ckpt_roundtrip");
    const auto c = sample_checkpoint();
    ckpt::save(dir / "a.ckpt", c);
    const auto back = ckpt::load(dir / "a.ckpt");
    CHECK(back.params == c.params);
    CHECK(back.params.config() == c.params.config());
    CHECK(back.adam == c.adam);
    CHECK(back.epoch == c.epoch);
    CHECK(back.train == c.train);
    CHECK(back.weights == c.weights);
    CHECK(back.rdf.bins == 40);
    CHECK(back.rdf.r_max == 3.9);
    CHECK(back.cutoff == 3.8);
    CHECK(back.normalizer.e_min() == c.normalizer.e_min());
    CHECK(back.normalizer.e_max() == c.normalizer.e_max());
    CHECK(back.species.types() == c.species.types());

    // Saving what was loaded reproduces the file byte for byte.
    ckpt::save(dir / "b.ckpt", back);
    CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
    CHECK_FALSE(std::filesystem::exists(dir / "a.ckpt.tmp"));
}

TEST_CASE("corrupt checkpoints are rejected") {
    const auto dir = scratch_dir("ckpt_corrupt");
    ckpt::save(dir / "good.ckpt", sample_checkpoint());
    const auto good = slurp(dir / "good.ckpt");

    SUBCASE("missing file") { CHECK_THROWS_AS(ckpt::load(dir / "absent.ckpt"), IoError); }
    SUBCASE("bad magic") {
        auto b = good;
        b[0] = 'X';
        spit(dir / "c.ckpt", b);
        CHECK_THROWS_AS(ckpt::load(dir / "c.ckpt"), FormatError);
    }
    SUBCASE("unknown version") {
        auto b = good;
        b[8] = static_cast<char>(99);
        spit(dir / "c.ckpt", b);
        CHECK_THROWS_AS(ckpt::load(dir / "c.ckpt"), FormatError);
    }
    SUBCASE("truncated tensor data") {
        spit(dir / "c.ckpt", good.substr(0, good.size() - 8));
        CHECK_THROWS_AS(ckpt::load(dir / "c.ckpt"), FormatError);
    }
    SUBCASE("truncated header") {
        spit(dir / "c.ckpt", good.substr(0, 30));
        CHECK_THROWS_AS(ckpt::load(dir / "c.ckpt"), FormatError);
    }
    SUBCASE("trailing bytes") {
        spit(dir / "c.ckpt", good + "junk");
        CHECK_THROWS_AS(ckpt::load(dir / "c.ckpt"), FormatError);
    }
    SUBCASE("empty file") {
        spit(dir / "c.ckpt", "");
        CHECK_THROWS_AS(ckpt::load(dir / "c.ckpt"), FormatError);
    }
}
