#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include "glassvae/errors.hpp"
#include "glassvae/metrics.hpp"
#include "glassvae/synthetic.hpp"
#include "test_support.hpp"

using namespace glassvae;
using namespace glassvae::metrics;
using glassvae::testing::scratch_dir;

namespace {

std::vector<std::string> lines_of(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST_CASE("rmse and r2 examples") {
    const std::vector<double> truth{1, 2, 4}, pred{1, 2, 3};
    CHECK(rmse(pred, truth) == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-15));
    // SS_tot = (1-7/3)² + (2-7/3)² + (4-7/3)² = 42/9, SS_res = 1.
    CHECK(r2(pred, truth) == doctest::Approx(1.0 - 9.0 / 42.0).epsilon(1e-15));
    CHECK(r2(truth, truth) == 1.0);
    CHECK(rmse(truth, truth) == 0.0);
    const std::vector<double> flat{2, 2, 2};
    CHECK_THROWS_AS(r2(pred, flat), ArgumentError);
    CHECK_THROWS_AS(rmse(pred, std::vector<double>{1, 2}), ShapeError);
    CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), ArgumentError);
}

TEST_CASE("r2 matches a long-double two-pass reference on offset data") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> t(500), p(500);
        for (std::size_t i = 0; i < t.size(); ++i) {
            t[i] = 1e6 + n(rng);
            p[i] = t[i] + 0.3 * n(rng);
        }
        long double mean = 0;
        for (double v : t) mean += v;
        mean /= t.size();
        long double ss_tot = 0, ss_res = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            ss_tot += (t[i] - mean) * (t[i] - mean);
            ss_res += (static_cast<long double>(t[i]) - p[i]) * (static_cast<long double>(t[i]) - p[i]);
        }
        CHECK(r2(p, t) == doctest::Approx(static_cast<double>(1.0L - ss_res / ss_tot)).epsilon(1e-9));
        CHECK(rmse(p, t) == doctest::Approx(static_cast<double>(std::sqrt(ss_res / t.size()))).epsilon(1e-9));
    }
}

TEST_CASE("KS statistic examples") {
    CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(ks_statistic({1, 2, 3}, {4, 5}) == 1.0);
    CHECK(ks_statistic({1, 2, 3}, {2, 3, 4}) == doctest::Approx(1.0 / 3.0));
    CHECK(ks_statistic({0, 10}, {5}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(ks_statistic({}, {1}), ArgumentError);

    // Large samples from one distribution: D ≈ O(1/√n).
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> a(20000), b(20000), c(20000);
    for (auto* v : {&a, &b}) for (double& x : *v) x = n(rng);
    for (double& x : c) x = n(rng) + 0.5;
    CHECK(ks_statistic(a, b) < 0.02);
    // Shifted by half a standard deviation: sup |Φ(x) - Φ(x - 0.5)| = 2Φ(0.25) - 1 ≈ 0.197.
    CHECK(ks_statistic(a, c) == doctest::Approx(0.1974).epsilon(0.1));
}

TEST_CASE("parity export writes one row per pair") {
    const auto dir = scratch_dir("metrics_parity");
    const std::vector<double> t{1.5, -2.25}, p{1.0, 0.125};
    parity_export(p, t, dir / "parity.csv");
    const auto l = lines_of(dir / "parity.csv");
    REQUIRE(l.size() == 3);
    CHECK(l[0] == "true,pred");
    CHECK(l[1] == "1.5,1");
    CHECK(l[2] == "-2.25,0.125");
    CHECK_THROWS_AS(parity_export(p, std::vector<double>{1.0}, dir / "x.csv"), ShapeError);
}

TEST_CASE("metrics JSON maps NaN to null") {
    MetricsReport r;
    r.energy_r2 = std::numeric_limits<double>::quiet_NaN();
    r.energy_rmse = 0.5;
    const auto j = to_json(r);
    CHECK(j.at("energy_r2").is_null());
    CHECK(j.at("energy_rmse_ev_per_atom") == 0.5);
}

TEST_CASE("rdf comparison: identical structures have zero gap, jitter widens it") {
    synth::SynthConfig sc;
    sc.jitter_at_300k = 0.0;
    sc.n_frames = 1;
    const auto ideal = synth::generate(sc)[0];
    graph::RdfConfig cfg;
    cfg.bins = 40;
    const auto same = rdf_compare(ideal.positions, ideal.positions, ideal.box, cfg);
    CHECK(same.gap == 0.0);
    CHECK(same.original.values.size() == 40);

    const std::vector<double> jitters{0.02, 0.05, 0.1, 0.2};
    std::vector<double> mean_gap(jitters.size(), 0.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::vector<double> gaps;
        for (double j : jitters) {
            sc.jitter_at_300k = j;
            sc.seed = seed;
            const auto f = synth::generate(sc)[0];
            gaps.push_back(rdf_compare(ideal.positions, f.positions, ideal.box, cfg).gap);
        }
        CHECK(gaps.front() < gaps.back());
        for (std::size_t k = 0; k < gaps.size(); ++k) mean_gap[k] += gaps[k] / 20.0;
    }
    for (std::size_t k = 1; k < mean_gap.size(); ++k) CHECK(mean_gap[k - 1] < mean_gap[k]);

    const auto dir = scratch_dir("metrics_rdf");
    write_rdf_csv(same, dir / "rdf.csv");
    const auto l = lines_of(dir / "rdf.csv");
    CHECK(l.size() == 41);
    CHECK(l[0] == "bin_center,g_true,g_recon");
}
