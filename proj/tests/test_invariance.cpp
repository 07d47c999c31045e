#include <doctest.h>

#include <string>

#include "glassvae/invariance.hpp"
#include "glassvae/periodic_graph.hpp"
#include "test_support.hpp"

using namespace glassvae;
using namespace glassvae::inv;

TEST_CASE("fixtures are deterministic, dense enough and well separated") {
    for (std::size_t n : {16, 24, 32}) {
        const auto a = random_fixture(7, n);
        CHECK(a == random_fixture(7, n));
        CHECK_FALSE(a == random_fixture(8, n));
        REQUIRE(a.size() == n);
        CHECK_NOTHROW(trajio::validate(a));
        CHECK(a.box[0] >= 8.0);  // a 4 Å cutoff fits in half the box
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                CHECK(graph::min_image_displacement(a.positions[i], a.positions[j], a.box).dist >= 1.5);
    }
}

TEST_CASE("all checks pass on a fresh model") {
    CheckConfig cfg;
    cfg.n_fixtures = 6;
    cfg.n_permutations = 2;
    cfg.seed = 3;
    const auto params = model::ModelParams::init(glassvae::testing::tiny_model());
    for (const auto& r : run_all(params, cfg)) {
        CAPTURE(format(r));
        CHECK(r.pass);
        CHECK(r.n_cases > 0);
        CHECK_FALSE(r.failing_seed.has_value());
        CHECK(format(r).rfind("PASS " + r.property, 0) == 0);
    }
}

TEST_CASE("a violated tolerance names the property and the fixture seed") {
    CheckConfig cfg;
    cfg.n_fixtures = 3;
    cfg.seed = 40;
    cfg.rotation_tol = -1.0;
    const auto r = check_rotation(cfg);
    CHECK_FALSE(r.pass);
    REQUIRE(r.failing_seed.has_value());
    CHECK(*r.failing_seed == 40);
    const auto line = format(r);
    CHECK(line.rfind("FAIL free_cell_rotation_distances", 0) == 0);
    CHECK(line.find("seed=40") != std::string::npos);
}
