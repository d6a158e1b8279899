#include "doctest.h"

#include "dora/scenario.hpp"

using namespace dora;

TEST_CASE("bundled optimistic scenario loads and validates") {
    auto file = load_scenario_file(SCENARIO_DIR "/optimistic.json");
    CHECK(file.base.name == "optimistic");
    CHECK(file.base.n_t == 7);
    CHECK(file.base.f_t == 2);
    REQUIRE(file.base.clans.size() == 1);
    CHECK(file.base.clans[0].size() == 5);
    CHECK(file.base.f_c == 2);
    CHECK(file.base.aggregators == std::vector<NodeId>{5, 6});
    CHECK(file.base.d.d == 1000);
    CHECK(file.base.true_value == 19'605'500'000);
    CHECK(file.seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK_NOTHROW(file.base.validate());
}

TEST_CASE("bundled cluster poison scenario carries corruption and targeted delays") {
    auto file = load_scenario_file(SCENARIO_DIR "/cluster_poison.json");
    REQUIRE(file.base.corrupt.count(2) == 1);
    CHECK(file.base.corrupt.at(2).strategy == NodeStrategy::ClusterPoison);
    REQUIRE(file.base.corrupt.count(4) == 1);
    CHECK(file.base.delays.post_to_smr.kind == DelayKind::Targeted);
    CHECK(file.base.delays.post_to_smr.overrides.at({3, 3}) == 500'000);
}

TEST_CASE("scenario parse failures raise config errors") {
    CHECK_THROWS_AS(load_scenario_json("not json"), ConfigError);
    CHECK_THROWS_AS(load_scenario_json("{}"), ConfigError);  // missing sections
    CHECK_THROWS_AS(load_scenario_json(R"({
        "population": {"n_t": 4, "f_t": 1},
        "protocol": {"d": "zzz"},
        "sources": {"true_value": 1, "specs": []}
    })"),
                    ConfigError);
    CHECK_THROWS_AS(load_scenario_file("/nonexistent/path.json"), ConfigError);
}

TEST_CASE("default field values fill in") {
    auto file = load_scenario_json(R"({
        "population": {"n_t": 4, "f_t": 1, "clans": [[0, 1, 2]], "aggregators": [3]},
        "protocol": {"d": 5},
        "sources": {"f_d": 1, "true_value": "1.5", "specs": [{}, {}, {}]}
    })");
    CHECK(file.base.t_ds == 30'000'000);
    CHECK(file.base.t_fallback == 2'000'000);
    CHECK(file.base.variant == FeedVariant::Timer);
    CHECK(file.base.rounds == 1);
    CHECK(file.base.f_c == 1);  // derived from the clan size
    CHECK(file.base.sources.size() == 3);
    CHECK(file.base.sources[1].id == 1);  // sequential default ids
    CHECK(file.seeds == std::vector<std::uint64_t>{1});
}

TEST_CASE("synth spec loads") {
    auto spec = load_synth_spec_file(SCENARIO_DIR "/volatile.synth.json");
    REQUIRE(spec.segments.size() == 3);
    CHECK(spec.segments[1].noise_scale == 40);
    CHECK(spec.segments[1].end_price == 16'200'000'000);
    REQUIRE(spec.sources.size() == 7);
    CHECK(spec.sources[6].period_ms == 60'000);
    CHECK(spec.sources[0].noise_half_width == 4'000'000);
}
