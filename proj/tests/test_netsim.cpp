#include "doctest.h"

#include "dora/analysis.hpp"
#include "dora/netsim.hpp"
#include "sim_fixtures.hpp"

using namespace dora;

TEST_CASE("scheduler fires in (time, seq) order and never travels backwards") {
    Scheduler sched;
    std::vector<int> order;
    sched.schedule(50, [&] { order.push_back(3); });
    sched.schedule(10, [&] {
        order.push_back(1);
        sched.schedule(5, [&] { order.push_back(2); });  // past: clamped to now
    });
    sched.schedule(50, [&] { order.push_back(4); });  // same time, later seq
    CHECK(sched.run(100));
    CHECK(order == std::vector<int>{1, 2, 3, 4});
    CHECK(sched.now() == 50);

    Scheduler starved;
    starved.schedule(0, [&] { starved.schedule(1, [] {}); });
    CHECK_FALSE(starved.run(1));  // budget exhausted with work left
}

TEST_CASE("optimistic all-honest clan concludes via cc with the true value") {
    auto sc = fixtures::optimistic(3, 1, 1, 3);
    auto report = run_scenario(sc);
    REQUIRE(report.liveness_ok);
    REQUIRE(report.rounds.size() == 3);
    for (const auto& r : report.rounds) {
        CHECK(r.concluded_all);
        CHECK(r.agreement_ok);
        CHECK(r.via == ConcludeVia::Cc);
        CHECK(r.s == sc.true_value);
        CHECK(r.abs_error == 0);
        CHECK(r.bound_ok);
        CHECK_FALSE(r.fallback_entered);
    }
}

TEST_CASE("identical config and seed give byte-identical reports") {
    auto sc = fixtures::adversarial_clan(5, NodeStrategy::ExtremeValue, 1'000, 500, 77);
    auto a = run_scenario(sc);
    auto b = run_scenario(sc);
    CHECK(a.serialize() == b.serialize());

    sc.seed = 78;
    auto c = run_scenario(sc);
    CHECK(a.serialize() != c.serialize());
}

TEST_CASE("message counters match the closed form in the optimistic scenario") {
    for (std::uint32_t n_c : {3u, 5u, 7u}) {
        for (std::uint32_t n_a : {1u, 3u}) {
            auto sc = fixtures::optimistic(n_c, n_a, 1, 1);
            auto report = run_scenario(sc);
            REQUIRE(report.liveness_ok);
            ComplexityParams params;
            params.f_d = 1;
            params.n_c = n_c;
            params.n_a = n_a;
            std::uint64_t expected = expected_message_count(params, ProtocolPath::Cc);
            std::uint64_t measured = report.counters.total_count();
            CHECK(measured == expected);
            CHECK(report.counters.count[Counters::Feed] == 3 * n_c);
            CHECK(report.counters.count[Counters::Value] == n_c * n_a);
            CHECK(report.counters.count[Counters::VProp] == n_c * n_a);
            CHECK(report.counters.count[Counters::VoteVp] == n_c * n_a);
            CHECK(report.counters.count[Counters::VPost] == n_a);
            CHECK(report.counters.count[Counters::FtPost] == 0);
            CHECK(report.counters.count[Counters::VoteFt] == 0);
        }
    }
}

TEST_CASE("all aggregators silent: liveness violation, demonstrating precondition (iii)") {
    auto sc = fixtures::optimistic(3, 1, 1, 1);
    CorruptSpec spec;
    spec.strategy = NodeStrategy::Silent;
    sc.corrupt[sc.aggregators[0]] = spec;
    auto report = run_scenario(sc);
    CHECK_FALSE(report.liveness_ok);
    CHECK(report.counters.count[Counters::FtPost] == 0);
    REQUIRE(report.rounds.size() >= 1);
    CHECK_FALSE(report.rounds[0].concluded_all);
}

TEST_CASE("noise wider than d forces the fallback and the median stays in honest bounds") {
    auto sc = fixtures::fallback_forcing(4, NodeStrategy::Honest, 5, 0);
    auto report = run_scenario(sc);
    REQUIRE(report.liveness_ok);
    for (const auto& r : report.rounds) {
        CHECK(r.concluded_all);
        CHECK(r.via == ConcludeVia::Fallback);
        CHECK(r.fallback_entered);
        REQUIRE(r.has_fb_bounds);
        CHECK(r.s >= r.hmin_fb);
        CHECK(r.s <= r.hmax_fb);
        CHECK(r.bound_ok);
    }
    CHECK(report.counters.count[Counters::FtPost] >= 1);
}

TEST_CASE("fallback with byzantine extremes still lands inside honest bounds") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        auto sc = fixtures::fallback_forcing(7, NodeStrategy::ExtremeValue, seed, 2);
        auto report = run_scenario(sc);
        REQUIRE(report.liveness_ok);
        for (const auto& r : report.rounds) {
            CHECK(r.concluded_all);
            CHECK(r.agreement_ok);
            CHECK(r.bound_ok);
        }
    }
}

TEST_CASE("delay-forced fallback: node-to-aggregator delays beyond t_fallback") {
    auto sc = fixtures::optimistic(3, 1, 1, 1);
    sc.name = "delay_forced";
    sc.t_fallback = 10'000;
    sc.delays.node_to_agg = {DelayKind::Fixed, 200'000, 0, 0, {}};  // every VALUE and vote late
    sc.delays.cap = 500'000;
    auto report = run_scenario(sc);
    REQUIRE(report.liveness_ok);
    REQUIRE(report.rounds.size() == 1);
    CHECK(report.rounds[0].concluded_all);
    CHECK(report.rounds[0].agreement_ok);
    CHECK(report.rounds[0].bound_ok);
    CHECK(report.rounds[0].fallback_entered);
    CHECK(report.counters.count[Counters::FtPost] >= 1);
}

TEST_CASE("stall-fallback strategy alone cannot trigger an ftpost") {
    auto sc = fixtures::adversarial_clan(5, NodeStrategy::StallFallback, 1'000, 100, 11);
    auto report = run_scenario(sc);
    REQUIRE(report.liveness_ok);
    CHECK(report.counters.count[Counters::FtPost] == 0);  // f_c votes < f_c + 1
    for (const auto& r : report.rounds) {
        CHECK(r.via == ConcludeVia::Cc);
        CHECK(r.bound_ok);
    }
}

TEST_CASE("withholding aggregator delays nothing when an honest aggregator exists") {
    auto sc = fixtures::adversarial_clan(3, NodeStrategy::WithholdPost, 1'000, 100, 12, true);
    auto report = run_scenario(sc);
    REQUIRE(report.liveness_ok);
    for (const auto& r : report.rounds) {
        CHECK(r.concluded_all);
        CHECK(r.agreement_ok);
        CHECK(r.bound_ok);
    }
}

TEST_CASE("equivocating nodes cannot break agreement or bounds") {
    for (std::uint64_t seed : {21ull, 22ull, 23ull}) {
        auto sc = fixtures::adversarial_clan(5, NodeStrategy::Equivocate, 2'000, 300, seed, true);
        auto report = run_scenario(sc);
        REQUIRE(report.liveness_ok);
        for (const auto& r : report.rounds) {
            CHECK(r.concluded_all);
            CHECK(r.agreement_ok);
            CHECK(r.bound_ok);
        }
    }
}

TEST_CASE("cluster poison drags the mean but never past the widened interval") {
    auto sc = fixtures::cluster_poison(3, 10'000, 0, 31);
    auto report = run_scenario(sc);
    REQUIRE(report.liveness_ok);
    bool saw_poisoned_round = false;
    for (const auto& r : report.rounds) {
        CHECK(r.bound_ok);
        CHECK(r.agreement_ok);
        if (r.via == ConcludeVia::Cc && r.abs_error > 0) saw_poisoned_round = true;
        if (r.via == ConcludeVia::Cc) {
            CHECK(r.s >= r.hmin_cc - sc.d.d);
            CHECK(r.s <= r.hmax_cc + sc.d.d);
        }
    }
    CHECK(saw_poisoned_round);
}

TEST_CASE("sweep over d: cc-conclusion fraction is nondecreasing") {
    auto base = fixtures::adversarial_clan(5, NodeStrategy::ExtremeValue, 0, 500, 1);
    base.rounds = 2;
    std::vector<std::int64_t> d_values = {0, 500, 1'000, 2'000, 4'000};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6};
    auto rows = sweep(base, "d", d_values, seeds);
    REQUIRE(rows.size() == d_values.size() * seeds.size());

    std::map<std::int64_t, std::uint32_t> cc_by_d;
    for (const auto& row : rows) {
        CHECK(row.violations == 0);
        cc_by_d[row.axis_value] += row.cc_rounds;
    }
    std::uint32_t prev = 0;
    bool first = true;
    for (auto& [d, cc] : cc_by_d) {
        if (!first) CHECK(cc >= prev);
        prev = cc;
        first = false;
    }
    CHECK(cc_by_d[4'000] > cc_by_d[0]);

    CHECK_THROWS_AS(sweep(base, "not_an_axis", {1}, {1}), ConfigError);
    CHECK(sweep(base, "d", {1}, {}).empty());
}

TEST_CASE("sampled aggregator families: honest-family fraction grows with n_a") {
    auto base = fixtures::optimistic(3, 1, 1, 1);
    base.n_t = 12;
    base.f_t = 3;
    // WithholdPost corruption only disables the aggregator role, so liveness
    // fails exactly when the sampled family is all-corrupt (hypergeometric).
    base.sample_corrupt = 4;
    base.sample_corrupt_spec.strategy = NodeStrategy::WithholdPost;
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 40; ++s) seeds.push_back(s);

    auto count_live = [&](std::uint32_t n_a) {
        Scenario sc = apply_axis(base, "n_a", n_a);
        std::uint32_t live = 0;
        for (auto seed : seeds) {
            sc.seed = seed;
            auto report = run_scenario(sc);
            if (report.liveness_ok) ++live;
        }
        return live;
    };
    // more aggregators -> more seeds with at least one honest aggregator
    std::uint32_t live1 = count_live(1);
    std::uint32_t live5 = count_live(5);
    CHECK(live5 >= live1);
    CHECK(live5 == 40);  // 4 corrupt nodes cannot cover a family of 5
    CHECK(live1 <= 36);  // about a third of single-aggregator draws are corrupt
}

TEST_CASE("two variables run independent clans to conclusion") {
    auto sc = fixtures::optimistic(3, 1, 1, 2);
    sc.n_t = 8;
    sc.f_t = 2;
    sc.clans = {{0, 1, 2}, {3, 4, 5}};
    sc.aggregators = {6};
    auto report = run_scenario(sc);
    REQUIRE(report.liveness_ok);
    REQUIRE(report.rounds.size() == 4);  // 2 rounds x 2 variables
    for (const auto& r : report.rounds) {
        CHECK(r.concluded_all);
        CHECK(r.s == sc.true_value);
    }
}

TEST_CASE("zero-round run produces zero traffic") {
    auto sc = fixtures::optimistic(3, 1, 1, 1);
    sc.rounds = 0;
    auto report = run_scenario(sc);
    CHECK(report.liveness_ok);
    CHECK(report.rounds.empty());
    CHECK(report.counters.total_count() == 0);
    CHECK(report.counters.total_bytes() == 0);
}

TEST_CASE("fallback traffic scales quadratically with the tribe") {
    auto small = fixtures::fallback_forcing(4, NodeStrategy::Honest, 3, 0);
    small.rounds = 1;
    auto big = fixtures::fallback_forcing(13, NodeStrategy::Honest, 3, 0);
    big.rounds = 1;
    auto rs = run_scenario(small);
    auto rb = run_scenario(big);
    REQUIRE(rs.liveness_ok);
    REQUIRE(rb.liveness_ok);
    double ratio = static_cast<double>(rb.counters.bytes[Counters::VProp]) /
                   static_cast<double>(rs.counters.bytes[Counters::VProp]);
    // n_t grew 3.25x; proposal bytes carry n_t * (2 f_t + 1), far beyond linear
    CHECK(ratio > 6.0);
}

TEST_CASE("per-node clock offsets shift timing but not agreement") {
    auto base = fixtures::optimistic(3, 1, 1, 2);
    auto plain = run_scenario(base);

    auto skewed = base;
    skewed.clock_offset[0] = 300'000;  // a few hundred milliseconds of drift
    skewed.clock_offset[1] = -150'000;
    auto drifted = run_scenario(skewed);

    REQUIRE(plain.liveness_ok);
    REQUIRE(drifted.liveness_ok);
    CHECK(drifted.serialize() != plain.serialize());  // timing differs
    for (std::size_t i = 0; i < drifted.rounds.size(); ++i) {
        CHECK(drifted.rounds[i].concluded_all);
        CHECK(drifted.rounds[i].agreement_ok);
        CHECK(drifted.rounds[i].s == plain.rounds[i].s);  // zero noise: same value
    }
}

TEST_CASE("scenario validation rejects inconsistent arithmetic") {
    auto sc = fixtures::optimistic(3, 1);
    sc.n_t = 3;
    sc.f_t = 1;  // 3 < 3*1+1
    CHECK_THROWS_AS(run_scenario(sc), ConfigError);

    sc = fixtures::optimistic(3, 1);
    sc.f_c = 2;  // clan of 3 cannot carry f_c 2
    CHECK_THROWS_AS(run_scenario(sc), ConfigError);

    sc = fixtures::optimistic(3, 1);
    sc.clans = {{0, 1, 99}};
    CHECK_THROWS_AS(run_scenario(sc), ConfigError);

    sc = fixtures::optimistic(3, 1);
    sc.sources.clear();
    CHECK_THROWS_AS(run_scenario(sc), ConfigError);
}
