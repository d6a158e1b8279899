#include "doctest.h"

#include <algorithm>

#include "dora/protocol.hpp"
#include "dora/rng.hpp"

using namespace dora;

namespace {

struct World {
    MacScheme scheme;
    ClanConfig clan;
    TribeConfig tribe;

    // tribe 0..3, clan {0,1,2}, aggregator {3}, f_c = 1, f_t = 1
    World()
        : scheme(0xBEEF, {0, 1, 2, 3, 4, 5, 6}) {
        clan.clan = {0, 1, 2};
        clan.f_c = 1;
        clan.aggregators = {3};
        clan.d = AgreementDistance{5};
        tribe.tribe = {0, 1, 2, 3};
        tribe.f_t = 1;
    }

    ValueMsg value(NodeId sender, Price v, RoundId r = 0,
                   MsgKind kind = MsgKind::ValueClan) const {
        return make_signed_value(scheme, kind, sender, r, 0, v);
    }
};

std::vector<ValueMsg> obs_of(const World& w, std::initializer_list<std::pair<NodeId, Price>> vals) {
    std::vector<ValueMsg> out;
    for (auto& [id, v] : vals) out.push_back(w.value(id, v));
    return out;
}

// Brute-force subset oracle for cluster existence.
bool subset_cluster_exists(const std::vector<Price>& values, std::size_t min_size, Price d) {
    std::size_t n = values.size();
    for (std::size_t mask = 1; mask < (1u << n); ++mask) {
        std::vector<Price> subset;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) subset.push_back(values[i]);
        }
        if (subset.size() < min_size) continue;
        auto [lo, hi] = std::minmax_element(subset.begin(), subset.end());
        if (*hi - *lo <= d) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("find_coherent_cluster examples") {
    World w;
    SUBCASE("identical values at zero distance") {
        auto cc = find_coherent_cluster(obs_of(w, {{0, 5}, {1, 5}}), 2, AgreementDistance{0});
        REQUIRE(cc.has_value());
        CHECK(cc->members.size() == 2);
    }
    SUBCASE("only the near pair qualifies") {
        auto cc = find_coherent_cluster(obs_of(w, {{0, 10}, {1, 12}, {2, 30}}), 2,
                                        AgreementDistance{3});
        REQUIRE(cc.has_value());
        REQUIRE(cc->members.size() == 2);
        CHECK(cc->members[0].value == 10);
        CHECK(cc->members[1].value == 12);
    }
    SUBCASE("no pair within distance") {
        CHECK_FALSE(find_coherent_cluster(obs_of(w, {{0, 10}, {1, 20}, {2, 30}}), 2,
                                          AgreementDistance{3})
                        .has_value());
    }
    SUBCASE("leftmost qualifying window wins and is maximal") {
        // windows: [10,12,14] spans 4 <= 5 from leftmost; 30 excluded
        auto cc = find_coherent_cluster(obs_of(w, {{0, 14}, {1, 10}, {2, 12}, {3, 30}}), 2,
                                        AgreementDistance{5});
        REQUIRE(cc.has_value());
        CHECK(cc->members.size() == 3);
        CHECK(cc->members.front().value == 10);
        CHECK(cc->members.back().value == 14);
    }
}

TEST_CASE("find_coherent_cluster agrees with the brute-force subset oracle") {
    World w;
    Rng rng(31337);
    for (int trial = 0; trial < 4000; ++trial) {
        std::size_t n = 1 + rng.below(7);
        std::vector<ValueMsg> obs;
        std::vector<Price> values;
        for (std::size_t i = 0; i < n; ++i) {
            Price v = rng.between(0, 30);
            values.push_back(v);
            obs.push_back(w.value(static_cast<NodeId>(i), v));
        }
        std::size_t min_size = 1 + rng.below(4);
        Price d = rng.between(0, 12);
        bool found = find_coherent_cluster(obs, min_size, AgreementDistance{d}).has_value();
        CHECK(found == subset_cluster_exists(values, min_size, d));
        if (found) {
            auto cc = *find_coherent_cluster(obs, min_size, AgreementDistance{d});
            CHECK(cc.members.size() >= min_size);
            CHECK(cc.within(AgreementDistance{d}));
        }
    }
}

TEST_CASE("rightmost cluster variant picks the high window at exact size") {
    World w;
    auto obs = obs_of(w, {{0, 10}, {1, 10}, {2, 15}, {3, 15}});
    auto cc = find_coherent_cluster_rightmost(obs, 2, AgreementDistance{0});
    REQUIRE(cc.has_value());
    CHECK(cc->members.size() == 2);
    CHECK(cc->members[0].value == 15);
    CHECK(cc->members[1].value == 15);
}

TEST_CASE("cluster_mean rounding") {
    World w;
    auto mean_of = [&](std::initializer_list<Price> vals) {
        CoherentCluster cc;
        NodeId id = 0;
        for (Price v : vals) cc.members.push_back(w.value(id++, v));
        return cluster_mean(cc);
    };
    CHECK(mean_of({10, 10, 10}) == 10);
    CHECK(mean_of({10, 11}) == 10);  // 10.5 -> 10 (half to even)
    CHECK(mean_of({10, 13}) == 12);  // 11.5 -> 12 (half to even)
    CHECK(mean_of({-10, -11}) == -10);
    CHECK(mean_of({INT64_MAX / 2, INT64_MAX / 2, INT64_MAX / 2}) == INT64_MAX / 2);
}

TEST_CASE("validate_vprop_cc: honest path and mutation harness") {
    World w;
    auto cluster = *find_coherent_cluster(obs_of(w, {{0, 10}, {1, 12}}), 2, w.clan.d);
    Price mu = cluster_mean(cluster);
    auto prop = make_signed_vprop(w.scheme, MsgKind::VPropCc, 3, 0, 0, cluster.members, mu);

    CHECK(validate_vprop_cc(prop, w.clan, 0, 0, w.scheme) == ValidationCode::Ok);

    SUBCASE("mean off by one micro-unit") {
        auto bad = make_signed_vprop(w.scheme, MsgKind::VPropCc, 3, 0, 0, cluster.members, mu + 1);
        CHECK(validate_vprop_cc(bad, w.clan, 0, 0, w.scheme) == ValidationCode::MeanMismatch);
    }
    SUBCASE("member signed by a non-clan node") {
        auto members = cluster.members;
        members.push_back(w.value(4, 11));  // node 4 not in clan
        auto bad = make_signed_vprop(w.scheme, MsgKind::VPropCc, 3, 0, 0, members,
                                     cluster_mean(CoherentCluster{members}));
        CHECK(validate_vprop_cc(bad, w.clan, 0, 0, w.scheme) == ValidationCode::ForeignSigner);
    }
    SUBCASE("tampered member signature") {
        auto members = cluster.members;
        members[0].signature[0] ^= 1;
        auto bad = make_signed_vprop(w.scheme, MsgKind::VPropCc, 3, 0, 0, members, mu);
        CHECK(validate_vprop_cc(bad, w.clan, 0, 0, w.scheme) == ValidationCode::BadMemberSig);
    }
    SUBCASE("tampered member value breaks that member's signature") {
        auto members = cluster.members;
        members[1].value += 1;
        auto bad = make_signed_vprop(w.scheme, MsgKind::VPropCc, 3, 0, 0, members,
                                     cluster_mean(CoherentCluster{members}));
        CHECK(validate_vprop_cc(bad, w.clan, 0, 0, w.scheme) == ValidationCode::BadMemberSig);
    }
    SUBCASE("duplicate sender") {
        auto members = cluster.members;
        members.push_back(members[0]);
        auto bad = make_signed_vprop(w.scheme, MsgKind::VPropCc, 3, 0, 0, members,
                                     cluster_mean(CoherentCluster{members}));
        CHECK(validate_vprop_cc(bad, w.clan, 0, 0, w.scheme) == ValidationCode::DuplicateSender);
    }
    SUBCASE("cluster smaller than f_c+1") {
        auto bad = make_signed_vprop(w.scheme, MsgKind::VPropCc, 3, 0, 0,
                                     obs_of(w, {{0, 10}}), 10);
        CHECK(validate_vprop_cc(bad, w.clan, 0, 0, w.scheme) == ValidationCode::TooSmall);
    }
    SUBCASE("span exceeds d") {
        auto bad = make_signed_vprop(w.scheme, MsgKind::VPropCc, 3, 0, 0,
                                     obs_of(w, {{0, 10}, {1, 30}}), 20);
        CHECK(validate_vprop_cc(bad, w.clan, 0, 0, w.scheme) == ValidationCode::SpanExceedsD);
    }
    SUBCASE("proposer not an aggregator") {
        auto bad = make_signed_vprop(w.scheme, MsgKind::VPropCc, 2, 0, 0, cluster.members, mu);
        CHECK(validate_vprop_cc(bad, w.clan, 0, 0, w.scheme) == ValidationCode::NotAggregator);
    }
    SUBCASE("aggregator signature invalid") {
        auto bad = prop;
        bad.signature[3] ^= 0xFF;
        CHECK(validate_vprop_cc(bad, w.clan, 0, 0, w.scheme) == ValidationCode::BadAggregatorSig);
    }
    SUBCASE("wrong round") {
        CHECK(validate_vprop_cc(prop, w.clan, 1, 0, w.scheme) == ValidationCode::WrongRound);
    }
    SUBCASE("fallback-phase values cannot enter a cluster") {
        std::vector<ValueMsg> members = {w.value(0, 10, 0, MsgKind::ValueFallback),
                                         w.value(1, 12, 0, MsgKind::ValueFallback)};
        auto bad = make_signed_vprop(w.scheme, MsgKind::VPropCc, 3, 0, 0, members, 11);
        CHECK(validate_vprop_cc(bad, w.clan, 0, 0, w.scheme) == ValidationCode::WrongKind);
    }
}

TEST_CASE("validate_vprop_fallback") {
    World w;
    std::vector<ValueMsg> obs = {w.value(0, 10, 0, MsgKind::ValueFallback),
                                 w.value(1, 40, 0, MsgKind::ValueFallback),
                                 w.value(2, 20, 0, MsgKind::ValueFallback)};
    Price med = 20;  // lower median of {10, 20, 40}
    auto prop = make_signed_vprop(w.scheme, MsgKind::VPropFallback, 3, 0, 0, obs, med);
    CHECK(validate_vprop_fallback(prop, w.tribe, w.clan, 0, 0, w.scheme) == ValidationCode::Ok);

    SUBCASE("median mismatch") {
        auto bad = make_signed_vprop(w.scheme, MsgKind::VPropFallback, 3, 0, 0, obs, 21);
        CHECK(validate_vprop_fallback(bad, w.tribe, w.clan, 0, 0, w.scheme) ==
              ValidationCode::MedianMismatch);
    }
    SUBCASE("too few observations") {
        std::vector<ValueMsg> two = {obs[0], obs[1]};
        auto bad = make_signed_vprop(w.scheme, MsgKind::VPropFallback, 3, 0, 0, two, 10);
        CHECK(validate_vprop_fallback(bad, w.tribe, w.clan, 0, 0, w.scheme) ==
              ValidationCode::TooSmall);
    }
    SUBCASE("foreign tribe signer") {
        auto bad_obs = obs;
        bad_obs[0] = w.value(6, 10, 0, MsgKind::ValueFallback);  // node 6 outside tribe
        auto bad = make_signed_vprop(w.scheme, MsgKind::VPropFallback, 3, 0, 0, bad_obs, 20);
        CHECK(validate_vprop_fallback(bad, w.tribe, w.clan, 0, 0, w.scheme) ==
              ValidationCode::ForeignSigner);
    }
    SUBCASE("clan-phase values rejected") {
        std::vector<ValueMsg> wrong = {w.value(0, 10), w.value(1, 40), w.value(2, 20)};
        auto bad = make_signed_vprop(w.scheme, MsgKind::VPropFallback, 3, 0, 0, wrong, 20);
        CHECK(validate_vprop_fallback(bad, w.tribe, w.clan, 0, 0, w.scheme) ==
              ValidationCode::WrongKind);
    }
}

TEST_CASE("node votes on valid proposals, including several per round") {
    World w;
    ClanConfig clan = w.clan;
    clan.aggregators = {3, 4};
    NodeProtocol node(0, &clan, &w.tribe, &w.scheme);
    node.begin_round(0, 0);

    auto cluster = *find_coherent_cluster(obs_of(w, {{0, 10}, {1, 12}}), 2, clan.d);
    auto p1 = make_signed_vprop(w.scheme, MsgKind::VPropCc, 3, 0, 0, cluster.members,
                                cluster_mean(cluster));
    auto p2 = make_signed_vprop(w.scheme, MsgKind::VPropCc, 4, 0, 0, cluster.members,
                                cluster_mean(cluster));

    auto v1 = node.handle_vprop(p1);
    REQUIRE(v1.has_value());
    CHECK(v1->digest == p1.digest());
    auto v2 = node.handle_vprop(p2);
    REQUIRE(v2.has_value());  // distinct valid proposal from another aggregator
    CHECK(v2->digest != v1->digest);

    auto bad = p1;
    bad.aggregate += 1;
    bad.signature = w.scheme.sign(3, bad.payload_bytes());
    CHECK_FALSE(node.handle_vprop(bad).has_value());
    CHECK(node.last_validation() == ValidationCode::MeanMismatch);
}

TEST_CASE("fallback timeout vote: once, and never after concluding") {
    World w;
    NodeProtocol node(0, &w.clan, &w.tribe, &w.scheme);
    node.begin_round(0, 0);

    auto vote = node.handle_fallback_timeout();
    REQUIRE(vote.has_value());
    CHECK(vote->voter == 0);
    CHECK_FALSE(node.handle_fallback_timeout().has_value());  // only one per round

    // still votes on proposals after voting fallback
    auto cluster = *find_coherent_cluster(obs_of(w, {{0, 10}, {1, 12}}), 2, w.clan.d);
    auto prop = make_signed_vprop(w.scheme, MsgKind::VPropCc, 3, 0, 0, cluster.members,
                                  cluster_mean(cluster));
    CHECK(node.handle_vprop(prop).has_value());

    node.begin_round(1, 0);
    NodeProtocol node2(1, &w.clan, &w.tribe, &w.scheme);
    node2.begin_round(0, 0);
    // conclude node2 via a witnessed VPOST, then timeout does nothing
    AggregatorProtocol agg(3, &w.clan, &w.tribe, &w.scheme);
    agg.begin_round(0, 0);
    agg.handle_value(w.value(0, 10));
    auto vp = agg.handle_value(w.value(1, 12));
    REQUIRE(vp.has_value());
    NodeProtocol voter0(0, &w.clan, &w.tribe, &w.scheme);
    voter0.begin_round(0, 0);
    auto votes0 = voter0.handle_vprop(*vp);
    auto votes1 = node2.handle_vprop(*vp);
    REQUIRE(votes0.has_value());
    REQUIRE(votes1.has_value());
    agg.handle_vote(*votes0);
    auto tx = agg.handle_vote(*votes1);
    REQUIRE(tx.has_value());
    SmrLog::Entry entry{0, *tx, 0, 3};
    CHECK(node2.witness(entry).concluded);
    CHECK_FALSE(node2.handle_fallback_timeout().has_value());
}

TEST_CASE("aggregator: proposal on first cluster, vpost on quorum, duplicates ignored") {
    World w;
    AggregatorProtocol agg(3, &w.clan, &w.tribe, &w.scheme);
    agg.begin_round(0, 0);

    CHECK_FALSE(agg.handle_value(w.value(0, 10)).has_value());
    // duplicate VALUE from the same sender does not count twice
    CHECK_FALSE(agg.handle_value(w.value(0, 11)).has_value());
    auto prop = agg.handle_value(w.value(1, 12));
    REQUIRE(prop.has_value());
    CHECK(prop->members.size() == 2);
    CHECK(agg.proposed_cc());
    // a third value does not re-propose
    CHECK_FALSE(agg.handle_value(w.value(2, 11)).has_value());

    NodeProtocol n0(0, &w.clan, &w.tribe, &w.scheme), n1(1, &w.clan, &w.tribe, &w.scheme);
    n0.begin_round(0, 0);
    n1.begin_round(0, 0);
    auto v0 = *n0.handle_vprop(*prop);
    auto v1 = *n1.handle_vprop(*prop);

    CHECK_FALSE(agg.handle_vote(v0).has_value());  // one vote: below quorum
    CHECK_FALSE(agg.handle_vote(v0).has_value());  // duplicate voter ignored
    auto tx = agg.handle_vote(v1);                 // second distinct voter triggers
    REQUIRE(tx.has_value());
    CHECK(tx->kind == TxKind::VPost);
    CHECK(tx->qc.signer_set.size() == 2);
    CHECK_FALSE(agg.handle_vote(v1).has_value());  // vpost exactly once

    // vote for an unknown digest is ignored
    auto stray = make_signed_vote(w.scheme, 2, Digest{}, 0, 0);
    CHECK_FALSE(agg.handle_vote(stray).has_value());

    // stale round vote ignored
    agg.begin_round(1, 0);
    CHECK_FALSE(agg.handle_vote(v0).has_value());
}

TEST_CASE("ftpost requires both the quorum and the aggregator's own timeout") {
    World w;
    AggregatorProtocol agg(3, &w.clan, &w.tribe, &w.scheme);
    agg.begin_round(0, 0);

    auto fv0 = make_signed_fallback_vote(w.scheme, 0, 0, 0);
    auto fv1 = make_signed_fallback_vote(w.scheme, 1, 0, 0);
    CHECK_FALSE(agg.handle_fallback_vote(fv0).has_value());
    CHECK_FALSE(agg.handle_fallback_vote(fv1).has_value());  // quorum met, timer not expired
    auto tx = agg.note_own_timeout();
    REQUIRE(tx.has_value());
    CHECK(tx->kind == TxKind::FtPost);
    CHECK_FALSE(agg.note_own_timeout().has_value());  // ftpost exactly once

    // other order: timeout first, then votes
    AggregatorProtocol agg2(3, &w.clan, &w.tribe, &w.scheme);
    agg2.begin_round(0, 0);
    CHECK_FALSE(agg2.note_own_timeout().has_value());
    CHECK_FALSE(agg2.handle_fallback_vote(fv0).has_value());
    CHECK(agg2.handle_fallback_vote(fv1).has_value());

    // duplicate fallback voters collapse
    AggregatorProtocol agg3(3, &w.clan, &w.tribe, &w.scheme);
    agg3.begin_round(0, 0);
    agg3.note_own_timeout();
    CHECK_FALSE(agg3.handle_fallback_vote(fv0).has_value());
    CHECK_FALSE(agg3.handle_fallback_vote(fv0).has_value());
}

TEST_CASE("witness: first vpost wins, later posts ignored") {
    World w;
    AggregatorProtocol agg(3, &w.clan, &w.tribe, &w.scheme);
    agg.begin_round(0, 0);
    agg.handle_value(w.value(0, 10));
    auto prop = *agg.handle_value(w.value(1, 12));

    NodeProtocol n0(0, &w.clan, &w.tribe, &w.scheme), n1(1, &w.clan, &w.tribe, &w.scheme);
    n0.begin_round(0, 0);
    n1.begin_round(0, 0);
    agg.handle_vote(*n0.handle_vprop(prop));
    auto tx1 = *agg.handle_vote(*n1.handle_vprop(prop));

    // a second aggregator's competing vpost
    ClanConfig clan2 = w.clan;
    clan2.aggregators = {3, 4};
    AggregatorProtocol aggB(4, &clan2, &w.tribe, &w.scheme);
    aggB.begin_round(0, 0);
    aggB.handle_value(w.value(1, 12));
    auto propB = *aggB.handle_value(w.value(2, 14));
    NodeProtocol m0(0, &clan2, &w.tribe, &w.scheme), m1(1, &clan2, &w.tribe, &w.scheme);
    m0.begin_round(0, 0);
    m1.begin_round(0, 0);
    aggB.handle_vote(*m0.handle_vprop(propB));
    auto tx2 = *aggB.handle_vote(*m1.handle_vprop(propB));

    NodeProtocol observer(2, &clan2, &w.tribe, &w.scheme);
    observer.begin_round(0, 0);
    auto r1 = observer.witness(SmrLog::Entry{0, tx1, 5, 3});
    CHECK(r1.concluded);
    CHECK(observer.s_value() == tx1.proposal->aggregate);
    CHECK(observer.concluded_seq() == 0);
    auto r2 = observer.witness(SmrLog::Entry{1, tx2, 6, 4});
    CHECK_FALSE(r2.concluded);
    CHECK(observer.s_value() == tx1.proposal->aggregate);  // unchanged
}

TEST_CASE("witness: ftpost then delayed vpost still concludes with the cc value") {
    World w;
    // build FTPOST
    AggregatorProtocol agg(3, &w.clan, &w.tribe, &w.scheme);
    agg.begin_round(0, 0);
    agg.note_own_timeout();
    agg.handle_fallback_vote(make_signed_fallback_vote(w.scheme, 0, 0, 0));
    auto ftpost = *agg.handle_fallback_vote(make_signed_fallback_vote(w.scheme, 1, 0, 0));

    // build a cc VPOST
    AggregatorProtocol agg2(3, &w.clan, &w.tribe, &w.scheme);
    agg2.begin_round(0, 0);
    agg2.handle_value(w.value(0, 10));
    auto prop = *agg2.handle_value(w.value(1, 12));
    NodeProtocol n0(0, &w.clan, &w.tribe, &w.scheme), n1(1, &w.clan, &w.tribe, &w.scheme);
    n0.begin_round(0, 0);
    n1.begin_round(0, 0);
    agg2.handle_vote(*n0.handle_vprop(prop));
    auto vpost = *agg2.handle_vote(*n1.handle_vprop(prop));

    NodeProtocol node(2, &w.clan, &w.tribe, &w.scheme);
    node.begin_round(0, 0);
    auto r1 = node.witness(SmrLog::Entry{0, ftpost, 5, 3});
    CHECK(r1.switched_to_fallback);
    CHECK(node.phase() == Phase::SwitchedToFallback);
    auto r2 = node.witness(SmrLog::Entry{1, ftpost, 6, 3});  // second ftpost: no-op
    CHECK_FALSE(r2.switched_to_fallback);
    auto r3 = node.witness(SmrLog::Entry{2, vpost, 7, 3});
    CHECK(r3.concluded);
    CHECK(node.via() == ConcludeVia::Cc);
    CHECK(node.s_value() == vpost.proposal->aggregate);
}

TEST_CASE("fallback round: aggregator freezes O at 2f_t+1 and proposes the median") {
    World w;
    AggregatorProtocol agg(3, &w.clan, &w.tribe, &w.scheme);
    agg.begin_round(0, 0);

    // values buffer before the aggregator itself switches
    CHECK_FALSE(agg.handle_fallback_value(w.value(0, 10, 0, MsgKind::ValueFallback)).has_value());
    CHECK_FALSE(agg.handle_fallback_value(w.value(1, 30, 0, MsgKind::ValueFallback)).has_value());
    CHECK_FALSE(agg.handle_fallback_value(w.value(2, 20, 0, MsgKind::ValueFallback)).has_value());
    auto prop = agg.switch_to_fallback();  // 3 = 2 f_t + 1 buffered: propose now
    REQUIRE(prop.has_value());
    CHECK(prop->kind == MsgKind::VPropFallback);
    CHECK(prop->members.size() == 3);
    CHECK(prop->aggregate == 20);

    // late value ignored for the frozen proposal
    CHECK_FALSE(agg.handle_fallback_value(w.value(3, 99, 0, MsgKind::ValueFallback)).has_value());

    // tribe nodes validate and vote; 2f_t+1 votes certify the fallback vpost
    NodeProtocol t0(0, &w.clan, &w.tribe, &w.scheme), t1(1, &w.clan, &w.tribe, &w.scheme),
        t3(3, &w.clan, &w.tribe, &w.scheme);
    t0.begin_round(0, 0);
    t1.begin_round(0, 0);
    t3.begin_round(0, 0);
    CHECK_FALSE(agg.handle_vote(*t0.handle_vprop(*prop)).has_value());
    CHECK_FALSE(agg.handle_vote(*t1.handle_vprop(*prop)).has_value());
    auto tx = agg.handle_vote(*t3.handle_vprop(*prop));
    REQUIRE(tx.has_value());
    CHECK(tx->kind == TxKind::VPost);
    CHECK(tx->proposal->kind == MsgKind::VPropFallback);
    CHECK(tx->qc.signer_set.size() == 3);

    NodeProtocol node(2, &w.clan, &w.tribe, &w.scheme);
    node.begin_round(0, 0);
    auto r = node.witness(SmrLog::Entry{0, *tx, 9, 3});
    CHECK(r.concluded);
    CHECK(node.via() == ConcludeVia::Fallback);
    CHECK(node.s_value() == 20);
}

TEST_CASE("fallback error floor: delivery order alone can move the median by the spread") {
    // 3f_t+1 = 4 nodes, f_t = 1. Honest fallback medians: two at 100 (Hmin),
    // one at 150 (Hmax); the byzantine node reports 150 + c. If the network
    // delivers {Hmin-node, Hmax-node, byzantine} first, O's median is Hmax,
    // where the honest-only median would have been Hmin. The deviation equals
    // the honest spread, and no order can push beyond it.
    World w;
    AggregatorProtocol agg(3, &w.clan, &w.tribe, &w.scheme);
    agg.begin_round(0, 0);
    agg.switch_to_fallback();

    Price hmin = 100, hmax = 150, c = 1'000'000;
    agg.handle_fallback_value(w.value(0, hmin, 0, MsgKind::ValueFallback));
    agg.handle_fallback_value(w.value(1, hmax, 0, MsgKind::ValueFallback));
    auto prop = agg.handle_fallback_value(w.value(3, hmax + c, 0, MsgKind::ValueFallback));
    REQUIRE(prop.has_value());
    CHECK(prop->aggregate == hmax);  // median of {100, 150, 150+c}

    // still inside [Hmin, Hmax]: the bound holds even at its worst point
    CHECK(prop->aggregate >= hmin);
    CHECK(prop->aggregate <= hmax);

    // the favourable order would have yielded Hmin
    AggregatorProtocol agg2(3, &w.clan, &w.tribe, &w.scheme);
    agg2.begin_round(0, 0);
    agg2.switch_to_fallback();
    agg2.handle_fallback_value(w.value(0, hmin, 0, MsgKind::ValueFallback));
    agg2.handle_fallback_value(w.value(2, hmin, 0, MsgKind::ValueFallback));
    auto prop2 = agg2.handle_fallback_value(w.value(1, hmax, 0, MsgKind::ValueFallback));
    REQUIRE(prop2.has_value());
    CHECK(prop2->aggregate == hmin);
}

TEST_CASE("witness re-validation flags transactions a compromised smr let through") {
    World w;
    // QC over a mean that does not match the cluster: honest nodes never
    // voted for this, so fabricate votes from the two byzantine keys only.
    auto cluster = *find_coherent_cluster(obs_of(w, {{0, 10}, {1, 12}}), 2, w.clan.d);
    auto prop = make_signed_vprop(w.scheme, MsgKind::VPropCc, 3, 0, 0, cluster.members,
                                  cluster_mean(cluster) + 3);  // wrong mean
    std::vector<VoteMsg> byz_votes = {make_signed_vote(w.scheme, 1, prop.digest(), 0, 0),
                                      make_signed_vote(w.scheme, 2, prop.digest(), 0, 0)};
    SmrTransaction tx;
    tx.kind = TxKind::VPost;
    tx.round = 0;
    tx.variable = 0;
    tx.proposal = prop;
    tx.qc = std::get<QuorumCertificate>(assemble_qc(byz_votes, 2, w.scheme));

    NodeProtocol node(0, &w.clan, &w.tribe, &w.scheme);
    node.begin_round(0, 0);
    auto r = node.witness(SmrLog::Entry{0, tx, 4, 3});
    CHECK(r.flagged_invalid);
    CHECK_FALSE(r.concluded);
    CHECK_FALSE(node.concluded());
}
