#include "dora/netsim.hpp"

#include <algorithm>
#include <cassert>
#include <set>
#include <sstream>

namespace dora {

namespace {

constexpr std::uint64_t kFeedMsgBytes = 25;  // source id + round + variable + value
constexpr SimDuration kInterRoundGap = 1'000;

// stream tags
constexpr std::uint64_t kTagClanAssign = 0x10;
constexpr std::uint64_t kTagClanFeed = 0x11;
constexpr std::uint64_t kTagFbAssign = 0x12;
constexpr std::uint64_t kTagFbFeed = 0x13;
constexpr std::uint64_t kTagDelays = 0x14;
constexpr std::uint64_t kTagStrategy = 0x15;
constexpr std::uint64_t kTagSampling = 0x16;

}  // namespace

void Scheduler::schedule(SimTime at, Action action) {
    if (at < now_) at = now_;
    queue_.push(Event{at, next_seq_++, std::move(action)});
}

bool Scheduler::run(std::uint64_t max_events) {
    while (!queue_.empty()) {
        if (fired_ >= max_events) return false;
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.at;
        ++fired_;
        ev.action();
    }
    return true;
}

SimDuration DelayModel::draw(Rng& rng, NodeId from, NodeId to, SimDuration cap) const {
    SimDuration v = fixed;
    switch (kind) {
        case DelayKind::Fixed:
            break;
        case DelayKind::Uniform:
            v = rng.between(lo, hi);
            break;
        case DelayKind::Targeted: {
            auto it = overrides.find({from, to});
            v = it != overrides.end() ? it->second : fixed;
            break;
        }
    }
    if (v < 0) v = 0;
    return std::min(v, cap);
}

const char* to_string(NodeStrategy s) {
    switch (s) {
        case NodeStrategy::Honest: return "honest";
        case NodeStrategy::Silent: return "silent";
        case NodeStrategy::RandomValue: return "random_value";
        case NodeStrategy::ExtremeValue: return "extreme_value";
        case NodeStrategy::ClusterPoison: return "cluster_poison";
        case NodeStrategy::Equivocate: return "equivocate";
        case NodeStrategy::WithholdPost: return "withhold_post";
        case NodeStrategy::StallFallback: return "stall_fallback";
    }
    return "?";
}

const char* to_string(Counters::Class c) {
    switch (c) {
        case Counters::Feed: return "feed";
        case Counters::Value: return "value";
        case Counters::VProp: return "vprop";
        case Counters::VoteVp: return "votevp";
        case Counters::VoteFt: return "voteft";
        case Counters::VPost: return "vpost";
        case Counters::FtPost: return "ftpost";
        default: return "?";
    }
}

std::uint64_t Counters::total_count() const {
    std::uint64_t t = 0;
    for (auto c : count) t += c;
    return t;
}

std::uint64_t Counters::total_bytes() const {
    std::uint64_t t = 0;
    for (auto b : bytes) t += b;
    return t;
}

void Counters::record(Class c, std::uint64_t byte_size) {
    count[c] += 1;
    bytes[c] += byte_size;
}

void Scenario::validate() const {
    if (n_t < 3 * f_t + 1) throw ConfigError("tribe too small: need n_t >= 3 f_t + 1");
    std::set<NodeId> seen;
    for (const auto& clan : clans) {
        if (clan.size() < 2 * f_c + 1) throw ConfigError("clan too small: need n_c >= 2 f_c + 1");
        for (NodeId id : clan) {
            if (id >= n_t) throw ConfigError("clan node id outside tribe");
            if (!seen.insert(id).second) throw ConfigError("clans must be mutually exclusive");
        }
    }
    for (NodeId id : aggregators) {
        if (id >= n_t) throw ConfigError("aggregator id outside tribe");
    }
    if (!d.valid()) throw ConfigError("agreement distance must be non-negative");
    std::uint32_t total_weight = 0;
    for (const auto& s : sources) total_weight += s.weight;
    if (total_weight < required_weight(variant, f_d)) {
        throw ConfigError("insufficient source weight for feed variant");
    }
    for (const auto& [id, _] : corrupt) {
        if (id >= n_t) throw ConfigError("corrupt node id outside tribe");
    }
    if (t_ds <= 0 || t_fallback <= 0) throw ConfigError("timers must be positive");
}

std::string RoundRecord::to_json() const {
    std::ostringstream os;
    os << "{\"round\":" << round << ",\"variable\":" << variable
       << ",\"concluded\":" << (concluded_all ? "true" : "false")
       << ",\"agreement\":" << (agreement_ok ? "true" : "false") << ",\"s\":" << s
       << ",\"via\":\"" << (via == ConcludeVia::Cc ? "cc" : "fallback") << "\""
       << ",\"smr_seq\":" << smr_seq;
    if (has_cc_bounds) os << ",\"hmin\":" << hmin_cc << ",\"hmax\":" << hmax_cc;
    os << ",\"fallback_entered\":" << (fallback_entered ? "true" : "false");
    if (has_fb_bounds) os << ",\"hmin_fb\":" << hmin_fb << ",\"hmax_fb\":" << hmax_fb;
    os << ",\"ideal\":" << ideal << ",\"error\":" << abs_error
       << ",\"bound_ok\":" << (bound_ok ? "true" : "false")
       << ",\"first_conclude\":" << first_conclude << ",\"last_conclude\":" << last_conclude
       << ",\"flagged_invalid\":" << (any_flagged_invalid ? "true" : "false")
       << ",\"feed_diagnostic\":" << (feed_diagnostic ? "true" : "false") << "}";
    return os.str();
}

bool RunReport::all_bounds_ok() const {
    if (!liveness_ok) return false;
    for (const auto& r : rounds) {
        if (!r.bound_ok) return false;
    }
    return true;
}

bool RunReport::all_agreement_ok() const {
    if (!liveness_ok) return false;
    for (const auto& r : rounds) {
        if (!r.concluded_all || !r.agreement_ok) return false;
    }
    return true;
}

std::string RunReport::decisions_jsonl() const {
    std::ostringstream os;
    for (const auto& r : rounds) os << r.to_json() << "\n";
    return os.str();
}

std::string RunReport::metrics_csv() const {
    std::ostringstream os;
    os << "class,count,bytes\n";
    for (int c = 0; c < Counters::kClasses; ++c) {
        os << to_string(static_cast<Counters::Class>(c)) << "," << counters.count[c] << ","
           << counters.bytes[c] << "\n";
    }
    os << "total," << counters.total_count() << "," << counters.total_bytes() << "\n";
    return os.str();
}

std::string RunReport::serialize() const {
    std::ostringstream os;
    os << "scenario=" << scenario_name << "\n";
    os << "seed=" << seed << "\n";
    os << "liveness=" << (liveness_ok ? "ok" : "violation") << "\n";
    if (!liveness_detail.empty()) os << "liveness_detail=" << liveness_detail << "\n";
    os << decisions_jsonl();
    os << metrics_csv();
    os << "max_value_msg_bytes=" << counters.max_value_msg_bytes << "\n";
    os << "signature_wire_bytes=" << counters.signature_wire_bytes << "\n";
    os << smr_audit;
    return os.str();
}

namespace {

// One protocol instance: a single variable's clan plus the shared tribe.
class VariableSim {
  public:
    VariableSim(const Scenario& sc, const std::vector<NodeId>& tribe, VariableId variable,
                const MacScheme& scheme, SmrLog& smr, Counters& counters)
        : sc_(sc),
          tribe_(tribe),
          variable_(variable),
          scheme_(scheme),
          smr_(smr),
          counters_(counters),
          delay_rng_(Rng::stream(sc.seed, kTagDelays, variable)),
          strategy_rng_(Rng::stream(sc.seed, kTagStrategy, variable)) {
        clan_cfg_.clan = sc.clans[variable];
        clan_cfg_.f_c = sc.f_c;
        clan_cfg_.aggregators = sc.aggregators;
        clan_cfg_.d = sc.d;
        clan_cfg_.t_fallback = sc.t_fallback;
        clan_cfg_.t_ds = sc.t_ds;
        clan_cfg_.f_d = sc.f_d;
        tribe_cfg_.tribe = tribe;
        tribe_cfg_.f_t = sc.f_t;

        for (NodeId id : tribe_) {
            nodes_.emplace(id, NodeProtocol(id, &clan_cfg_, &tribe_cfg_, &scheme_));
        }
        for (NodeId id : sc.aggregators) {
            aggs_.emplace(id, AggregatorProtocol(id, &clan_cfg_, &tribe_cfg_, &scheme_));
        }
    }

    // Runs all rounds to quiescence. Returns records; liveness flag out-param.
    void run(std::vector<RoundRecord>& out, bool& liveness_ok, std::string& liveness_detail) {
        if (sc_.rounds == 0) return;  // degenerate: nothing to do, zero traffic
        start_round(0, 0);
        bool within_budget = sched_.run(sc_.max_events);
        if (!within_budget) {
            liveness_ok = false;
            liveness_detail = "event budget exhausted at round " + std::to_string(round_);
        }
        if (!finalized_) {
            finalize_round(false);
            liveness_ok = false;
            if (liveness_detail.empty()) {
                liveness_detail = "queue drained with unconcluded honest nodes in round " +
                                  std::to_string(round_) + " variable " +
                                  std::to_string(variable_);
            }
        } else if (records_.size() < sc_.rounds) {
            liveness_ok = false;
            if (liveness_detail.empty()) {
                liveness_detail = "stopped after round " + std::to_string(round_) + " variable " +
                                  std::to_string(variable_);
            }
        }
        for (auto& r : records_) out.push_back(r);
    }

  private:
    bool is_honest(NodeId id) const { return !sc_.is_corrupt(id); }

    NodeStrategy strategy_of(NodeId id) const {
        auto it = sc_.corrupt.find(id);
        return it == sc_.corrupt.end() ? NodeStrategy::Honest : it->second.strategy;
    }

    const CorruptSpec* corrupt_spec(NodeId id) const {
        auto it = sc_.corrupt.find(id);
        return it == sc_.corrupt.end() ? nullptr : &it->second;
    }

    // ---- round lifecycle ------------------------------------------------

    void start_round(RoundId r, SimTime t0) {
        round_ = r;
        finalized_ = false;
        fb_prepared_ = false;
        poison_obs_.clear();
        poison_proposed_.clear();
        conclude_times_.clear();
        honest_concluded_ = 0;
        rec_ = RoundRecord{};
        rec_.round = r;
        rec_.variable = variable_;

        for (auto& [id, np] : nodes_) np.begin_round(r, variable_);
        for (auto& [id, ap] : aggs_) ap.begin_round(r, variable_);

        // Clan-phase data feeds are deterministic per (seed, round, node).
        auto assignment = assign_sources(
            static_cast<std::uint32_t>(clan_cfg_.clan.size()), sc_.sources, sc_.f_d, sc_.variant,
            mix64(mix64(sc_.seed, kTagClanAssign), mix64(r, variable_)));

        clan_medians_.clear();
        std::vector<Price> honest_medians;
        std::vector<std::pair<NodeId, FeedResult>> feeds;
        for (std::size_t i = 0; i < clan_cfg_.clan.size(); ++i) {
            NodeId id = clan_cfg_.clan[i];
            Rng feed_rng = Rng::stream(sc_.seed, kTagClanFeed, mix64(r, variable_), id);
            FeedResult feed = get_data_feed(assignment.per_node[i], sc_.sources, sc_.variant,
                                            sc_.f_d, sc_.t_ds, sc_.true_value, feed_rng);
            counters_.count[Counters::Feed] += feed.responses.size();
            counters_.bytes[Counters::Feed] += feed.responses.size() * kFeedMsgBytes;
            if (feed.low_honest_weight) rec_.feed_diagnostic = true;
            auto median = robust_median(feed.observations);
            if (median) {
                clan_medians_[id] = *median;
                if (is_honest(id)) honest_medians.push_back(*median);
            }
            feeds.emplace_back(id, std::move(feed));
        }
        if (!honest_medians.empty()) {
            rec_.has_cc_bounds = true;
            rec_.hmin_cc = *std::min_element(honest_medians.begin(), honest_medians.end());
            rec_.hmax_cc = *std::max_element(honest_medians.begin(), honest_medians.end());
            Wide sum = 0;
            for (Price p : honest_medians) sum += p;
            ideal_cc_ = round_half_even_div(sum, static_cast<std::int64_t>(honest_medians.size()));
        } else {
            ideal_cc_ = sc_.true_value;
        }

        // VALUE sends at feed completion; the rushing adversary fixes
        // Byzantine contents against the round's honest medians.
        for (auto& [id, feed] : feeds) {
            SimTime completion = t0 + feed.completion + clock_offset(id);
            schedule_clan_value(id, completion, r);
            schedule_node_timer(id, completion + sc_.t_fallback, r);
        }
        // Aggregators outside the clan reference the collection deadline.
        for (NodeId agg : clan_cfg_.aggregators) {
            if (!clan_cfg_.is_clan_member(agg)) {
                schedule_agg_timer(agg, t0 + sc_.t_ds + clock_offset(agg) + sc_.t_fallback, r);
            } else {
                for (auto& [id, feed] : feeds) {
                    if (id == agg) {
                        schedule_agg_timer(agg, t0 + feed.completion + clock_offset(agg) +
                                                    sc_.t_fallback,
                                           r);
                    }
                }
            }
        }
    }

    SimDuration clock_offset(NodeId id) const {
        auto it = sc_.clock_offset.find(id);
        return it == sc_.clock_offset.end() ? 0 : it->second;
    }

    void schedule_clan_value(NodeId id, SimTime at, RoundId r) {
        NodeStrategy strat = strategy_of(id);
        if (strat == NodeStrategy::Silent) return;

        std::optional<Price> own;
        if (auto it = clan_medians_.find(id); it != clan_medians_.end()) own = it->second;

        std::vector<std::pair<NodeId, Price>> per_target;
        for (std::size_t a = 0; a < clan_cfg_.aggregators.size(); ++a) {
            NodeId agg = clan_cfg_.aggregators[a];
            std::optional<Price> v = own;
            switch (strat) {
                case NodeStrategy::Honest:
                case NodeStrategy::WithholdPost:
                case NodeStrategy::StallFallback:
                    break;
                case NodeStrategy::RandomValue: {
                    const auto* spec = corrupt_spec(id);
                    v = strategy_rng_.between(spec->lo, spec->hi);
                    break;
                }
                case NodeStrategy::ExtremeValue:
                    v = sc_.true_value + corrupt_spec(id)->offset;
                    break;
                case NodeStrategy::ClusterPoison:
                    v = (rec_.has_cc_bounds ? rec_.hmax_cc : sc_.true_value) + sc_.d.d;
                    break;
                case NodeStrategy::Equivocate: {
                    Price base = rec_.has_cc_bounds ? rec_.hmax_cc : sc_.true_value;
                    Price low = rec_.has_cc_bounds ? rec_.hmin_cc : sc_.true_value;
                    v = (a % 2 == 0) ? base + sc_.d.d : low - sc_.d.d;
                    break;
                }
                case NodeStrategy::Silent:
                    return;
            }
            if (v) per_target.emplace_back(agg, *v);
        }
        if (per_target.empty()) return;

        sched_.schedule(at, [this, id, per_target, r] {
            if (round_ != r) return;
            for (auto& [agg, value] : per_target) {
                ValueMsg msg =
                    make_signed_value(scheme_, MsgKind::ValueClan, id, r, variable_, value);
                send_value(id, agg, std::move(msg));
            }
        });
        if (strategy_of(id) == NodeStrategy::StallFallback) {
            sched_.schedule(at, [this, id, r] {
                if (round_ != r) return;
                FallbackVote vote = make_signed_fallback_vote(scheme_, id, r, variable_);
                for (NodeId agg : clan_cfg_.aggregators) send_fallback_vote(id, agg, vote);
            });
        }
    }

    void schedule_node_timer(NodeId id, SimTime at, RoundId r) {
        if (strategy_of(id) == NodeStrategy::Silent) return;
        sched_.schedule(at, [this, id, r] {
            if (round_ != r) return;
            auto& np = nodes_.at(id);
            if (np.round() != r) return;
            auto vote = np.handle_fallback_timeout();
            if (!vote) return;
            for (NodeId agg : clan_cfg_.aggregators) send_fallback_vote(id, agg, *vote);
        });
    }

    void schedule_agg_timer(NodeId agg, SimTime at, RoundId r) {
        NodeStrategy strat = strategy_of(agg);
        if (strat == NodeStrategy::Silent) return;
        sched_.schedule(at, [this, agg, r] {
            if (round_ != r) return;
            auto tx = aggs_.at(agg).note_own_timeout();
            if (tx) post_tx(agg, std::move(*tx));
        });
    }

    // ---- transport -------------------------------------------------------

    void send_value(NodeId from, NodeId to, ValueMsg msg) {
        auto bytes = canonical_serialize(msg);
        counters_.record(Counters::Value, bytes.size());
        counters_.max_value_msg_bytes =
            std::max<std::uint64_t>(counters_.max_value_msg_bytes, bytes.size());
        counters_.signature_wire_bytes =
            std::max<std::uint64_t>(counters_.signature_wire_bytes, msg.signature.size() + 4);
        SimDuration delay = sc_.delays.node_to_agg.draw(delay_rng_, from, to, sc_.delays.cap);
        sched_.schedule(sched_.now() + delay, [this, to, msg = std::move(msg)] {
            deliver_value(to, msg);
        });
    }

    void deliver_value(NodeId agg, const ValueMsg& msg) {
        auto it = aggs_.find(agg);
        if (it == aggs_.end()) return;
        NodeStrategy strat = strategy_of(agg);
        if (strat == NodeStrategy::Silent) return;

        if (msg.kind == MsgKind::ValueFallback) {
            auto prop = it->second.handle_fallback_value(msg);
            if (prop) broadcast_vprop(agg, *prop, tribe_);
            return;
        }

        if (strat == NodeStrategy::ClusterPoison) {
            deliver_value_poison(agg, it->second, msg);
            return;
        }
        // Deliveries that share a fire time are simultaneous: ingest the
        // whole batch before evaluating the cluster predicate once.
        it->second.ingest_value(msg);
        if (value_flush_pending_.insert(agg).second) {
            sched_.schedule(sched_.now(), [this, agg] {
                value_flush_pending_.erase(agg);
                auto agg_it = aggs_.find(agg);
                if (agg_it == aggs_.end()) return;
                auto prop = agg_it->second.try_propose_cc();
                if (prop) broadcast_vprop(agg, *prop, clan_cfg_.clan);
            });
        }
    }

    // Byzantine aggregator: seed the state machine for vote handling but
    // choose the rightmost minimal window so the mean is dragged furthest.
    // Colludes with the corrupt senders: holds its proposal until all of
    // their values are in hand.
    void deliver_value_poison(NodeId agg, AggregatorProtocol& ap, const ValueMsg& msg) {
        if (msg.round != round_ || msg.variable != variable_) return;
        if (!clan_cfg_.is_clan_member(msg.sender)) return;
        if (!scheme_.verify(msg.sender, msg.payload_bytes(), msg.signature)) return;
        poison_obs_[agg].emplace(msg.sender, msg);
        if (poison_proposed_.count(agg)) return;
        for (NodeId accomplice : clan_cfg_.clan) {
            if (!sc_.is_corrupt(accomplice)) continue;
            if (strategy_of(accomplice) == NodeStrategy::Silent) continue;
            if (!poison_obs_[agg].count(accomplice)) return;
        }

        std::vector<ValueMsg> obs;
        for (auto& [_, v] : poison_obs_[agg]) obs.push_back(v);
        auto cluster = find_coherent_cluster_rightmost(obs, clan_cfg_.cluster_quorum(), sc_.d);
        if (!cluster) return;
        poison_proposed_.insert(agg);
        Price mu = cluster_mean(*cluster);
        auto prop = ap.adversarial_propose(cluster->members, mu);
        if (prop) broadcast_vprop(agg, *prop, clan_cfg_.clan);
    }

    void broadcast_vprop(NodeId agg, const VPropMsg& prop, const std::vector<NodeId>& targets) {
        auto bytes = canonical_serialize(prop);
        for (NodeId to : targets) {
            counters_.record(Counters::VProp, bytes.size());
            SimDuration delay = sc_.delays.agg_to_node.draw(delay_rng_, agg, to, sc_.delays.cap);
            sched_.schedule(sched_.now() + delay, [this, to, agg, prop] {
                deliver_vprop(to, agg, prop);
            });
        }
    }

    void deliver_vprop(NodeId node, NodeId agg, const VPropMsg& prop) {
        auto it = nodes_.find(node);
        if (it == nodes_.end()) return;
        if (strategy_of(node) == NodeStrategy::Silent) return;
        auto vote = it->second.handle_vprop(prop);
        if (!vote) return;
        auto bytes = canonical_serialize(*vote);
        counters_.record(Counters::VoteVp, bytes.size());
        SimDuration delay = sc_.delays.node_to_agg.draw(delay_rng_, node, agg, sc_.delays.cap);
        sched_.schedule(sched_.now() + delay, [this, agg, vote = std::move(*vote)] {
            deliver_vote(agg, vote);
        });
    }

    void deliver_vote(NodeId agg, const VoteMsg& vote) {
        auto it = aggs_.find(agg);
        if (it == aggs_.end()) return;
        NodeStrategy strat = strategy_of(agg);
        if (strat == NodeStrategy::Silent) return;
        auto tx = it->second.handle_vote(vote);
        if (!tx) return;
        if (strat == NodeStrategy::WithholdPost) return;  // QC gathered, never posted
        post_tx(agg, std::move(*tx));
    }

    void send_fallback_vote(NodeId from, NodeId to, const FallbackVote& vote) {
        auto bytes = canonical_serialize(vote);
        counters_.record(Counters::VoteFt, bytes.size());
        SimDuration delay = sc_.delays.node_to_agg.draw(delay_rng_, from, to, sc_.delays.cap);
        sched_.schedule(sched_.now() + delay, [this, to, vote] { deliver_fallback_vote(to, vote); });
    }

    void deliver_fallback_vote(NodeId agg, const FallbackVote& vote) {
        auto it = aggs_.find(agg);
        if (it == aggs_.end()) return;
        NodeStrategy strat = strategy_of(agg);
        if (strat == NodeStrategy::Silent) return;
        auto tx = it->second.handle_fallback_vote(vote);
        if (!tx) return;
        if (strat == NodeStrategy::WithholdPost) return;
        post_tx(agg, std::move(*tx));
    }

    void post_tx(NodeId agg, SmrTransaction tx) {
        auto bytes = canonical_serialize(tx);
        counters_.record(tx.kind == TxKind::VPost ? Counters::VPost : Counters::FtPost,
                         bytes.size());
        SimDuration delay = sc_.delays.post_to_smr.draw(delay_rng_, agg, agg, sc_.delays.cap);
        sched_.schedule(sched_.now() + delay, [this, agg, tx = std::move(tx)] {
            auto result = smr_.post(tx, sched_.now(), agg);
            if (!result.seq) return;  // structurally invalid, rejected
            std::uint64_t seq = *result.seq;
            for (NodeId obs : tribe_) {
                SimDuration d =
                    sc_.delays.smr_to_observer.draw(delay_rng_, agg, obs, sc_.delays.cap);
                smr_.set_ready_time(obs, seq, sched_.now() + d);
                sched_.schedule(smr_.ready_time(obs, seq), [this, obs] { poke_observer(obs); });
            }
        });
    }

    void poke_observer(NodeId obs) {
        while (auto entry = smr_.deliver_next(obs, sched_.now())) {
            witness(obs, *entry);
        }
    }

    // ---- SMR witnessing and the fallback protocol -------------------------

    void witness(NodeId obs, const SmrLog::Entry& entry) {
        auto it = nodes_.find(obs);
        if (it == nodes_.end()) return;
        auto result = it->second.witness(entry);
        if (result.flagged_invalid) rec_.any_flagged_invalid = true;
        if (result.concluded) {
            conclude_times_[obs] = sched_.now();
            if (is_honest(obs)) {
                ++honest_concluded_;
                if (honest_concluded_ == honest_tribe_count()) finalize_round(true);
            }
            return;
        }
        if (result.switched_to_fallback) {
            start_fallback_participation(obs, entry.tx.round);
        }
    }

    std::uint32_t honest_tribe_count() const {
        std::uint32_t n = 0;
        for (NodeId id : tribe_) {
            if (is_honest(id)) ++n;
        }
        return n;
    }

    void prepare_fallback_round(RoundId r) {
        if (fb_prepared_) return;
        fb_prepared_ = true;
        rec_.fallback_entered = true;

        auto assignment = assign_sources(static_cast<std::uint32_t>(tribe_.size()), sc_.sources,
                                         sc_.f_d, sc_.variant,
                                         mix64(mix64(sc_.seed, kTagFbAssign), mix64(r, variable_)));
        fb_feeds_.clear();
        fb_medians_.clear();
        std::vector<Price> honest;
        for (std::size_t i = 0; i < tribe_.size(); ++i) {
            NodeId id = tribe_[i];
            Rng feed_rng = Rng::stream(sc_.seed, kTagFbFeed, mix64(r, variable_), id);
            FeedResult feed = get_data_feed(assignment.per_node[i], sc_.sources, sc_.variant,
                                            sc_.f_d, sc_.t_ds, sc_.true_value, feed_rng);
            auto median = robust_median(feed.observations);
            if (median) {
                fb_medians_[id] = *median;
                if (is_honest(id)) honest.push_back(*median);
            }
            if (feed.low_honest_weight) rec_.feed_diagnostic = true;
            fb_feeds_.emplace(id, std::move(feed));
        }
        if (!honest.empty()) {
            rec_.has_fb_bounds = true;
            rec_.hmin_fb = *std::min_element(honest.begin(), honest.end());
            rec_.hmax_fb = *std::max_element(honest.begin(), honest.end());
            Wide sum = 0;
            for (Price p : honest) sum += p;
            ideal_fb_ = round_half_even_div(sum, static_cast<std::int64_t>(honest.size()));
        } else {
            ideal_fb_ = sc_.true_value;
        }
    }

    void start_fallback_participation(NodeId id, RoundId r) {
        prepare_fallback_round(r);
        NodeStrategy strat = strategy_of(id);

        if (auto agg_it = aggs_.find(id); agg_it != aggs_.end() && strat != NodeStrategy::Silent) {
            auto prop = agg_it->second.switch_to_fallback();
            if (prop) broadcast_vprop(id, *prop, tribe_);
        }
        if (strat == NodeStrategy::Silent) return;

        const FeedResult& feed = fb_feeds_.at(id);
        counters_.count[Counters::Feed] += feed.responses.size();
        counters_.bytes[Counters::Feed] += feed.responses.size() * kFeedMsgBytes;

        std::optional<Price> own;
        if (auto it = fb_medians_.find(id); it != fb_medians_.end()) own = it->second;

        std::vector<std::pair<NodeId, Price>> per_target;
        for (std::size_t a = 0; a < clan_cfg_.aggregators.size(); ++a) {
            NodeId agg = clan_cfg_.aggregators[a];
            std::optional<Price> v = own;
            switch (strat) {
                case NodeStrategy::Honest:
                case NodeStrategy::WithholdPost:
                case NodeStrategy::StallFallback:
                    break;
                case NodeStrategy::RandomValue: {
                    const auto* spec = corrupt_spec(id);
                    v = strategy_rng_.between(spec->lo, spec->hi);
                    break;
                }
                case NodeStrategy::ExtremeValue:
                    v = sc_.true_value + corrupt_spec(id)->offset;
                    break;
                case NodeStrategy::ClusterPoison:
                    v = (rec_.has_fb_bounds ? rec_.hmax_fb : sc_.true_value) + sc_.d.d;
                    break;
                case NodeStrategy::Equivocate: {
                    Price hi = rec_.has_fb_bounds ? rec_.hmax_fb : sc_.true_value;
                    Price lo = rec_.has_fb_bounds ? rec_.hmin_fb : sc_.true_value;
                    v = (a % 2 == 0) ? hi + sc_.d.d : lo - sc_.d.d;
                    break;
                }
                case NodeStrategy::Silent:
                    return;
            }
            if (v) per_target.emplace_back(agg, *v);
        }
        if (per_target.empty()) return;

        SimTime at = sched_.now() + feed.completion;
        sched_.schedule(at, [this, id, per_target, r] {
            if (round_ != r) return;
            for (auto& [agg, value] : per_target) {
                ValueMsg msg =
                    make_signed_value(scheme_, MsgKind::ValueFallback, id, r, variable_, value);
                send_value(id, agg, std::move(msg));
            }
        });
    }

    void finalize_round(bool complete) {
        if (finalized_) return;
        finalized_ = true;
        rec_.concluded_all = complete && honest_concluded_ == honest_tribe_count();

        // Agreement across honest observers: identical S, path, and seq.
        bool first = true;
        for (NodeId id : tribe_) {
            if (!is_honest(id)) continue;
            const auto& np = nodes_.at(id);
            if (!np.concluded()) {
                rec_.concluded_all = false;
                continue;
            }
            if (first) {
                rec_.s = np.s_value();
                rec_.via = np.via();
                rec_.smr_seq = np.concluded_seq();
                rec_.first_conclude = conclude_times_[id];
                rec_.last_conclude = conclude_times_[id];
                first = false;
            } else {
                if (np.s_value() != rec_.s || np.via() != rec_.via ||
                    np.concluded_seq() != rec_.smr_seq) {
                    rec_.agreement_ok = false;
                }
                rec_.first_conclude = std::min(rec_.first_conclude, conclude_times_[id]);
                rec_.last_conclude = std::max(rec_.last_conclude, conclude_times_[id]);
            }
        }

        if (rec_.concluded_all) {
            if (rec_.via == ConcludeVia::Cc) {
                rec_.ideal = ideal_cc_;
                rec_.bound_ok = rec_.has_cc_bounds &&
                                rec_.s >= rec_.hmin_cc - sc_.d.d && rec_.s <= rec_.hmax_cc + sc_.d.d;
            } else {
                rec_.ideal = ideal_fb_;
                rec_.bound_ok =
                    rec_.has_fb_bounds && rec_.s >= rec_.hmin_fb && rec_.s <= rec_.hmax_fb;
            }
            std::int64_t diff = rec_.s - rec_.ideal;
            rec_.abs_error = diff < 0 ? -diff : diff;
        } else {
            rec_.bound_ok = false;
        }
        records_.push_back(rec_);

        if (rec_.concluded_all && round_ + 1 < sc_.rounds) {
            RoundId next = round_ + 1;
            sched_.schedule(rec_.last_conclude + kInterRoundGap,
                            [this, next] { start_round(next, sched_.now()); });
        }
    }

    // ---- members ----------------------------------------------------------

    const Scenario& sc_;
    std::vector<NodeId> tribe_;
    VariableId variable_;
    const MacScheme& scheme_;
    SmrLog& smr_;
    Counters& counters_;
    Rng delay_rng_;
    Rng strategy_rng_;

    Scheduler sched_;
    ClanConfig clan_cfg_;
    TribeConfig tribe_cfg_;
    std::map<NodeId, NodeProtocol> nodes_;
    std::map<NodeId, AggregatorProtocol> aggs_;

    RoundId round_ = 0;
    bool finalized_ = true;
    RoundRecord rec_;
    std::vector<RoundRecord> records_;
    std::map<NodeId, Price> clan_medians_;
    Price ideal_cc_ = 0;
    Price ideal_fb_ = 0;
    bool fb_prepared_ = false;
    std::map<NodeId, FeedResult> fb_feeds_;
    std::map<NodeId, Price> fb_medians_;
    std::map<NodeId, std::map<NodeId, ValueMsg>> poison_obs_;
    std::set<NodeId> poison_proposed_;
    std::set<NodeId> value_flush_pending_;
    std::map<NodeId, SimTime> conclude_times_;
    std::uint32_t honest_concluded_ = 0;
};

}  // namespace

RunReport run_scenario(const Scenario& input) {
    Scenario scenario = input;

    std::vector<NodeId> tribe(scenario.n_t);
    for (NodeId i = 0; i < scenario.n_t; ++i) tribe[i] = i;

    // Resolve sampling directives before validation.
    if (scenario.sample_aggregators > 0) {
        Rng rng = Rng::stream(scenario.seed, kTagSampling, 1);
        scenario.aggregators.clear();
        for (auto idx : rng.sample_without_replacement(scenario.n_t, scenario.sample_aggregators)) {
            scenario.aggregators.push_back(idx);
        }
        std::sort(scenario.aggregators.begin(), scenario.aggregators.end());
    }
    if (scenario.sample_corrupt > 0) {
        Rng rng = Rng::stream(scenario.seed, kTagSampling, 2);
        for (auto idx : rng.sample_without_replacement(scenario.n_t, scenario.sample_corrupt)) {
            scenario.corrupt[idx] = scenario.sample_corrupt_spec;
        }
    }

    scenario.validate();

    RunReport report;
    report.scenario_name = scenario.name;
    report.seed = scenario.seed;

    MacScheme scheme(mix64(scenario.seed, 0xC0DE), tribe);

    // Thresholds for structural validation at the SMR boundary.
    std::uint32_t f_c = scenario.f_c;
    std::uint32_t f_t = scenario.f_t;
    SmrLog smr([&scheme, f_c, f_t](const SmrTransaction& tx) -> std::optional<std::string> {
        if (tx.kind == TxKind::VPost) {
            if (!tx.proposal) return "vpost without proposal";
            std::size_t threshold =
                tx.proposal->kind == MsgKind::VPropCc ? f_c + 1 : 2 * f_t + 1;
            VoteContext ctx{MsgKind::VoteVp, tx.proposal->digest(), tx.round, tx.variable};
            if (!verify_qc(tx.qc, ctx, threshold, scheme)) return "qc verification failed";
            return std::nullopt;
        }
        VoteContext ctx{MsgKind::VoteFt, fallback_topic_digest(tx.round, tx.variable), tx.round,
                        tx.variable};
        if (!verify_qc(tx.qc, ctx, f_c + 1, scheme)) return "ftpost qc verification failed";
        return std::nullopt;
    });
    for (NodeId id : tribe) smr.register_observer(id);

    report.liveness_ok = true;
    for (VariableId v = 0; v < scenario.variables(); ++v) {
        VariableSim sim(scenario, tribe, v, scheme, smr, report.counters);
        sim.run(report.rounds, report.liveness_ok, report.liveness_detail);
    }
    report.smr_audit = smr.audit_jsonl();
    return report;
}

Scenario apply_axis(const Scenario& base, const std::string& axis, std::int64_t value) {
    Scenario sc = base;
    if (axis == "d") {
        sc.d.d = value;
    } else if (axis == "noise") {
        for (auto& s : sc.sources) {
            if (s.kind == SourceKind::Honest) s.noise_half_width = value;
        }
    } else if (axis == "n_a") {
        sc.aggregators.clear();
        for (std::int64_t i = 0; i < value; ++i) {
            sc.aggregators.push_back(static_cast<NodeId>(i));
        }
    } else if (axis == "n_t") {
        sc.n_t = static_cast<std::uint32_t>(value);
    } else if (axis == "t_fallback") {
        sc.t_fallback = value;
    } else if (axis == "delay_cap") {
        sc.delays.cap = value;
    } else if (axis == "rounds") {
        sc.rounds = static_cast<std::uint32_t>(value);
    } else {
        throw ConfigError("unknown sweep axis: " + axis);
    }
    return sc;
}

std::vector<SweepRow> sweep(const Scenario& base, const std::string& axis,
                            const std::vector<std::int64_t>& values,
                            const std::vector<std::uint64_t>& seeds) {
    std::vector<SweepRow> rows;
    for (std::int64_t v : values) {
        Scenario sc = apply_axis(base, axis, v);
        for (std::uint64_t seed : seeds) {
            sc.seed = seed;
            RunReport report = run_scenario(sc);
            SweepRow row;
            row.axis_value = v;
            row.seed = seed;
            row.rounds = static_cast<std::uint32_t>(report.rounds.size());
            for (const auto& r : report.rounds) {
                if (!r.concluded_all) continue;
                if (r.via == ConcludeVia::Cc) ++row.cc_rounds;
                else ++row.fallback_rounds;
                if (!r.bound_ok || !r.agreement_ok) ++row.violations;
            }
            row.liveness_ok = report.liveness_ok;
            row.total_messages = report.counters.total_count();
            row.total_bytes = report.counters.total_bytes();
            rows.push_back(row);
        }
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& axis) {
    std::ostringstream os;
    os << axis << ",seed,rounds,cc_rounds,fallback_rounds,violations,liveness_ok,messages,bytes\n";
    for (const auto& r : rows) {
        os << r.axis_value << "," << r.seed << "," << r.rounds << "," << r.cc_rounds << ","
           << r.fallback_rounds << "," << r.violations << "," << (r.liveness_ok ? 1 : 0) << ","
           << r.total_messages << "," << r.total_bytes << "\n";
    }
    return os.str();
}

}  // namespace dora
