#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "dora/protocol.hpp"
#include "dora/rng.hpp"

namespace dora {

// ---------------------------------------------------------------------------
// Deterministic discrete-event scheduler. Events fire in (time, seq) order;
// seq is assigned at scheduling time, so identical runs replay identically.

class Scheduler {
  public:
    using Action = std::function<void()>;

    void schedule(SimTime at, Action action);
    // Drains the queue. Returns false if the event budget ran out.
    bool run(std::uint64_t max_events);

    SimTime now() const { return now_; }
    std::uint64_t events_fired() const { return fired_; }

  private:
    struct Event {
        SimTime at;
        std::uint64_t seq;
        Action action;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            return std::tie(a.at, a.seq) > std::tie(b.at, b.seq);
        }
    };

    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    SimTime now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t fired_ = 0;
};

// ---------------------------------------------------------------------------
// Adversary: message delays per channel class plus a static corruption set.

enum class DelayKind { Fixed, Uniform, Targeted };

struct DelayModel {
    DelayKind kind = DelayKind::Fixed;
    SimDuration fixed = 1'000;
    SimDuration lo = 0, hi = 0;                          // Uniform
    std::map<std::pair<NodeId, NodeId>, SimDuration> overrides;  // Targeted

    SimDuration draw(Rng& rng, NodeId from, NodeId to, SimDuration cap) const;
};

struct DelayPolicy {
    DelayModel node_to_agg;
    DelayModel agg_to_node;
    DelayModel post_to_smr;
    DelayModel smr_to_observer;
    SimDuration cap = 10'000'000;
};

enum class NodeStrategy {
    Honest,
    Silent,
    RandomValue,
    ExtremeValue,
    ClusterPoison,
    Equivocate,
    WithholdPost,   // aggregator: gathers QC, never posts
    StallFallback,  // votes fallback immediately
};

const char* to_string(NodeStrategy s);

struct CorruptSpec {
    NodeStrategy strategy = NodeStrategy::Silent;
    Price offset = 0;      // ExtremeValue
    Price lo = 0, hi = 0;  // RandomValue
};

// ---------------------------------------------------------------------------
// Fully resolved simulated world. One clan per variable; shared aggregator
// family; static corruption fixed before the run.

struct Scenario {
    std::string name = "scenario";
    std::uint32_t n_t = 4;
    std::uint32_t f_t = 1;
    std::vector<std::vector<NodeId>> clans;  // index = variable
    std::uint32_t f_c = 1;
    std::vector<NodeId> aggregators;
    AgreementDistance d{0};
    SimDuration t_ds = 30'000'000;
    SimDuration t_fallback = 2'000'000;
    FeedVariant variant = FeedVariant::Timer;
    std::uint32_t rounds = 1;
    std::uint32_t f_d = 0;
    std::vector<DataSourceSpec> sources;
    Price true_value = 0;
    DelayPolicy delays;
    std::map<NodeId, CorruptSpec> corrupt;
    std::map<NodeId, SimDuration> clock_offset;  // per-node drift, default zero
    std::uint64_t seed = 1;
    std::uint64_t max_events = 20'000'000;

    // Sampling directives, resolved per seed at run start.
    std::uint32_t sample_aggregators = 0;  // draw the family uniformly from the tribe
    std::uint32_t sample_corrupt = 0;      // draw the corrupt set uniformly from the tribe
    CorruptSpec sample_corrupt_spec;

    void validate() const;  // throws ConfigError on inconsistent arithmetic
    bool is_corrupt(NodeId id) const { return corrupt.count(id) != 0; }
    std::uint32_t variables() const { return static_cast<std::uint32_t>(clans.size()); }
};

// ---------------------------------------------------------------------------
// Run artifacts.

struct Counters {
    enum Class : int { Feed = 0, Value, VProp, VoteVp, VoteFt, VPost, FtPost, kClasses };

    std::array<std::uint64_t, kClasses> count{};
    std::array<std::uint64_t, kClasses> bytes{};
    std::uint64_t max_value_msg_bytes = 0;
    std::uint64_t signature_wire_bytes = 0;

    std::uint64_t total_count() const;
    std::uint64_t total_bytes() const;
    void record(Class c, std::uint64_t byte_size);
};

const char* to_string(Counters::Class c);

struct RoundRecord {
    RoundId round = 0;
    VariableId variable = 0;
    bool concluded_all = false;
    bool agreement_ok = true;
    Price s = 0;
    ConcludeVia via = ConcludeVia::Cc;
    std::uint64_t smr_seq = 0;
    bool has_cc_bounds = false;
    Price hmin_cc = 0, hmax_cc = 0;
    bool fallback_entered = false;
    bool has_fb_bounds = false;
    Price hmin_fb = 0, hmax_fb = 0;
    Price ideal = 0;          // honest-only aggregate of the deciding phase
    std::int64_t abs_error = 0;
    bool bound_ok = true;     // deciding-path interval check
    SimTime first_conclude = 0, last_conclude = 0;
    bool any_flagged_invalid = false;
    bool feed_diagnostic = false;  // some honest feed had low honest weight

    std::string to_json() const;
};

struct RunReport {
    std::string scenario_name;
    std::uint64_t seed = 0;
    bool liveness_ok = true;
    std::string liveness_detail;
    std::vector<RoundRecord> rounds;
    Counters counters;
    std::string smr_audit;

    bool all_bounds_ok() const;
    bool all_agreement_ok() const;
    std::string decisions_jsonl() const;
    std::string metrics_csv() const;
    std::string serialize() const;  // deterministic full dump
};

RunReport run_scenario(const Scenario& scenario);

// One report row per (axis value, seed); applies value to a copy of the
// template. Axis names: d, noise, n_a, n_c, n_t, t_fallback, delay_cap.
struct SweepRow {
    std::int64_t axis_value = 0;
    std::uint64_t seed = 0;
    std::uint32_t rounds = 0;
    std::uint32_t cc_rounds = 0;
    std::uint32_t fallback_rounds = 0;
    std::uint32_t violations = 0;
    bool liveness_ok = true;
    std::uint64_t total_messages = 0;
    std::uint64_t total_bytes = 0;
};

std::vector<SweepRow> sweep(const Scenario& base, const std::string& axis,
                            const std::vector<std::int64_t>& values,
                            const std::vector<std::uint64_t>& seeds);

Scenario apply_axis(const Scenario& base, const std::string& axis, std::int64_t value);

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& axis);

}  // namespace dora
