#pragma once

#include <map>
#include <optional>
#include <vector>

#include "dora/crypto.hpp"
#include "dora/datasource.hpp"
#include "dora/messages.hpp"
#include "dora/smr.hpp"

namespace dora {

struct ClanConfig {
    std::vector<NodeId> clan;         // n_c members
    std::uint32_t f_c = 0;            // < n_c / 2
    std::vector<NodeId> aggregators;  // family, >= 1 honest for liveness
    AgreementDistance d{};
    SimDuration t_fallback = 2'000'000;
    SimDuration t_ds = 30'000'000;
    std::uint32_t f_d = 0;

    bool is_clan_member(NodeId id) const;
    bool is_aggregator(NodeId id) const;
    std::size_t cluster_quorum() const { return f_c + 1; }
};

struct TribeConfig {
    std::vector<NodeId> tribe;  // n_t >= 3 f_t + 1
    std::uint32_t f_t = 0;

    bool is_member(NodeId id) const;
    std::size_t fallback_quorum() const { return 2 * f_t + 1; }
};

enum class ValidationCode {
    Ok,
    NotAggregator,
    BadAggregatorSig,
    WrongRound,
    WrongKind,
    ForeignSigner,
    BadMemberSig,
    DuplicateSender,
    TooSmall,
    SpanExceedsD,
    MeanMismatch,
    MedianMismatch,
};

const char* to_string(ValidationCode c);

// Sorts observations by (value, sender) and scans left to right; the first
// index whose f_c+1 window fits within d wins, extended to every value in
// [v_left, v_left + d]. Empty when no window qualifies.
std::optional<CoherentCluster> find_coherent_cluster(const std::vector<ValueMsg>& observations,
                                                     std::size_t min_size, AgreementDistance d);

// Adversarial variant: rightmost qualifying window, trimmed to exactly
// min_size members (keeps the largest values that still agree).
std::optional<CoherentCluster> find_coherent_cluster_rightmost(
    const std::vector<ValueMsg>& observations, std::size_t min_size, AgreementDistance d);

// 128-bit sum, round half to even. Bit-exact for validators.
Price cluster_mean(const CoherentCluster& cluster);

ValidationCode validate_vprop_cc(const VPropMsg& prop, const ClanConfig& config, RoundId round,
                                 VariableId variable, const SignatureScheme& scheme);

ValidationCode validate_vprop_fallback(const VPropMsg& prop, const TribeConfig& tribe,
                                       const ClanConfig& config, RoundId round,
                                       VariableId variable, const SignatureScheme& scheme);

enum class Phase {
    Idle,
    AwaitingProposal,
    VotedFallback,
    SwitchedToFallback,
    Concluded,
};

enum class ConcludeVia { Cc, Fallback };

// Per-node state machine for one (round, variable) at a time. Emits signed
// messages; transport and timing belong to the caller.
class NodeProtocol {
  public:
    struct WitnessResult {
        bool concluded = false;
        bool switched_to_fallback = false;
        bool flagged_invalid = false;
    };

    NodeProtocol(NodeId id, const ClanConfig* clan, const TribeConfig* tribe,
                 const SignatureScheme* scheme, HashFn hash = default_hash());

    void begin_round(RoundId round, VariableId variable);

    NodeId id() const { return id_; }
    Phase phase() const { return phase_; }
    RoundId round() const { return round_; }
    bool concluded() const { return phase_ == Phase::Concluded; }
    Price s_value() const { return s_value_; }
    ConcludeVia via() const { return via_; }
    std::uint64_t concluded_seq() const { return concluded_seq_; }
    ValidationCode last_validation() const { return last_validation_; }

    ValueMsg make_value(Price median) const;
    ValueMsg make_fallback_value(Price median) const;

    // Vote on any distinct valid proposal; multiple votes per round allowed.
    std::optional<VoteMsg> handle_vprop(const VPropMsg& prop);

    // Emits at most one fallback vote per round, none once concluded.
    std::optional<FallbackVote> handle_fallback_timeout();

    // SMR entries in delivery order. First VPOST concludes the round;
    // an FTPOST before any VPOST switches to the fallback protocol.
    WitnessResult witness(const SmrLog::Entry& entry);

  private:
    bool revalidate_tx(const SmrTransaction& tx) const;

    NodeId id_;
    const ClanConfig* clan_;
    const TribeConfig* tribe_;
    const SignatureScheme* scheme_;
    HashFn hash_;

    Phase phase_ = Phase::Idle;
    RoundId round_ = 0;
    VariableId variable_ = 0;
    bool voted_fallback_ = false;
    Price s_value_ = 0;
    ConcludeVia via_ = ConcludeVia::Cc;
    std::uint64_t concluded_seq_ = 0;
    ValidationCode last_validation_ = ValidationCode::Ok;
};

// Aggregator role: collects VALUEs, proposes once, certifies votes, posts.
// An aggregator that is also a clan/tribe member runs a NodeProtocol besides.
class AggregatorProtocol {
  public:
    AggregatorProtocol(NodeId id, const ClanConfig* clan, const TribeConfig* tribe,
                       const SignatureScheme* scheme, HashFn hash = default_hash());

    void begin_round(RoundId round, VariableId variable);

    NodeId id() const { return id_; }
    bool proposed_cc() const { return proposed_cc_; }
    bool posted_vpost() const { return posted_vpost_; }
    bool posted_ftpost() const { return posted_ftpost_; }
    bool own_timer_expired() const { return own_timer_expired_; }
    bool in_fallback() const { return in_fallback_; }

    // Clan-phase VALUE; proposes when the first coherent cluster appears.
    // Equivalent to ingest_value followed by try_propose_cc.
    std::optional<VPropMsg> handle_value(const ValueMsg& value);

    // Split entry points so a driver can ingest a batch of simultaneous
    // deliveries before evaluating the cluster predicate once.
    void ingest_value(const ValueMsg& value);
    std::optional<VPropMsg> try_propose_cc();

    // Byzantine hook: propose an arbitrary (still well-formed) cluster.
    // Registered like a normal proposal so vote handling works unchanged.
    std::optional<VPropMsg> adversarial_propose(std::vector<ValueMsg> members, Price aggregate);

    // Votes for any of this aggregator's outstanding proposals, clan or
    // fallback. Emits the corresponding VPOST exactly once.
    std::optional<SmrTransaction> handle_vote(const VoteMsg& vote);

    std::optional<SmrTransaction> handle_fallback_vote(const FallbackVote& vote);
    std::optional<SmrTransaction> note_own_timeout();

    // Fallback phase (after witnessing FTPOST). Both may emit the fallback
    // proposal: values can arrive before the FTPOST is locally witnessed.
    std::optional<VPropMsg> switch_to_fallback();
    std::optional<VPropMsg> handle_fallback_value(const ValueMsg& value);

  private:
    struct Proposal {
        VPropMsg msg;
        std::size_t quorum = 0;
        std::map<NodeId, VoteMsg> votes;
        bool posted = false;
    };

    std::optional<SmrTransaction> maybe_ftpost();
    std::optional<SmrTransaction> register_proposal(VPropMsg msg, std::size_t quorum);
    std::optional<VPropMsg> try_propose_fallback();

    NodeId id_;
    const ClanConfig* clan_;
    const TribeConfig* tribe_;
    const SignatureScheme* scheme_;
    HashFn hash_;

    RoundId round_ = 0;
    VariableId variable_ = 0;
    std::map<NodeId, ValueMsg> clan_obs_;
    std::map<NodeId, ValueMsg> fallback_obs_;
    std::map<Digest, Proposal> proposals_;
    std::map<NodeId, FallbackVote> fallback_votes_;
    bool proposed_cc_ = false;
    bool proposed_fallback_ = false;
    bool posted_vpost_ = false;
    bool posted_ftpost_ = false;
    bool own_timer_expired_ = false;
    bool in_fallback_ = false;
};

}  // namespace dora
