#include "dora/protocol.hpp"

#include <algorithm>

namespace dora {

bool ClanConfig::is_clan_member(NodeId id) const {
    return std::find(clan.begin(), clan.end(), id) != clan.end();
}

bool ClanConfig::is_aggregator(NodeId id) const {
    return std::find(aggregators.begin(), aggregators.end(), id) != aggregators.end();
}

bool TribeConfig::is_member(NodeId id) const {
    return std::find(tribe.begin(), tribe.end(), id) != tribe.end();
}

const char* to_string(ValidationCode c) {
    switch (c) {
        case ValidationCode::Ok: return "Ok";
        case ValidationCode::NotAggregator: return "NotAggregator";
        case ValidationCode::BadAggregatorSig: return "BadAggregatorSig";
        case ValidationCode::WrongRound: return "WrongRound";
        case ValidationCode::WrongKind: return "WrongKind";
        case ValidationCode::ForeignSigner: return "ForeignSigner";
        case ValidationCode::BadMemberSig: return "BadMemberSig";
        case ValidationCode::DuplicateSender: return "DuplicateSender";
        case ValidationCode::TooSmall: return "TooSmall";
        case ValidationCode::SpanExceedsD: return "SpanExceedsD";
        case ValidationCode::MeanMismatch: return "MeanMismatch";
        case ValidationCode::MedianMismatch: return "MedianMismatch";
    }
    return "?";
}

namespace {

std::vector<ValueMsg> sorted_by_value(std::vector<ValueMsg> obs) {
    std::sort(obs.begin(), obs.end(), [](const ValueMsg& a, const ValueMsg& b) {
        return std::tie(a.value, a.sender) < std::tie(b.value, b.sender);
    });
    return obs;
}

}  // namespace

std::optional<CoherentCluster> find_coherent_cluster(const std::vector<ValueMsg>& observations,
                                                     std::size_t min_size, AgreementDistance d) {
    if (observations.size() < min_size || min_size == 0) return std::nullopt;
    auto sorted = sorted_by_value(observations);
    std::size_t n = sorted.size();
    std::size_t right = 0;
    for (std::size_t left = 0; left + min_size <= n; ++left) {
        if (right < left) right = left;
        while (right + 1 < n && l1_agree(sorted[left].value, sorted[right + 1].value, d)) ++right;
        if (right - left + 1 >= min_size) {
            CoherentCluster cc;
            cc.members.assign(sorted.begin() + left, sorted.begin() + right + 1);
            return cc;
        }
    }
    return std::nullopt;
}

std::optional<CoherentCluster> find_coherent_cluster_rightmost(
    const std::vector<ValueMsg>& observations, std::size_t min_size, AgreementDistance d) {
    if (observations.size() < min_size || min_size == 0) return std::nullopt;
    auto sorted = sorted_by_value(observations);
    std::size_t n = sorted.size();
    for (std::size_t end = n; end >= min_size; --end) {
        std::size_t left = end - min_size;
        if (l1_agree(sorted[left].value, sorted[end - 1].value, d)) {
            CoherentCluster cc;
            cc.members.assign(sorted.begin() + left, sorted.begin() + end);
            return cc;
        }
    }
    return std::nullopt;
}

Price cluster_mean(const CoherentCluster& cluster) {
    Wide sum = 0;
    for (const auto& m : cluster.members) sum += m.value;
    return round_half_even_div(sum, static_cast<std::int64_t>(cluster.members.size()));
}

namespace {

ValidationCode check_members(const std::vector<ValueMsg>& members, MsgKind expected_kind,
                             RoundId round, VariableId variable, const SignatureScheme& scheme,
                             const std::vector<NodeId>& population) {
    std::vector<NodeId> seen;
    for (const auto& m : members) {
        if (m.kind != expected_kind) return ValidationCode::WrongKind;
        if (m.round != round || m.variable != variable) return ValidationCode::WrongRound;
        if (std::find(population.begin(), population.end(), m.sender) == population.end()) {
            return ValidationCode::ForeignSigner;
        }
        if (!scheme.verify(m.sender, m.payload_bytes(), m.signature)) {
            return ValidationCode::BadMemberSig;
        }
        seen.push_back(m.sender);
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
        return ValidationCode::DuplicateSender;
    }
    return ValidationCode::Ok;
}

}  // namespace

ValidationCode validate_vprop_cc(const VPropMsg& prop, const ClanConfig& config, RoundId round,
                                 VariableId variable, const SignatureScheme& scheme) {
    if (prop.kind != MsgKind::VPropCc) return ValidationCode::WrongKind;
    if (prop.round != round || prop.variable != variable) return ValidationCode::WrongRound;
    if (!config.is_aggregator(prop.aggregator)) return ValidationCode::NotAggregator;
    if (!scheme.verify(prop.aggregator, prop.payload_bytes(), prop.signature)) {
        return ValidationCode::BadAggregatorSig;
    }
    if (prop.members.size() < config.cluster_quorum()) return ValidationCode::TooSmall;
    auto code = check_members(prop.members, MsgKind::ValueClan, round, variable, scheme,
                              config.clan);
    if (code != ValidationCode::Ok) return code;
    CoherentCluster cc{prop.members};
    if (!cc.within(config.d)) return ValidationCode::SpanExceedsD;
    if (cluster_mean(cc) != prop.aggregate) return ValidationCode::MeanMismatch;
    return ValidationCode::Ok;
}

ValidationCode validate_vprop_fallback(const VPropMsg& prop, const TribeConfig& tribe,
                                       const ClanConfig& config, RoundId round,
                                       VariableId variable, const SignatureScheme& scheme) {
    if (prop.kind != MsgKind::VPropFallback) return ValidationCode::WrongKind;
    if (prop.round != round || prop.variable != variable) return ValidationCode::WrongRound;
    if (!config.is_aggregator(prop.aggregator)) return ValidationCode::NotAggregator;
    if (!scheme.verify(prop.aggregator, prop.payload_bytes(), prop.signature)) {
        return ValidationCode::BadAggregatorSig;
    }
    if (prop.members.size() < tribe.fallback_quorum()) return ValidationCode::TooSmall;
    auto code = check_members(prop.members, MsgKind::ValueFallback, round, variable, scheme,
                              tribe.tribe);
    if (code != ValidationCode::Ok) return code;
    std::vector<Price> values;
    values.reserve(prop.members.size());
    for (const auto& m : prop.members) values.push_back(m.value);
    auto med = robust_median(std::move(values));
    if (!med || *med != prop.aggregate) return ValidationCode::MedianMismatch;
    return ValidationCode::Ok;
}

NodeProtocol::NodeProtocol(NodeId id, const ClanConfig* clan, const TribeConfig* tribe,
                           const SignatureScheme* scheme, HashFn hash)
    : id_(id), clan_(clan), tribe_(tribe), scheme_(scheme), hash_(std::move(hash)) {}

void NodeProtocol::begin_round(RoundId round, VariableId variable) {
    round_ = round;
    variable_ = variable;
    phase_ = Phase::AwaitingProposal;
    voted_fallback_ = false;
    s_value_ = 0;
    via_ = ConcludeVia::Cc;
    concluded_seq_ = 0;
    last_validation_ = ValidationCode::Ok;
}

ValueMsg NodeProtocol::make_value(Price median) const {
    return make_signed_value(*scheme_, MsgKind::ValueClan, id_, round_, variable_, median);
}

ValueMsg NodeProtocol::make_fallback_value(Price median) const {
    return make_signed_value(*scheme_, MsgKind::ValueFallback, id_, round_, variable_, median);
}

std::optional<VoteMsg> NodeProtocol::handle_vprop(const VPropMsg& prop) {
    if (phase_ == Phase::Concluded || phase_ == Phase::Idle) return std::nullopt;
    ValidationCode code;
    if (prop.kind == MsgKind::VPropCc) {
        code = validate_vprop_cc(prop, *clan_, round_, variable_, *scheme_);
    } else {
        code = validate_vprop_fallback(prop, *tribe_, *clan_, round_, variable_, *scheme_);
    }
    last_validation_ = code;
    if (code != ValidationCode::Ok) return std::nullopt;
    return make_signed_vote(*scheme_, id_, prop.digest(hash_), round_, variable_);
}

std::optional<FallbackVote> NodeProtocol::handle_fallback_timeout() {
    if (phase_ != Phase::AwaitingProposal) return std::nullopt;
    if (voted_fallback_) return std::nullopt;
    voted_fallback_ = true;
    phase_ = Phase::VotedFallback;
    return make_signed_fallback_vote(*scheme_, id_, round_, variable_);
}

bool NodeProtocol::revalidate_tx(const SmrTransaction& tx) const {
    if (tx.kind == TxKind::VPost) {
        if (!tx.proposal) return false;
        std::size_t threshold;
        ValidationCode code;
        if (tx.proposal->kind == MsgKind::VPropCc) {
            threshold = clan_->cluster_quorum();
            code = validate_vprop_cc(*tx.proposal, *clan_, round_, variable_, *scheme_);
        } else {
            threshold = tribe_->fallback_quorum();
            code = validate_vprop_fallback(*tx.proposal, *tribe_, *clan_, round_, variable_,
                                           *scheme_);
        }
        if (code != ValidationCode::Ok) return false;
        VoteContext ctx{MsgKind::VoteVp, tx.proposal->digest(hash_), tx.round, tx.variable};
        return verify_qc(tx.qc, ctx, threshold, *scheme_);
    }
    VoteContext ctx{MsgKind::VoteFt, fallback_topic_digest(tx.round, tx.variable, hash_),
                    tx.round, tx.variable};
    return verify_qc(tx.qc, ctx, clan_->cluster_quorum(), *scheme_);
}

NodeProtocol::WitnessResult NodeProtocol::witness(const SmrLog::Entry& entry) {
    WitnessResult result;
    const SmrTransaction& tx = entry.tx;
    if (tx.round != round_ || tx.variable != variable_) return result;
    if (phase_ == Phase::Idle || phase_ == Phase::Concluded) return result;
    if (!revalidate_tx(tx)) {
        result.flagged_invalid = true;
        return result;
    }
    if (tx.kind == TxKind::VPost) {
        s_value_ = tx.proposal->aggregate;
        via_ = tx.proposal->kind == MsgKind::VPropCc ? ConcludeVia::Cc : ConcludeVia::Fallback;
        concluded_seq_ = entry.seq;
        phase_ = Phase::Concluded;
        result.concluded = true;
        return result;
    }
    // FTPOST: only the first one switches; later ones are no-ops
    if (phase_ != Phase::SwitchedToFallback) {
        phase_ = Phase::SwitchedToFallback;
        result.switched_to_fallback = true;
    }
    return result;
}

AggregatorProtocol::AggregatorProtocol(NodeId id, const ClanConfig* clan, const TribeConfig* tribe,
                                       const SignatureScheme* scheme, HashFn hash)
    : id_(id), clan_(clan), tribe_(tribe), scheme_(scheme), hash_(std::move(hash)) {}

void AggregatorProtocol::begin_round(RoundId round, VariableId variable) {
    round_ = round;
    variable_ = variable;
    clan_obs_.clear();
    fallback_obs_.clear();
    proposals_.clear();
    fallback_votes_.clear();
    proposed_cc_ = false;
    proposed_fallback_ = false;
    posted_vpost_ = false;
    posted_ftpost_ = false;
    own_timer_expired_ = false;
    in_fallback_ = false;
}

std::optional<SmrTransaction> AggregatorProtocol::register_proposal(VPropMsg msg,
                                                                    std::size_t quorum) {
    Digest digest = msg.digest(hash_);
    Proposal p;
    p.msg = std::move(msg);
    p.quorum = quorum;
    proposals_.emplace(digest, std::move(p));
    return std::nullopt;
}

std::optional<VPropMsg> AggregatorProtocol::handle_value(const ValueMsg& value) {
    ingest_value(value);
    return try_propose_cc();
}

void AggregatorProtocol::ingest_value(const ValueMsg& value) {
    if (value.kind != MsgKind::ValueClan) return;
    if (value.round != round_ || value.variable != variable_) return;
    if (!clan_->is_clan_member(value.sender)) return;
    if (!scheme_->verify(value.sender, value.payload_bytes(), value.signature)) return;
    clan_obs_.emplace(value.sender, value);  // first value per sender counts
}

std::optional<VPropMsg> AggregatorProtocol::try_propose_cc() {
    if (proposed_cc_) return std::nullopt;

    std::vector<ValueMsg> obs;
    obs.reserve(clan_obs_.size());
    for (const auto& [_, v] : clan_obs_) obs.push_back(v);
    auto cluster = find_coherent_cluster(obs, clan_->cluster_quorum(), clan_->d);
    if (!cluster) return std::nullopt;

    proposed_cc_ = true;
    Price mu = cluster_mean(*cluster);
    auto prop = make_signed_vprop(*scheme_, MsgKind::VPropCc, id_, round_, variable_,
                                  cluster->members, mu);
    register_proposal(prop, clan_->cluster_quorum());
    return prop;
}

std::optional<VPropMsg> AggregatorProtocol::adversarial_propose(std::vector<ValueMsg> members,
                                                                Price aggregate) {
    if (proposed_cc_) return std::nullopt;
    proposed_cc_ = true;
    auto prop = make_signed_vprop(*scheme_, MsgKind::VPropCc, id_, round_, variable_,
                                  std::move(members), aggregate);
    register_proposal(prop, clan_->cluster_quorum());
    return prop;
}

std::optional<SmrTransaction> AggregatorProtocol::handle_vote(const VoteMsg& vote) {
    if (vote.round != round_ || vote.variable != variable_) return std::nullopt;
    auto it = proposals_.find(vote.digest);
    if (it == proposals_.end()) return std::nullopt;  // unknown digest
    Proposal& prop = it->second;

    bool clan_scope = prop.msg.kind == MsgKind::VPropCc;
    const auto& population = clan_scope ? clan_->clan : tribe_->tribe;
    if (std::find(population.begin(), population.end(), vote.voter) == population.end()) {
        return std::nullopt;
    }
    if (!scheme_->verify(vote.voter, vote.payload_bytes(), vote.signature)) return std::nullopt;
    prop.votes.emplace(vote.voter, vote);

    if (prop.posted || prop.votes.size() < prop.quorum) return std::nullopt;
    std::vector<VoteMsg> votes;
    votes.reserve(prop.votes.size());
    for (const auto& [_, v] : prop.votes) votes.push_back(v);
    auto qc = assemble_qc(votes, prop.quorum, *scheme_);
    if (std::holds_alternative<QcError>(qc)) return std::nullopt;

    prop.posted = true;
    posted_vpost_ = true;
    SmrTransaction tx;
    tx.kind = TxKind::VPost;
    tx.round = round_;
    tx.variable = variable_;
    tx.proposal = prop.msg;
    tx.qc = std::get<QuorumCertificate>(qc);
    return tx;
}

std::optional<SmrTransaction> AggregatorProtocol::maybe_ftpost() {
    if (posted_ftpost_ || !own_timer_expired_) return std::nullopt;
    if (fallback_votes_.size() < clan_->cluster_quorum()) return std::nullopt;
    std::vector<FallbackVote> votes;
    votes.reserve(fallback_votes_.size());
    for (const auto& [_, v] : fallback_votes_) votes.push_back(v);
    auto qc = assemble_qc(votes, clan_->cluster_quorum(), *scheme_, hash_);
    if (std::holds_alternative<QcError>(qc)) return std::nullopt;

    posted_ftpost_ = true;
    SmrTransaction tx;
    tx.kind = TxKind::FtPost;
    tx.round = round_;
    tx.variable = variable_;
    tx.qc = std::get<QuorumCertificate>(qc);
    return tx;
}

std::optional<SmrTransaction> AggregatorProtocol::handle_fallback_vote(const FallbackVote& vote) {
    if (vote.round != round_ || vote.variable != variable_) return std::nullopt;
    if (!clan_->is_clan_member(vote.voter)) return std::nullopt;
    if (!scheme_->verify(vote.voter, vote.payload_bytes(), vote.signature)) return std::nullopt;
    fallback_votes_.emplace(vote.voter, vote);
    return maybe_ftpost();
}

std::optional<SmrTransaction> AggregatorProtocol::note_own_timeout() {
    own_timer_expired_ = true;
    return maybe_ftpost();
}

std::optional<VPropMsg> AggregatorProtocol::switch_to_fallback() {
    in_fallback_ = true;
    return try_propose_fallback();
}

std::optional<VPropMsg> AggregatorProtocol::try_propose_fallback() {
    if (!in_fallback_ || proposed_fallback_) return std::nullopt;
    if (fallback_obs_.size() < tribe_->fallback_quorum()) return std::nullopt;

    proposed_fallback_ = true;  // O frozen at the first 2f_t+1 arrivals
    std::vector<ValueMsg> members;
    std::vector<Price> values;
    members.reserve(fallback_obs_.size());
    for (const auto& [_, v] : fallback_obs_) {
        members.push_back(v);
        values.push_back(v.value);
    }
    Price med = *robust_median(std::move(values));
    auto prop = make_signed_vprop(*scheme_, MsgKind::VPropFallback, id_, round_, variable_,
                                  members, med);
    register_proposal(prop, tribe_->fallback_quorum());
    return prop;
}

std::optional<VPropMsg> AggregatorProtocol::handle_fallback_value(const ValueMsg& value) {
    if (value.kind != MsgKind::ValueFallback) return std::nullopt;
    if (value.round != round_ || value.variable != variable_) return std::nullopt;
    if (!tribe_->is_member(value.sender)) return std::nullopt;
    if (!scheme_->verify(value.sender, value.payload_bytes(), value.signature)) {
        return std::nullopt;
    }
    // May arrive before this aggregator has itself witnessed the FTPOST;
    // buffer and re-check on switch. O freezes at the first 2f_t+1 arrivals.
    if (!proposed_fallback_ && fallback_obs_.size() < tribe_->fallback_quorum()) {
        fallback_obs_.emplace(value.sender, value);
    }
    return try_propose_fallback();
}

}  // namespace dora
