#include "dora/crypto.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace dora {

MacScheme::MacScheme(std::uint64_t scenario_secret, const std::vector<NodeId>& nodes) {
    keys_.reserve(nodes.size());
    for (NodeId n : nodes) {
        ByteWriter w;
        w.u64(scenario_secret);
        w.u32(n);
        keys_.emplace_back(n, sha256(w.out()));
    }
    std::sort(keys_.begin(), keys_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    keys_.erase(std::unique(keys_.begin(), keys_.end(),
                            [](const auto& a, const auto& b) { return a.first == b.first; }),
                keys_.end());
}

std::optional<Digest> MacScheme::key_for(NodeId node) const {
    auto it = std::lower_bound(keys_.begin(), keys_.end(), node,
                               [](const auto& kv, NodeId n) { return kv.first < n; });
    if (it == keys_.end() || it->first != node) return std::nullopt;
    return it->second;
}

bool MacScheme::has_key(NodeId node) const {
    return key_for(node).has_value();
}

Signature MacScheme::sign(NodeId node, const std::uint8_t* payload, std::size_t len) const {
    auto key = key_for(node);
    if (!key) return {};
    std::vector<std::uint8_t> buf;
    buf.reserve(key->size() + len);
    buf.insert(buf.end(), key->begin(), key->end());
    buf.insert(buf.end(), payload, payload + len);
    Digest d = sha256(buf);
    return Signature(d.begin(), d.end());
}

bool MacScheme::verify(NodeId node, const std::uint8_t* payload, std::size_t len,
                       const Signature& sig) const {
    if (!has_key(node)) return false;
    return sign(node, payload, len) == sig;
}

std::string MacScheme::registry_json() const {
    std::ostringstream os;
    os << "{";
    bool first = true;
    for (const auto& [node, key] : keys_) {
        if (!first) os << ",";
        first = false;
        os << "\"" << node << "\":\"" << hex_encode(key) << "\"";
    }
    os << "}";
    return os.str();
}

const char* to_string(QcError e) {
    switch (e) {
        case QcError::InsufficientQuorum: return "InsufficientQuorum";
        case QcError::MixedDigest: return "MixedDigest";
        case QcError::InvalidSignature: return "InvalidSignature";
    }
    return "?";
}

std::vector<std::uint8_t> vote_payload_bytes(const VoteContext& ctx, NodeId voter) {
    if (ctx.vote_kind == MsgKind::VoteVp) {
        VoteMsg v;
        v.voter = voter;
        v.digest = ctx.digest;
        v.round = ctx.round;
        v.variable = ctx.variable;
        return v.payload_bytes();
    }
    FallbackVote v;
    v.voter = voter;
    v.round = ctx.round;
    v.variable = ctx.variable;
    return v.payload_bytes();
}

namespace {

std::variant<QuorumCertificate, QcError> build_qc(
    const Digest& digest, std::map<NodeId, Signature> by_voter, std::size_t threshold) {
    if (by_voter.size() < threshold) return QcError::InsufficientQuorum;
    QuorumCertificate qc;
    qc.digest = digest;
    for (const auto& [node, sig] : by_voter) {
        if (qc.signer_set.size() == threshold) break;  // keep the lowest ids
        qc.signer_set.push_back(node);
        qc.signatures.push_back(sig);
    }
    return qc;
}

}  // namespace

std::variant<QuorumCertificate, QcError> assemble_qc(const std::vector<VoteMsg>& votes,
                                                     std::size_t threshold,
                                                     const SignatureScheme& scheme) {
    if (votes.empty()) return QcError::InsufficientQuorum;
    const Digest& digest = votes.front().digest;
    std::map<NodeId, Signature> by_voter;
    for (const auto& v : votes) {
        if (v.digest != digest || v.round != votes.front().round ||
            v.variable != votes.front().variable) {
            return QcError::MixedDigest;
        }
        if (!scheme.verify(v.voter, v.payload_bytes(), v.signature)) continue;
        by_voter.emplace(v.voter, v.signature);  // duplicates collapse, first wins
    }
    return build_qc(digest, std::move(by_voter), threshold);
}

std::variant<QuorumCertificate, QcError> assemble_qc(const std::vector<FallbackVote>& votes,
                                                     std::size_t threshold,
                                                     const SignatureScheme& scheme,
                                                     const HashFn& hash) {
    if (votes.empty()) return QcError::InsufficientQuorum;
    Digest digest = fallback_topic_digest(votes.front().round, votes.front().variable, hash);
    std::map<NodeId, Signature> by_voter;
    for (const auto& v : votes) {
        if (v.round != votes.front().round || v.variable != votes.front().variable) {
            return QcError::MixedDigest;
        }
        if (!scheme.verify(v.voter, v.payload_bytes(), v.signature)) continue;
        by_voter.emplace(v.voter, v.signature);
    }
    return build_qc(digest, std::move(by_voter), threshold);
}

bool verify_qc(const QuorumCertificate& qc, const VoteContext& ctx, std::size_t threshold,
               const SignatureScheme& scheme) {
    if (qc.digest != ctx.digest) return false;
    if (qc.signer_set.size() < threshold) return false;
    if (qc.signer_set.size() != qc.signatures.size()) return false;
    for (std::size_t i = 0; i + 1 < qc.signer_set.size(); ++i) {
        if (qc.signer_set[i] >= qc.signer_set[i + 1]) return false;  // sorted + distinct
    }
    for (std::size_t i = 0; i < qc.signer_set.size(); ++i) {
        auto payload = vote_payload_bytes(ctx, qc.signer_set[i]);
        if (!scheme.verify(qc.signer_set[i], payload, qc.signatures[i])) return false;
    }
    return true;
}

ValueMsg make_signed_value(const SignatureScheme& scheme, MsgKind kind, NodeId sender,
                           RoundId round, VariableId variable, Price value) {
    ValueMsg m;
    m.kind = kind;
    m.sender = sender;
    m.round = round;
    m.variable = variable;
    m.value = value;
    m.signature = scheme.sign(sender, m.payload_bytes());
    return m;
}

VPropMsg make_signed_vprop(const SignatureScheme& scheme, MsgKind kind, NodeId aggregator,
                           RoundId round, VariableId variable, std::vector<ValueMsg> members,
                           Price aggregate) {
    VPropMsg m;
    m.kind = kind;
    m.aggregator = aggregator;
    m.round = round;
    m.variable = variable;
    m.members = std::move(members);
    m.aggregate = aggregate;
    m.normalize_members();
    m.signature = scheme.sign(aggregator, m.payload_bytes());
    return m;
}

VoteMsg make_signed_vote(const SignatureScheme& scheme, NodeId voter, const Digest& digest,
                         RoundId round, VariableId variable) {
    VoteMsg m;
    m.voter = voter;
    m.digest = digest;
    m.round = round;
    m.variable = variable;
    m.signature = scheme.sign(voter, m.payload_bytes());
    return m;
}

FallbackVote make_signed_fallback_vote(const SignatureScheme& scheme, NodeId voter, RoundId round,
                                       VariableId variable) {
    FallbackVote m;
    m.voter = voter;
    m.round = round;
    m.variable = variable;
    m.signature = scheme.sign(voter, m.payload_bytes());
    return m;
}

}  // namespace dora
