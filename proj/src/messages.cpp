#include "dora/messages.hpp"

#include <algorithm>
#include <sstream>

namespace dora {

namespace {

void write_signature(ByteWriter& w, const Signature& sig) {
    w.blob(sig);
}

void write_value_list_by_sender(ByteWriter& w, std::vector<ValueMsg> list) {
    std::sort(list.begin(), list.end(), [](const ValueMsg& a, const ValueMsg& b) {
        return a.sender < b.sender;
    });
    w.u32(static_cast<std::uint32_t>(list.size()));
    for (const auto& m : list) {
        auto bytes = canonical_serialize(m);
        w.bytes(bytes.data(), bytes.size());
    }
}

void write_value_list_by_value(ByteWriter& w, std::vector<ValueMsg> list) {
    std::sort(list.begin(), list.end(), [](const ValueMsg& a, const ValueMsg& b) {
        return std::tie(a.value, a.sender) < std::tie(b.value, b.sender);
    });
    w.u32(static_cast<std::uint32_t>(list.size()));
    for (const auto& m : list) {
        auto bytes = canonical_serialize(m);
        w.bytes(bytes.data(), bytes.size());
    }
}

void write_digest(ByteWriter& w, const Digest& d) {
    w.bytes(d.data(), d.size());
}

bool read_digest(ByteReader& r, Digest& out) {
    for (auto& b : out) b = r.u8();
    return r.ok();
}

}  // namespace

const char* to_string(MsgKind k) {
    switch (k) {
        case MsgKind::ValueClan: return "VALUE";
        case MsgKind::ValueFallback: return "VALUE_FB";
        case MsgKind::VPropCc: return "VPROP";
        case MsgKind::VPropFallback: return "VPROP_FB";
        case MsgKind::VoteVp: return "VOTEVP";
        case MsgKind::VoteFt: return "VOTEFT";
    }
    return "?";
}

const char* to_string(TxKind k) {
    switch (k) {
        case TxKind::VPost: return "VPOST";
        case TxKind::FtPost: return "FTPOST";
    }
    return "?";
}

std::vector<std::uint8_t> ValueMsg::payload_bytes() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(kind));
    w.u32(sender);
    w.u64(round);
    w.u32(variable);
    w.i64(value);
    return w.take();
}

std::vector<std::uint8_t> canonical_serialize(const ValueMsg& m) {
    ByteWriter w;
    auto payload = m.payload_bytes();
    w.bytes(payload.data(), payload.size());
    write_signature(w, m.signature);
    return w.take();
}

void CoherentCluster::normalize() {
    std::sort(members.begin(), members.end(), [](const ValueMsg& a, const ValueMsg& b) {
        return std::tie(a.value, a.sender) < std::tie(b.value, b.sender);
    });
}

Price CoherentCluster::min_value() const {
    Price m = members.empty() ? 0 : members.front().value;
    for (const auto& v : members) m = std::min(m, v.value);
    return m;
}

Price CoherentCluster::max_value() const {
    Price m = members.empty() ? 0 : members.front().value;
    for (const auto& v : members) m = std::max(m, v.value);
    return m;
}

bool CoherentCluster::within(AgreementDistance d) const {
    if (members.empty()) return true;
    return l1_agree(min_value(), max_value(), d);
}

bool CoherentCluster::senders_distinct() const {
    std::vector<NodeId> ids;
    ids.reserve(members.size());
    for (const auto& m : members) ids.push_back(m.sender);
    std::sort(ids.begin(), ids.end());
    return std::adjacent_find(ids.begin(), ids.end()) == ids.end();
}

void VPropMsg::normalize_members() {
    if (kind == MsgKind::VPropCc) {
        std::sort(members.begin(), members.end(), [](const ValueMsg& a, const ValueMsg& b) {
            return std::tie(a.value, a.sender) < std::tie(b.value, b.sender);
        });
    } else {
        std::sort(members.begin(), members.end(), [](const ValueMsg& a, const ValueMsg& b) {
            return a.sender < b.sender;
        });
    }
}

std::vector<std::uint8_t> VPropMsg::payload_bytes() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(kind));
    w.u32(aggregator);
    w.u64(round);
    w.u32(variable);
    if (kind == MsgKind::VPropCc) {
        write_value_list_by_value(w, members);
    } else {
        write_value_list_by_sender(w, members);
    }
    w.i64(aggregate);
    return w.take();
}

Digest VPropMsg::digest(const HashFn& hash) const {
    auto payload = payload_bytes();
    return hash(payload.data(), payload.size());
}

std::vector<std::uint8_t> canonical_serialize(const VPropMsg& m) {
    ByteWriter w;
    auto payload = m.payload_bytes();
    w.bytes(payload.data(), payload.size());
    write_signature(w, m.signature);
    return w.take();
}

std::vector<std::uint8_t> VoteMsg::payload_bytes() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(MsgKind::VoteVp));
    w.u32(voter);
    write_digest(w, digest);
    w.u64(round);
    w.u32(variable);
    return w.take();
}

std::vector<std::uint8_t> canonical_serialize(const VoteMsg& m) {
    ByteWriter w;
    auto payload = m.payload_bytes();
    w.bytes(payload.data(), payload.size());
    write_signature(w, m.signature);
    return w.take();
}

std::vector<std::uint8_t> FallbackVote::payload_bytes() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(MsgKind::VoteFt));
    w.u32(voter);
    w.u64(round);
    w.u32(variable);
    return w.take();
}

std::vector<std::uint8_t> canonical_serialize(const FallbackVote& m) {
    ByteWriter w;
    auto payload = m.payload_bytes();
    w.bytes(payload.data(), payload.size());
    write_signature(w, m.signature);
    return w.take();
}

Digest fallback_topic_digest(RoundId round, VariableId variable, const HashFn& hash) {
    ByteWriter w;
    w.u8(0xF0);
    w.u64(round);
    w.u32(variable);
    return hash(w.out().data(), w.out().size());
}

std::vector<std::uint8_t> canonical_serialize(const QuorumCertificate& qc) {
    ByteWriter w;
    write_digest(w, qc.digest);
    w.u32(static_cast<std::uint32_t>(qc.signer_set.size()));
    for (std::size_t i = 0; i < qc.signer_set.size(); ++i) {
        w.u32(qc.signer_set[i]);
        write_signature(w, i < qc.signatures.size() ? qc.signatures[i] : Signature{});
    }
    return w.take();
}

std::vector<std::uint8_t> canonical_serialize(const SmrTransaction& tx) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(tx.kind));
    w.u64(tx.round);
    w.u32(tx.variable);
    if (tx.kind == TxKind::VPost) {
        auto prop = tx.proposal ? canonical_serialize(*tx.proposal) : std::vector<std::uint8_t>{};
        w.blob(prop);
    }
    auto qc = canonical_serialize(tx.qc);
    w.blob(qc);
    return w.take();
}

std::optional<ValueMsg> parse_value_msg(ByteReader& r) {
    ValueMsg m;
    auto kind = r.u8();
    if (kind != static_cast<std::uint8_t>(MsgKind::ValueClan) &&
        kind != static_cast<std::uint8_t>(MsgKind::ValueFallback)) {
        return std::nullopt;
    }
    m.kind = static_cast<MsgKind>(kind);
    m.sender = r.u32();
    m.round = r.u64();
    m.variable = r.u32();
    m.value = r.i64();
    m.signature = r.blob();
    if (!r.ok()) return std::nullopt;
    return m;
}

std::optional<VPropMsg> parse_vprop_msg(ByteReader& r) {
    VPropMsg m;
    auto kind = r.u8();
    if (kind != static_cast<std::uint8_t>(MsgKind::VPropCc) &&
        kind != static_cast<std::uint8_t>(MsgKind::VPropFallback)) {
        return std::nullopt;
    }
    m.kind = static_cast<MsgKind>(kind);
    m.aggregator = r.u32();
    m.round = r.u64();
    m.variable = r.u32();
    std::uint32_t n = r.u32();
    if (!r.ok() || n > 1'000'000) return std::nullopt;
    m.members.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto v = parse_value_msg(r);
        if (!v) return std::nullopt;
        m.members.push_back(std::move(*v));
    }
    m.aggregate = r.i64();
    m.signature = r.blob();
    if (!r.ok()) return std::nullopt;
    return m;
}

std::optional<VoteMsg> parse_vote_msg(ByteReader& r) {
    VoteMsg m;
    if (r.u8() != static_cast<std::uint8_t>(MsgKind::VoteVp)) return std::nullopt;
    m.voter = r.u32();
    if (!read_digest(r, m.digest)) return std::nullopt;
    m.round = r.u64();
    m.variable = r.u32();
    m.signature = r.blob();
    if (!r.ok()) return std::nullopt;
    return m;
}

std::optional<FallbackVote> parse_fallback_vote(ByteReader& r) {
    FallbackVote m;
    if (r.u8() != static_cast<std::uint8_t>(MsgKind::VoteFt)) return std::nullopt;
    m.voter = r.u32();
    m.round = r.u64();
    m.variable = r.u32();
    m.signature = r.blob();
    if (!r.ok()) return std::nullopt;
    return m;
}

std::optional<QuorumCertificate> parse_qc(ByteReader& r) {
    QuorumCertificate qc;
    if (!read_digest(r, qc.digest)) return std::nullopt;
    std::uint32_t n = r.u32();
    if (!r.ok() || n > 1'000'000) return std::nullopt;
    for (std::uint32_t i = 0; i < n; ++i) {
        qc.signer_set.push_back(r.u32());
        qc.signatures.push_back(r.blob());
    }
    if (!r.ok()) return std::nullopt;
    return qc;
}

std::optional<SmrTransaction> parse_smr_transaction(ByteReader& r) {
    SmrTransaction tx;
    auto kind = r.u8();
    if (kind != static_cast<std::uint8_t>(TxKind::VPost) &&
        kind != static_cast<std::uint8_t>(TxKind::FtPost)) {
        return std::nullopt;
    }
    tx.kind = static_cast<TxKind>(kind);
    tx.round = r.u64();
    tx.variable = r.u32();
    if (tx.kind == TxKind::VPost) {
        auto blob = r.blob();
        if (!r.ok()) return std::nullopt;
        ByteReader pr(blob);
        auto prop = parse_vprop_msg(pr);
        if (!prop || !pr.at_end()) return std::nullopt;
        tx.proposal = std::move(*prop);
    }
    auto qc_blob = r.blob();
    if (!r.ok()) return std::nullopt;
    ByteReader qr(qc_blob);
    auto qc = parse_qc(qr);
    if (!qc || !qr.at_end()) return std::nullopt;
    tx.qc = std::move(*qc);
    return tx;
}

template <typename T, typename F>
static std::optional<T> parse_whole(const std::vector<std::uint8_t>& bytes, F&& f) {
    ByteReader r(bytes);
    auto v = f(r);
    if (!v || !r.at_end()) return std::nullopt;
    return v;
}

template <>
std::optional<ValueMsg> parse_message<ValueMsg>(const std::vector<std::uint8_t>& b) {
    return parse_whole<ValueMsg>(b, [](ByteReader& r) { return parse_value_msg(r); });
}
template <>
std::optional<VPropMsg> parse_message<VPropMsg>(const std::vector<std::uint8_t>& b) {
    return parse_whole<VPropMsg>(b, [](ByteReader& r) { return parse_vprop_msg(r); });
}
template <>
std::optional<VoteMsg> parse_message<VoteMsg>(const std::vector<std::uint8_t>& b) {
    return parse_whole<VoteMsg>(b, [](ByteReader& r) { return parse_vote_msg(r); });
}
template <>
std::optional<FallbackVote> parse_message<FallbackVote>(const std::vector<std::uint8_t>& b) {
    return parse_whole<FallbackVote>(b, [](ByteReader& r) { return parse_fallback_vote(r); });
}
template <>
std::optional<QuorumCertificate> parse_message<QuorumCertificate>(const std::vector<std::uint8_t>& b) {
    return parse_whole<QuorumCertificate>(b, [](ByteReader& r) { return parse_qc(r); });
}
template <>
std::optional<SmrTransaction> parse_message<SmrTransaction>(const std::vector<std::uint8_t>& b) {
    return parse_whole<SmrTransaction>(b, [](ByteReader& r) { return parse_smr_transaction(r); });
}

std::string debug_json(const SmrTransaction& tx) {
    std::ostringstream os;
    os << "{\"kind\":\"" << to_string(tx.kind) << "\",\"round\":" << tx.round
       << ",\"variable\":" << tx.variable;
    if (tx.proposal) {
        os << ",\"proposal_kind\":\"" << to_string(tx.proposal->kind)
           << "\",\"aggregator\":" << tx.proposal->aggregator
           << ",\"members\":" << tx.proposal->members.size()
           << ",\"aggregate\":" << tx.proposal->aggregate;
    }
    os << ",\"qc_signers\":" << tx.qc.signer_set.size() << ",\"qc_digest\":\""
       << hex_encode(tx.qc.digest) << "\"}";
    return os.str();
}

}  // namespace dora
