#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dora/hash.hpp"
#include "dora/price.hpp"
#include "dora/serial.hpp"

namespace dora {

using Signature = std::vector<std::uint8_t>;

// One byte of kind tag leads every canonical encoding. VALUE carries the
// protocol phase in its tag so a clan-phase median can never be replayed
// into a fallback observation set.
enum class MsgKind : std::uint8_t {
    ValueClan = 0x01,
    ValueFallback = 0x02,
    VPropCc = 0x03,
    VPropFallback = 0x04,
    VoteVp = 0x05,
    VoteFt = 0x06,
};

enum class TxKind : std::uint8_t {
    VPost = 0x07,
    FtPost = 0x08,
};

const char* to_string(MsgKind k);
const char* to_string(TxKind k);

// A node's signed median for a round.
struct ValueMsg {
    MsgKind kind = MsgKind::ValueClan;  // ValueClan or ValueFallback
    NodeId sender = 0;
    RoundId round = 0;
    VariableId variable = 0;
    Price value = 0;
    Signature signature;

    std::vector<std::uint8_t> payload_bytes() const;

    bool operator==(const ValueMsg& o) const = default;
};

// Signed VALUE messages whose values lie pairwise within the agreement
// distance. Members stay sorted ascending by (value, sender).
struct CoherentCluster {
    std::vector<ValueMsg> members;

    void normalize();
    Price min_value() const;
    Price max_value() const;
    bool within(AgreementDistance d) const;
    bool senders_distinct() const;

    bool operator==(const CoherentCluster& o) const = default;
};

// Aggregator proposal. CC payload carries a cluster and its mean; the
// fallback payload carries an observation set and its median.
struct VPropMsg {
    MsgKind kind = MsgKind::VPropCc;  // VPropCc or VPropFallback
    NodeId aggregator = 0;
    RoundId round = 0;
    VariableId variable = 0;
    std::vector<ValueMsg> members;  // cluster (by value,sender) or observations (by sender)
    Price aggregate = 0;            // mean for CC, median for fallback
    Signature signature;

    void normalize_members();
    std::vector<std::uint8_t> payload_bytes() const;
    Digest digest(const HashFn& hash = default_hash()) const;

    bool operator==(const VPropMsg& o) const = default;
};

// Approval of one specific proposal, identified by digest.
struct VoteMsg {
    NodeId voter = 0;
    Digest digest{};
    RoundId round = 0;
    VariableId variable = 0;
    Signature signature;

    std::vector<std::uint8_t> payload_bytes() const;

    bool operator==(const VoteMsg& o) const = default;
};

// Vote to abandon cluster formation for the round.
struct FallbackVote {
    NodeId voter = 0;
    RoundId round = 0;
    VariableId variable = 0;
    Signature signature;

    std::vector<std::uint8_t> payload_bytes() const;

    bool operator==(const FallbackVote& o) const = default;
};

// All fallback votes of a round certify this synthetic topic digest.
Digest fallback_topic_digest(RoundId round, VariableId variable,
                             const HashFn& hash = default_hash());

struct QuorumCertificate {
    Digest digest{};
    std::vector<NodeId> signer_set;  // sorted ascending
    std::vector<Signature> signatures;

    bool operator==(const QuorumCertificate& o) const = default;
};

// What aggregators post: either a certified proposal or a certified
// fallback trigger.
struct SmrTransaction {
    TxKind kind = TxKind::VPost;
    RoundId round = 0;
    VariableId variable = 0;
    std::optional<VPropMsg> proposal;  // present for VPost
    QuorumCertificate qc;

    bool operator==(const SmrTransaction& o) const = default;
};

// Canonical byte encodings (signature included, lists sort-normalized).
std::vector<std::uint8_t> canonical_serialize(const ValueMsg& m);
std::vector<std::uint8_t> canonical_serialize(const VPropMsg& m);
std::vector<std::uint8_t> canonical_serialize(const VoteMsg& m);
std::vector<std::uint8_t> canonical_serialize(const FallbackVote& m);
std::vector<std::uint8_t> canonical_serialize(const QuorumCertificate& qc);
std::vector<std::uint8_t> canonical_serialize(const SmrTransaction& tx);

std::optional<ValueMsg> parse_value_msg(ByteReader& r);
std::optional<VPropMsg> parse_vprop_msg(ByteReader& r);
std::optional<VoteMsg> parse_vote_msg(ByteReader& r);
std::optional<FallbackVote> parse_fallback_vote(ByteReader& r);
std::optional<QuorumCertificate> parse_qc(ByteReader& r);
std::optional<SmrTransaction> parse_smr_transaction(ByteReader& r);

template <typename T>
std::optional<T> parse_message(const std::vector<std::uint8_t>& bytes);

// Debug rendering for logs; never signed, not canonical.
std::string debug_json(const SmrTransaction& tx);

}  // namespace dora
