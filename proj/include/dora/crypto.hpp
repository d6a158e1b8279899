#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dora/messages.hpp"

namespace dora {

// Per-node signing abstraction. The default scheme is a keyed MAC derived
// from a scenario-global secret; swapping in a real signature scheme only
// requires another implementation of this interface.
class SignatureScheme {
  public:
    virtual ~SignatureScheme() = default;

    virtual bool has_key(NodeId node) const = 0;
    virtual Signature sign(NodeId node, const std::uint8_t* payload, std::size_t len) const = 0;
    virtual bool verify(NodeId node, const std::uint8_t* payload, std::size_t len,
                        const Signature& sig) const = 0;

    Signature sign(NodeId node, const std::vector<std::uint8_t>& payload) const {
        return sign(node, payload.data(), payload.size());
    }
    bool verify(NodeId node, const std::vector<std::uint8_t>& payload, const Signature& sig) const {
        return verify(node, payload.data(), payload.size(), sig);
    }
};

// Deterministic MAC scheme: secret_i = H(scenario_secret || node),
// sig = H(secret_i || payload). Registry is fixed at scenario setup.
class MacScheme final : public SignatureScheme {
  public:
    MacScheme(std::uint64_t scenario_secret, const std::vector<NodeId>& nodes);

    using SignatureScheme::sign;
    using SignatureScheme::verify;

    bool has_key(NodeId node) const override;
    Signature sign(NodeId node, const std::uint8_t* payload, std::size_t len) const override;
    bool verify(NodeId node, const std::uint8_t* payload, std::size_t len,
                const Signature& sig) const override;

    std::string registry_json() const;

  private:
    std::optional<Digest> key_for(NodeId node) const;

    std::vector<std::pair<NodeId, Digest>> keys_;  // sorted by node
};

enum class QcError {
    InsufficientQuorum,
    MixedDigest,
    InvalidSignature,
};

const char* to_string(QcError e);

// Context needed to reconstruct what each voter signed.
struct VoteContext {
    MsgKind vote_kind = MsgKind::VoteVp;  // VoteVp or VoteFt
    Digest digest{};
    RoundId round = 0;
    VariableId variable = 0;
};

std::vector<std::uint8_t> vote_payload_bytes(const VoteContext& ctx, NodeId voter);

// Collapses duplicate voters, drops invalid signatures, and keeps the
// `threshold` lowest NodeIds so certificates are byte-deterministic.
std::variant<QuorumCertificate, QcError> assemble_qc(const std::vector<VoteMsg>& votes,
                                                     std::size_t threshold,
                                                     const SignatureScheme& scheme);
std::variant<QuorumCertificate, QcError> assemble_qc(const std::vector<FallbackVote>& votes,
                                                     std::size_t threshold,
                                                     const SignatureScheme& scheme,
                                                     const HashFn& hash = default_hash());

// Full structural check: sorted distinct signers, threshold met, digest
// match, every signature valid for the reconstructed vote payload.
bool verify_qc(const QuorumCertificate& qc, const VoteContext& ctx, std::size_t threshold,
               const SignatureScheme& scheme);

ValueMsg make_signed_value(const SignatureScheme& scheme, MsgKind kind, NodeId sender,
                           RoundId round, VariableId variable, Price value);
VPropMsg make_signed_vprop(const SignatureScheme& scheme, MsgKind kind, NodeId aggregator,
                           RoundId round, VariableId variable, std::vector<ValueMsg> members,
                           Price aggregate);
VoteMsg make_signed_vote(const SignatureScheme& scheme, NodeId voter, const Digest& digest,
                         RoundId round, VariableId variable);
FallbackVote make_signed_fallback_vote(const SignatureScheme& scheme, NodeId voter, RoundId round,
                                       VariableId variable);

}  // namespace dora
