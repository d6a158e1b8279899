#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dora/messages.hpp"

namespace dora {

using SimTime = std::int64_t;  // integer microseconds

// Append-only totally ordered log with per-observer asynchronous cursors.
// Observers all see the same sequence; only the timestamps differ. Ready
// times per observer are monotone, so per-observer delivery order always
// equals global order.
class SmrLog {
  public:
    struct Entry {
        std::uint64_t seq = 0;
        SmrTransaction tx;
        SimTime post_time = 0;
        NodeId poster = 0;
    };

    // Structural validation hook; returns an error string for rejects.
    using TxValidator = std::function<std::optional<std::string>(const SmrTransaction&)>;

    SmrLog() = default;
    explicit SmrLog(TxValidator validator) : validator_(std::move(validator)) {}

    void register_observer(NodeId observer);

    // Appends after validation. Returns the sequence number, or an error.
    struct PostResult {
        std::optional<std::uint64_t> seq;
        std::optional<std::string> reject_reason;
    };
    PostResult post(const SmrTransaction& tx, SimTime at, NodeId poster);

    // Test hook: bypasses validation, modeling a compromised SMR.
    std::uint64_t force_append(const SmrTransaction& tx, SimTime at, NodeId poster);

    // Adversary-assigned readiness for one observer. Clamped so readiness
    // stays monotone along the log.
    void set_ready_time(NodeId observer, std::uint64_t seq, SimTime ready);
    SimTime ready_time(NodeId observer, std::uint64_t seq) const;

    // Pops the entry at the observer's cursor if it is ready at `now`.
    std::optional<Entry> deliver_next(NodeId observer, SimTime now);

    std::size_t size() const { return entries_.size(); }
    const Entry& entry(std::uint64_t seq) const { return entries_[seq]; }
    std::uint64_t cursor(NodeId observer) const;

    // JSON-lines audit record: seq, kind, round, variable, digest, poster.
    std::string audit_jsonl() const;

  private:
    struct ObserverState {
        NodeId id = 0;
        std::uint64_t cursor = 0;
        std::vector<SimTime> ready;  // per seq, monotone
    };

    ObserverState* find_observer(NodeId observer);
    const ObserverState* find_observer(NodeId observer) const;

    TxValidator validator_;
    std::vector<Entry> entries_;
    std::vector<ObserverState> observers_;
};

}  // namespace dora
