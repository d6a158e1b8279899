#include "dora/smr.hpp"

#include <algorithm>
#include <sstream>

namespace dora {

void SmrLog::register_observer(NodeId observer) {
    if (find_observer(observer)) return;
    ObserverState st;
    st.id = observer;
    st.ready.resize(entries_.size(), SimTime{0});
    observers_.push_back(std::move(st));
}

SmrLog::ObserverState* SmrLog::find_observer(NodeId observer) {
    for (auto& o : observers_) {
        if (o.id == observer) return &o;
    }
    return nullptr;
}

const SmrLog::ObserverState* SmrLog::find_observer(NodeId observer) const {
    for (const auto& o : observers_) {
        if (o.id == observer) return &o;
    }
    return nullptr;
}

SmrLog::PostResult SmrLog::post(const SmrTransaction& tx, SimTime at, NodeId poster) {
    if (validator_) {
        if (auto reason = validator_(tx)) return {std::nullopt, reason};
    }
    return {force_append(tx, at, poster), std::nullopt};
}

std::uint64_t SmrLog::force_append(const SmrTransaction& tx, SimTime at, NodeId poster) {
    Entry e;
    e.seq = entries_.size();
    e.tx = tx;
    e.post_time = at;
    e.poster = poster;
    entries_.push_back(std::move(e));
    for (auto& o : observers_) {
        SimTime prev = o.ready.empty() ? at : std::max(at, o.ready.back());
        o.ready.push_back(prev);
    }
    return entries_.back().seq;
}

void SmrLog::set_ready_time(NodeId observer, std::uint64_t seq, SimTime ready) {
    auto* o = find_observer(observer);
    if (!o || seq >= o->ready.size()) return;
    SimTime floor = seq == 0 ? entries_[seq].post_time
                             : std::max(entries_[seq].post_time, o->ready[seq - 1]);
    o->ready[seq] = std::max(ready, floor);
    // keep later entries monotone
    for (std::uint64_t s = seq + 1; s < o->ready.size(); ++s) {
        o->ready[s] = std::max(o->ready[s], o->ready[s - 1]);
    }
}

SimTime SmrLog::ready_time(NodeId observer, std::uint64_t seq) const {
    const auto* o = find_observer(observer);
    if (!o || seq >= o->ready.size()) return 0;
    return o->ready[seq];
}

std::optional<SmrLog::Entry> SmrLog::deliver_next(NodeId observer, SimTime now) {
    auto* o = find_observer(observer);
    if (!o) return std::nullopt;
    if (o->cursor >= entries_.size()) return std::nullopt;
    if (o->ready[o->cursor] > now) return std::nullopt;
    return entries_[o->cursor++];
}

std::uint64_t SmrLog::cursor(NodeId observer) const {
    const auto* o = find_observer(observer);
    return o ? o->cursor : 0;
}

std::string SmrLog::audit_jsonl() const {
    std::ostringstream os;
    for (const auto& e : entries_) {
        os << "{\"seq\":" << e.seq << ",\"kind\":\"" << to_string(e.tx.kind)
           << "\",\"round\":" << e.tx.round << ",\"variable\":" << e.tx.variable
           << ",\"digest\":\"" << hex_encode(e.tx.qc.digest) << "\",\"poster\":" << e.poster
           << ",\"post_time\":" << e.post_time << "}\n";
    }
    return os.str();
}

}  // namespace dora
