#include "dora/replay.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "dora/protocol.hpp"

namespace dora {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

std::string trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

IngestResult ingest_csv(std::istream& in) {
    IngestResult result;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trimmed(line);
        if (t.empty()) continue;
        if (!saw_header) {
            saw_header = true;
            if (t != "source,timestamp_ms,price") {
                result.errors.push_back({line_no, "expected header source,timestamp_ms,price"});
            }
            continue;
        }
        auto fields = split_csv_line(t);
        if (fields.size() != 3) {
            result.errors.push_back({line_no, "expected 3 fields"});
            continue;
        }
        Tick tick;
        try {
            std::size_t pos = 0;
            unsigned long src = std::stoul(trimmed(fields[0]), &pos);
            if (pos != trimmed(fields[0]).size()) throw std::invalid_argument("src");
            tick.source = static_cast<DataSourceId>(src);
            std::string ts = trimmed(fields[1]);
            tick.timestamp_ms = std::stoll(ts, &pos);
            if (pos != ts.size()) throw std::invalid_argument("ts");
        } catch (const std::exception&) {
            result.errors.push_back({line_no, "bad source or timestamp"});
            continue;
        }
        auto price = parse_price_decimal(trimmed(fields[2]));
        if (!price) {
            result.errors.push_back({line_no, "bad price: " + trimmed(fields[2])});
            continue;
        }
        tick.price = *price;
        result.ticks.push_back(tick);
    }
    std::sort(result.ticks.begin(), result.ticks.end(), [](const Tick& a, const Tick& b) {
        return std::tie(a.timestamp_ms, a.source, a.price) <
               std::tie(b.timestamp_ms, b.source, b.price);
    });
    return result;
}

IngestResult ingest_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        IngestResult r;
        r.errors.push_back({0, "cannot open " + path});
        return r;
    }
    return ingest_csv(in);
}

std::vector<std::vector<DataSourceId>> replay_assignment(std::uint32_t nodes,
                                                         const std::vector<DataSourceId>& sources,
                                                         std::uint32_t n_pick,
                                                         std::uint64_t seed) {
    if (n_pick > sources.size()) throw ConfigError("n_pick exceeds source count");
    std::vector<std::vector<DataSourceId>> out(nodes);
    for (std::uint32_t node = 0; node < nodes; ++node) {
        Rng rng = Rng::stream(seed, 0x5E1EC7u, node);
        auto idx = rng.sample_without_replacement(static_cast<std::uint32_t>(sources.size()),
                                                  n_pick);
        std::sort(idx.begin(), idx.end());
        for (auto i : idx) out[node].push_back(sources[i]);
    }
    return out;
}

ReplayRounds window_rounds(const std::vector<Tick>& ticks, WindowSpec window,
                           const std::vector<std::vector<DataSourceId>>& assignment,
                           const std::vector<DataSourceId>& all_sources) {
    ReplayRounds out;
    if (ticks.empty()) return out;
    if (window.width_seconds <= 0) throw ConfigError("window width must be positive");
    std::int64_t width_ms = window.width_seconds * 1000;

    std::int64_t first = ticks.front().timestamp_ms / width_ms;
    std::int64_t last = ticks.back().timestamp_ms / width_ms;

    std::map<DataSourceId, SourceAvailability> avail;
    for (auto s : all_sources) avail[s] = SourceAvailability{s, 0, 0};

    std::size_t cursor = 0;
    for (std::int64_t w = first; w <= last; ++w) {
        std::int64_t start = w * width_ms;
        std::int64_t end = start + width_ms;
        // latest tick per source inside [start, end)
        std::map<DataSourceId, Price> latest;
        while (cursor < ticks.size() && ticks[cursor].timestamp_ms < end) {
            if (ticks[cursor].timestamp_ms >= start) {
                latest[ticks[cursor].source] = ticks[cursor].price;
            }
            ++cursor;
        }
        for (auto& [id, a] : avail) {
            a.windows += 1;
            if (!latest.count(id)) a.null_windows += 1;
        }
        WindowRound round;
        round.window_start_ms = start;
        for (std::size_t node = 0; node < assignment.size(); ++node) {
            NodeRoundMedian m;
            m.node = static_cast<NodeId>(node);
            std::vector<Price> values;
            for (DataSourceId src : assignment[node]) {
                auto it = latest.find(src);
                if (it != latest.end()) values.push_back(it->second);
            }
            m.sources_available = static_cast<std::uint32_t>(values.size());
            auto med = robust_median(std::move(values));
            if (med) {
                m.has_value = true;
                m.median = *med;
            }
            round.medians.push_back(m);
        }
        out.rounds.push_back(std::move(round));
    }
    for (auto& [_, a] : avail) out.availability.push_back(a);
    return out;
}

std::vector<SweepPoint> cluster_formation_sweep(const ReplayRounds& rounds,
                                                std::uint32_t n_required,
                                                const std::vector<Price>& d_values,
                                                Price reference_price) {
    std::vector<SweepPoint> out;
    for (Price d : d_values) {
        SweepPoint pt;
        pt.d_microunits = d;
        pt.d_pct = reference_price != 0
                       ? 100.0 * static_cast<double>(d) / static_cast<double>(reference_price)
                       : 0.0;
        for (const auto& round : rounds.rounds) {
            bool counted = false;
            for (const auto& m : round.medians) {
                if (m.has_value) {
                    counted = true;
                    break;
                }
            }
            if (!counted) continue;  // empty window, no round of agreement
            pt.windows += 1;

            std::vector<ValueMsg> values;
            for (const auto& m : round.medians) {
                if (!m.has_value) continue;
                ValueMsg v;
                v.sender = m.node;
                v.value = m.median;
                values.push_back(v);
            }
            if (find_coherent_cluster(values, n_required, AgreementDistance{d})) {
                pt.clusters_formed += 1;
            }
        }
        pt.fraction = pt.windows
                          ? static_cast<double>(pt.clusters_formed) / static_cast<double>(pt.windows)
                          : 0.0;
        out.push_back(pt);
    }
    return out;
}

std::string sweep_points_csv(const std::vector<SweepPoint>& points) {
    std::ostringstream os;
    os << "d_microunits,d_pct,windows,clusters_formed,fraction\n";
    for (const auto& p : points) {
        os << p.d_microunits << "," << p.d_pct << "," << p.windows << "," << p.clusters_formed
           << "," << p.fraction << "\n";
    }
    return os.str();
}

std::vector<Tick> synth_generate(const SynthSpec& spec, std::uint64_t seed) {
    std::vector<Tick> ticks;
    for (const auto& src : spec.sources) {
        if (src.period_ms <= 0) throw ConfigError("synth source period must be positive");
        Rng rng = Rng::stream(seed, 0x71C5u, src.id);
        for (const auto& seg : spec.segments) {
            if (seg.end_ms <= seg.start_ms) throw ConfigError("bad trajectory segment");
            for (std::int64_t t = seg.start_ms; t < seg.end_ms; t += src.period_ms) {
                if (!rng.chance(src.availability)) continue;
                std::int64_t span = seg.end_ms - seg.start_ms;
                Wide base = static_cast<Wide>(seg.start_price) +
                            static_cast<Wide>(seg.end_price - seg.start_price) *
                                (t - seg.start_ms) / span;
                Price noise = 0;
                Price half = src.noise_half_width * seg.noise_scale;
                if (half > 0) noise = rng.between(-half, half);
                Tick tick;
                tick.source = src.id;
                tick.timestamp_ms = t;
                tick.price = static_cast<Price>(base) + noise;
                ticks.push_back(tick);
            }
        }
    }
    std::sort(ticks.begin(), ticks.end(), [](const Tick& a, const Tick& b) {
        return std::tie(a.timestamp_ms, a.source, a.price) <
               std::tie(b.timestamp_ms, b.source, b.price);
    });
    return ticks;
}

std::string ticks_csv(const std::vector<Tick>& ticks) {
    std::ostringstream os;
    os << "source,timestamp_ms,price\n";
    for (const auto& t : ticks) {
        os << t.source << "," << t.timestamp_ms << "," << format_price_decimal(t.price) << "\n";
    }
    return os.str();
}

}  // namespace dora
