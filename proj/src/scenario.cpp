#include "dora/scenario.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dora {

namespace {

using nlohmann::json;

Price parse_price_field(const json& j, const char* what) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_string()) {
        auto p = parse_price_decimal(j.get<std::string>());
        if (!p) throw ConfigError(std::string("bad price for ") + what);
        return *p;
    }
    throw ConfigError(std::string("expected integer micro-units or decimal string for ") + what);
}

NodeStrategy parse_strategy(const std::string& s) {
    if (s == "silent") return NodeStrategy::Silent;
    if (s == "random_value") return NodeStrategy::RandomValue;
    if (s == "extreme_value") return NodeStrategy::ExtremeValue;
    if (s == "cluster_poison") return NodeStrategy::ClusterPoison;
    if (s == "equivocate") return NodeStrategy::Equivocate;
    if (s == "withhold_post") return NodeStrategy::WithholdPost;
    if (s == "stall_fallback") return NodeStrategy::StallFallback;
    throw ConfigError("unknown node strategy: " + s);
}

CorruptSpec parse_corrupt_spec(const json& j) {
    CorruptSpec spec;
    spec.strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (j.contains("offset")) spec.offset = parse_price_field(j.at("offset"), "offset");
    if (j.contains("lo")) spec.lo = parse_price_field(j.at("lo"), "lo");
    if (j.contains("hi")) spec.hi = parse_price_field(j.at("hi"), "hi");
    return spec;
}

DelayModel parse_delay_model(const json& j) {
    DelayModel m;
    std::string model = j.value("model", "fixed");
    if (model == "fixed") {
        m.kind = DelayKind::Fixed;
        m.fixed = j.value("us", std::int64_t{1000});
    } else if (model == "uniform") {
        m.kind = DelayKind::Uniform;
        m.lo = j.at("lo").get<std::int64_t>();
        m.hi = j.at("hi").get<std::int64_t>();
    } else if (model == "targeted") {
        m.kind = DelayKind::Targeted;
        m.fixed = j.value("us", std::int64_t{1000});
        if (j.contains("overrides")) {
            for (const auto& o : j.at("overrides")) {
                NodeId from = o.at("from").get<NodeId>();
                NodeId to = o.at("to").get<NodeId>();
                m.overrides[{from, to}] = o.at("us").get<std::int64_t>();
            }
        }
    } else {
        throw ConfigError("unknown delay model: " + model);
    }
    return m;
}

DataSourceSpec parse_source_spec(const json& j, DataSourceId fallback_id) {
    DataSourceSpec s;
    s.id = j.value("id", fallback_id);
    std::string kind = j.value("kind", "honest");
    if (kind == "honest") {
        s.kind = SourceKind::Honest;
    } else if (kind == "byzantine") {
        s.kind = SourceKind::Byzantine;
        std::string strat = j.value("strategy", "silent");
        if (strat == "silent") s.strategy = SourceStrategy::Silent;
        else if (strat == "extreme") s.strategy = SourceStrategy::ExtremeValue;
        else if (strat == "random") s.strategy = SourceStrategy::RandomValue;
        else throw ConfigError("unknown source strategy: " + strat);
        if (j.contains("offset")) s.strategy_offset = parse_price_field(j.at("offset"), "offset");
        if (j.contains("lo")) s.strategy_lo = parse_price_field(j.at("lo"), "lo");
        if (j.contains("hi")) s.strategy_hi = parse_price_field(j.at("hi"), "hi");
    } else if (kind == "crashed") {
        s.kind = SourceKind::Crashed;
    } else {
        throw ConfigError("unknown source kind: " + kind);
    }
    if (j.contains("noise")) s.noise_half_width = parse_price_field(j.at("noise"), "noise");
    s.weight = j.value("weight", 1u);
    if (s.weight == 0) throw ConfigError("source weight must be >= 1");
    s.availability = j.value("availability", 1.0);
    if (s.availability < 0.0 || s.availability > 1.0) {
        throw ConfigError("availability must be in [0, 1]");
    }
    return s;
}

}  // namespace

ScenarioFile load_scenario_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scenario JSON parse error: ") + e.what());
    }

    ScenarioFile out;
    Scenario& sc = out.base;
    try {
        sc.name = root.value("name", "scenario");

        const auto& pop = root.at("population");
        sc.n_t = pop.at("n_t").get<std::uint32_t>();
        sc.f_t = pop.at("f_t").get<std::uint32_t>();
        if (pop.contains("clans")) {
            for (const auto& clan : pop.at("clans")) {
                sc.clans.push_back(clan.get<std::vector<NodeId>>());
            }
        }
        if (pop.contains("aggregators")) {
            sc.aggregators = pop.at("aggregators").get<std::vector<NodeId>>();
        }
        sc.sample_aggregators = pop.value("sample_aggregators", 0u);
        if (pop.contains("clock_offsets")) {
            for (const auto& o : pop.at("clock_offsets")) {
                sc.clock_offset[o.at("node").get<NodeId>()] = o.at("us").get<std::int64_t>();
            }
        }

        const auto& proto = root.at("protocol");
        sc.d.d = parse_price_field(proto.at("d"), "d");
        sc.t_ds = proto.value("t_ds_us", std::int64_t{30'000'000});
        sc.t_fallback = proto.value("t_fallback_us", std::int64_t{2'000'000});
        std::string variant = proto.value("variant", "timer");
        if (variant == "timer") sc.variant = FeedVariant::Timer;
        else if (variant == "async") sc.variant = FeedVariant::Async;
        else throw ConfigError("unknown feed variant: " + variant);
        sc.rounds = proto.value("rounds", 1u);
        if (proto.contains("f_c")) {
            sc.f_c = proto.at("f_c").get<std::uint32_t>();
        } else if (!sc.clans.empty()) {
            sc.f_c = static_cast<std::uint32_t>((sc.clans[0].size() - 1) / 2);
        }

        const auto& sources = root.at("sources");
        sc.f_d = sources.value("f_d", 0u);
        sc.true_value = parse_price_field(sources.at("true_value"), "true_value");
        DataSourceId next_id = 0;
        for (const auto& s : sources.at("specs")) {
            sc.sources.push_back(parse_source_spec(s, next_id));
            ++next_id;
        }

        if (root.contains("adversary")) {
            const auto& adv = root.at("adversary");
            if (adv.contains("corrupt")) {
                for (const auto& c : adv.at("corrupt")) {
                    NodeId node = c.at("node").get<NodeId>();
                    sc.corrupt[node] = parse_corrupt_spec(c);
                }
            }
            sc.sample_corrupt = adv.value("sample_corrupt", 0u);
            if (adv.contains("sample_corrupt_spec")) {
                sc.sample_corrupt_spec = parse_corrupt_spec(adv.at("sample_corrupt_spec"));
            }
            if (adv.contains("delays")) {
                const auto& d = adv.at("delays");
                if (d.contains("node_to_agg")) sc.delays.node_to_agg = parse_delay_model(d.at("node_to_agg"));
                if (d.contains("agg_to_node")) sc.delays.agg_to_node = parse_delay_model(d.at("agg_to_node"));
                if (d.contains("post_to_smr")) sc.delays.post_to_smr = parse_delay_model(d.at("post_to_smr"));
                if (d.contains("smr_to_observer")) {
                    sc.delays.smr_to_observer = parse_delay_model(d.at("smr_to_observer"));
                }
            }
            sc.delays.cap = adv.value("cap_us", std::int64_t{10'000'000});
        }

        if (root.contains("seeds")) {
            out.seeds = root.at("seeds").get<std::vector<std::uint64_t>>();
        }
        if (out.seeds.empty()) out.seeds.push_back(1);
        sc.seed = out.seeds.front();
        sc.max_events = root.value("max_events", std::uint64_t{20'000'000});
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario field error: ") + e.what());
    }
    return out;
}

ScenarioFile load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_scenario_json(ss.str());
}

SynthSpec load_synth_spec_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("synth spec JSON parse error: ") + e.what());
    }
    SynthSpec spec;
    try {
        for (const auto& seg : root.at("segments")) {
            TrajectorySegment s;
            s.start_ms = seg.at("start_ms").get<std::int64_t>();
            s.end_ms = seg.at("end_ms").get<std::int64_t>();
            s.start_price = parse_price_field(seg.at("start_price"), "start_price");
            s.end_price = parse_price_field(seg.at("end_price"), "end_price");
            s.noise_scale = seg.value("noise_scale", std::int64_t{1});
            spec.segments.push_back(s);
        }
        DataSourceId next_id = 0;
        for (const auto& src : root.at("sources")) {
            SynthSourceSpec s;
            s.id = src.value("id", next_id);
            ++next_id;
            s.period_ms = src.value("period_ms", std::int64_t{1000});
            s.availability = src.value("availability", 1.0);
            if (src.contains("noise")) s.noise_half_width = parse_price_field(src.at("noise"), "noise");
            spec.sources.push_back(s);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth spec field error: ") + e.what());
    }
    return spec;
}

SynthSpec load_synth_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open synth spec file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_synth_spec_json(ss.str());
}

}  // namespace dora
