// Command-line front end: simulate / sweep / probability / replay / synth.
//
// Exit codes: 0 ok, 2 config error, 3 invariant violation, 4 liveness
// budget exhausted.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"

#include "dora/analysis.hpp"
#include "dora/netsim.hpp"
#include "dora/replay.hpp"
#include "dora/scenario.hpp"

namespace fs = std::filesystem;
using namespace dora;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;
constexpr int kExitLiveness = 4;

std::vector<std::uint64_t> parse_u64_list(const std::string& text) {
    // "1,2,3" or "1..30"
    std::vector<std::uint64_t> out;
    auto dots = text.find("..");
    if (dots != std::string::npos) {
        std::uint64_t lo = std::stoull(text.substr(0, dots));
        std::uint64_t hi = std::stoull(text.substr(dots + 2));
        for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoull(item));
    }
    return out;
}

std::vector<std::int64_t> parse_i64_list(const std::string& text) {
    std::vector<std::int64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoll(item));
    }
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << content;
}

int run_simulate(const std::string& config_path, const std::string& out_dir,
                 std::vector<std::uint64_t> seed_override, int rounds_override,
                 std::int64_t d_override, unsigned jobs) {
    ScenarioFile file = load_scenario_file(config_path);
    if (!seed_override.empty()) file.seeds = seed_override;
    if (rounds_override > 0) file.base.rounds = static_cast<std::uint32_t>(rounds_override);
    if (d_override >= 0) file.base.d.d = d_override;

    fs::path dir(out_dir);
    fs::create_directories(dir);

    std::vector<RunReport> reports(file.seeds.size());
    std::vector<std::string> errors(file.seeds.size());
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= file.seeds.size()) return;
                i = next++;
            }
            Scenario sc = file.base;
            sc.seed = file.seeds[i];
            try {
                reports[i] = run_scenario(sc);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    if (jobs <= 1 || file.seeds.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < std::min<unsigned>(jobs, file.seeds.size()); ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) t.join();
    }

    int exit_code = kExitOk;
    for (std::size_t i = 0; i < file.seeds.size(); ++i) {
        if (!errors[i].empty()) {
            std::cerr << "seed " << file.seeds[i] << ": " << errors[i] << "\n";
            return kExitConfig;
        }
        const RunReport& report = reports[i];
        std::string stem = file.base.name + "_seed" + std::to_string(file.seeds[i]);
        write_file(dir / (stem + "_decisions.jsonl"), report.decisions_jsonl());
        write_file(dir / (stem + "_metrics.csv"), report.metrics_csv());
        write_file(dir / (stem + "_smr_audit.jsonl"), report.smr_audit);
        write_file(dir / (stem + "_report.txt"), report.serialize());

        if (!report.liveness_ok) {
            std::cerr << "seed " << file.seeds[i] << ": liveness: " << report.liveness_detail
                      << "\n";
            if (exit_code == kExitOk) exit_code = kExitLiveness;
        } else if (!report.all_bounds_ok() || !report.all_agreement_ok()) {
            std::cerr << "seed " << file.seeds[i] << ": invariant violation\n";
            exit_code = kExitInvariant;
        }
        std::cout << stem << ": rounds=" << report.rounds.size()
                  << " liveness=" << (report.liveness_ok ? "ok" : "violation")
                  << " messages=" << report.counters.total_count() << "\n";
    }
    return exit_code;
}

int run_sweep(const std::string& config_path, const std::string& axis, const std::string& values,
              const std::string& seeds_text, const std::string& out_path) {
    ScenarioFile file = load_scenario_file(config_path);
    auto vals = parse_i64_list(values);
    if (vals.empty()) throw ConfigError("sweep needs at least one axis value");
    std::vector<std::uint64_t> seeds =
        seeds_text.empty() ? file.seeds : parse_u64_list(seeds_text);
    auto rows = sweep(file.base, axis, vals, seeds);
    std::string csv = sweep_csv(rows, axis);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        write_file(out_path, csv);
    }
    return kExitOk;
}

struct ProbabilityArgs {
    std::uint32_t tribe = 0;
    std::uint32_t byz = 0;
    std::uint32_t clan = 0;
    std::uint32_t clans = 5;
    std::string sizes;  // family sweep
    std::uint64_t mc_trials = 0;
    std::uint64_t mc_seed = 1;
    std::string out_path;
};

int run_probability_family(const ProbabilityArgs& args) {
    auto sizes = args.sizes.empty() ? std::vector<std::uint64_t>{1}
                                    : parse_u64_list(args.sizes);
    std::ostringstream os;
    os << "n_a,exact,float,mc,mc_stderr\n";
    for (auto n_a : sizes) {
        auto exact = family_all_byzantine_prob(args.tribe, args.byz,
                                               static_cast<std::uint32_t>(n_a));
        os << n_a << "," << exact.to_string() << "," << exact.to_double();
        if (args.mc_trials > 0) {
            auto mc = mc_family_all_byzantine(args.tribe, args.byz,
                                              static_cast<std::uint32_t>(n_a), args.mc_trials,
                                              args.mc_seed);
            os << "," << mc.p << "," << mc.stderr_;
        } else {
            os << ",,";
        }
        os << "\n";
    }
    if (args.out_path.empty()) std::cout << os.str();
    else write_file(args.out_path, os.str());
    return kExitOk;
}

int run_probability_clan(const ProbabilityArgs& args) {
    auto exact = clan_majority_fail_prob(args.tribe, args.byz, args.clan);
    std::ostringstream os;
    os << "n_c,exact,float,mc,mc_stderr\n";
    os << args.clan << "," << exact.to_string() << "," << exact.to_double();
    if (args.mc_trials > 0) {
        auto mc = mc_clan_majority_fail(args.tribe, args.byz, args.clan, args.mc_trials,
                                        args.mc_seed);
        os << "," << mc.p << "," << mc.stderr_;
    } else {
        os << ",,";
    }
    os << "\n";
    if (args.out_path.empty()) std::cout << os.str();
    else write_file(args.out_path, os.str());
    return kExitOk;
}

int run_probability_clans(ProbabilityArgs args) {
    if (args.clan == 0) args.clan = args.tribe / 5;  // default clan size
    auto exact = any_clan_fail_prob(args.tribe, args.byz, args.clan, args.clans);
    std::ostringstream os;
    os << "clans,n_c,exact,float,mc,mc_stderr\n";
    os << args.clans << "," << args.clan << "," << exact.to_string() << ","
       << exact.to_double();
    if (args.mc_trials > 0) {
        auto mc = mc_any_clan_fail(args.tribe, args.byz, args.clan, args.clans, args.mc_trials,
                                   args.mc_seed);
        os << "," << mc.p << "," << mc.stderr_;
    } else {
        os << ",,";
    }
    os << "\n";
    if (args.out_path.empty()) std::cout << os.str();
    else write_file(args.out_path, os.str());
    return kExitOk;
}

int run_replay(const std::string& csv_path, std::int64_t window_s, std::uint32_t required,
               const std::string& dgrid, const std::string& refprice, std::uint32_t nodes,
               std::uint32_t pick, std::uint64_t seed, const std::string& out_path) {
    auto ingest = ingest_csv_file(csv_path);
    for (const auto& err : ingest.errors) {
        std::cerr << csv_path << ":" << err.line << ": " << err.reason << "\n";
    }
    if (!ingest.errors.empty() && ingest.ticks.empty()) return kExitConfig;

    auto ref = parse_price_decimal(refprice);
    if (!ref) throw ConfigError("bad --refprice");

    // d grid "start:end:step" in percent of the reference price
    double lo = 0, hi = 0, step = 0;
    if (std::sscanf(dgrid.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0) {
        throw ConfigError("bad --dgrid, expected start:end:step in percent");
    }
    std::vector<Price> d_values;
    for (double pct = lo; pct <= hi + 1e-9; pct += step) {
        d_values.push_back(static_cast<Price>(pct / 100.0 * static_cast<double>(*ref)));
    }

    std::vector<DataSourceId> sources;
    for (const auto& t : ingest.ticks) {
        if (std::find(sources.begin(), sources.end(), t.source) == sources.end()) {
            sources.push_back(t.source);
        }
    }
    std::sort(sources.begin(), sources.end());
    if (pick > sources.size()) {
        throw ConfigError("--pick exceeds the number of sources present in the data");
    }

    auto assignment = replay_assignment(nodes, sources, pick, seed);
    auto rounds = window_rounds(ingest.ticks, WindowSpec{window_s}, assignment, sources);
    auto points = cluster_formation_sweep(rounds, required, d_values, *ref);
    std::string csv = sweep_points_csv(points);
    if (out_path.empty()) std::cout << csv;
    else write_file(out_path, csv);

    std::ostringstream avail;
    avail << "source,windows,null_windows,null_pct\n";
    for (const auto& a : rounds.availability) {
        avail << a.source << "," << a.windows << "," << a.null_windows << "," << a.null_pct()
              << "\n";
    }
    if (!out_path.empty()) {
        fs::path p(out_path);
        fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
        write_file(dir / (p.stem().string() + "_availability.csv"), avail.str());
    }
    return kExitOk;
}

int run_synth(const std::string& spec_path, std::uint64_t seed, const std::string& out_path) {
    auto spec = load_synth_spec_file(spec_path);
    auto ticks = synth_generate(spec, seed);
    std::string csv = ticks_csv(ticks);
    if (out_path.empty()) std::cout << csv;
    else write_file(out_path, csv);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributed oracle agreement simulator and calculators"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "run a scenario file across its seeds");
    std::string sim_config, sim_out = "out";
    std::string sim_seeds;
    int sim_rounds = 0;
    std::int64_t sim_d = -1;
    unsigned sim_jobs = 1;
    sim->add_option("--config", sim_config, "scenario JSON")->required();
    sim->add_option("--out", sim_out, "output directory");
    sim->add_option("--seeds", sim_seeds, "override seeds, e.g. 1,2,3 or 1..10");
    sim->add_option("--rounds", sim_rounds, "override round count");
    sim->add_option("--d", sim_d, "override agreement distance (micro-units)");
    sim->add_option("--jobs", sim_jobs, "parallel seeds");

    // sweep
    auto* sw = app.add_subcommand("sweep", "sweep one scenario parameter");
    std::string sw_config, sw_axis, sw_values, sw_seeds, sw_out;
    sw->add_option("--config", sw_config, "scenario JSON")->required();
    sw->add_option("--axis", sw_axis, "d|noise|n_a|n_t|t_fallback|delay_cap|rounds")->required();
    sw->add_option("--values", sw_values, "comma-separated values")->required();
    sw->add_option("--seeds", sw_seeds, "override seeds");
    sw->add_option("--out", sw_out, "output CSV (stdout when omitted)");

    // probability
    auto* prob = app.add_subcommand("probability", "exact + monte-carlo safety calculators");
    prob->require_subcommand(1);
    ProbabilityArgs pa;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--tribe", pa.tribe, "tribe size")->required();
        cmd->add_option("--byz", pa.byz, "byzantine count")->required();
        cmd->add_option("--mc", pa.mc_trials, "monte-carlo trials (0 = skip)");
        cmd->add_option("--mc-seed", pa.mc_seed, "monte-carlo seed");
        cmd->add_option("--out", pa.out_path, "output CSV (stdout when omitted)");
    };
    auto* fam = prob->add_subcommand("family", "P(no honest aggregator in the family)");
    add_common(fam);
    fam->add_option("--sizes", pa.sizes, "family sizes, e.g. 1..30")->required();
    auto* clan_cmd = prob->add_subcommand("clan", "P(byzantine majority in one clan)");
    add_common(clan_cmd);
    clan_cmd->add_option("--clan", pa.clan, "clan size")->required();
    auto* clans_cmd = prob->add_subcommand("clans", "P(some clan has a byzantine majority)");
    add_common(clans_cmd);
    clans_cmd->add_option("--clan", pa.clan, "clan size (default tribe/5)");
    clans_cmd->add_option("--clans", pa.clans, "number of mutually exclusive clans");

    // replay
    auto* rep = app.add_subcommand("replay", "tick CSV to cluster-formation curve");
    std::string rep_csv, rep_dgrid = "0.02:0.55:0.01", rep_ref = "19605.5", rep_out;
    std::int64_t rep_window = 30;
    std::uint32_t rep_required = 4, rep_nodes = 7, rep_pick = 5;
    std::uint64_t rep_seed = 1;
    rep->add_option("--csv", rep_csv, "tick CSV (source,timestamp_ms,price)")->required();
    rep->add_option("--window", rep_window, "window seconds");
    rep->add_option("--required", rep_required, "cluster size to look for");
    rep->add_option("--dgrid", rep_dgrid, "d grid start:end:step, percent of refprice");
    rep->add_option("--refprice", rep_ref, "reference price (decimal)");
    rep->add_option("--nodes", rep_nodes, "simulated node count");
    rep->add_option("--pick", rep_pick, "sources assigned per node");
    rep->add_option("--seed", rep_seed, "assignment seed");
    rep->add_option("--out", rep_out, "output CSV (stdout when omitted)");

    // synth
    auto* syn = app.add_subcommand("synth", "generate synthetic ticks from a spec");
    std::string syn_spec, syn_out;
    std::uint64_t syn_seed = 1;
    syn->add_option("--spec", syn_spec, "synth spec JSON")->required();
    syn->add_option("--seed", syn_seed, "generation seed");
    syn->add_option("--out", syn_out, "output CSV (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            return run_simulate(sim_config, sim_out,
                                sim_seeds.empty() ? std::vector<std::uint64_t>{}
                                                  : parse_u64_list(sim_seeds),
                                sim_rounds, sim_d, sim_jobs);
        }
        if (sw->parsed()) return run_sweep(sw_config, sw_axis, sw_values, sw_seeds, sw_out);
        if (prob->parsed()) {
            if (fam->parsed()) return run_probability_family(pa);
            if (clan_cmd->parsed()) return run_probability_clan(pa);
            if (clans_cmd->parsed()) return run_probability_clans(pa);
        }
        if (rep->parsed()) {
            return run_replay(rep_csv, rep_window, rep_required, rep_dgrid, rep_ref, rep_nodes,
                              rep_pick, rep_seed, rep_out);
        }
        if (syn->parsed()) return run_synth(syn_spec, syn_seed, syn_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}
