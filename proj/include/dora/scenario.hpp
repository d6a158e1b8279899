#pragma once

#include <string>
#include <vector>

#include "dora/netsim.hpp"
#include "dora/replay.hpp"

namespace dora {

// Structured scenario file: sections population, protocol, sources,
// adversary, seeds. Prices may be given as integers (micro-units) or as
// decimal strings ("19605.50"). See docs/scenario_format.md.
struct ScenarioFile {
    Scenario base;                    // template; seed filled per run
    std::vector<std::uint64_t> seeds;
};

ScenarioFile load_scenario_json(const std::string& text);
ScenarioFile load_scenario_file(const std::string& path);

SynthSpec load_synth_spec_json(const std::string& text);
SynthSpec load_synth_spec_file(const std::string& path);

}  // namespace dora
