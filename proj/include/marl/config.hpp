#pragma once

// Run configuration loaded from a JSON document. See docs/config.md for the
// full key tree.

#include "marl/meta.hpp"
#include "marl/mdp.hpp"
#include "marl/network.hpp"
#include "marl/primal_dual.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace marl {

enum class EnvironmentKind { grid, random };

struct EnvironmentConfig {
    EnvironmentKind kind = EnvironmentKind::grid;
    GridWorldSpec grid = GridWorldSpec::cooperative_navigation(2);
    int states = 4;             // random only
    int agents = 2;             // random only; grid uses grid.num_agents
    int actions_per_agent = 2;  // random only
    std::uint64_t seed = 0;     // random only

    int num_agents() const { return kind == EnvironmentKind::grid ? grid.num_agents : agents; }
};

struct NetworkConfig {
    GraphModel model = GraphModel::ring;
    double p = 0.3;
    int window = 1;  ///< B
    std::vector<EdgeSet> edge_sets;
    std::optional<std::uint64_t> seed;
};

enum class AlgorithmName { rmapd, cspd, iavi, lp, meta };

struct AlgorithmConfig {
    AlgorithmName name = AlgorithmName::rmapd;
    double t_mix = 1.0;
    double tau = 4.0;
    HyperOverrides overrides;
    SamplingMode sampling = SamplingMode::generative;
};

struct OutputConfig {
    std::string dir = "out";
    std::int64_t stride = 100;
};

struct RunConfig {
    std::uint64_t seed = 0;
    EnvironmentConfig environment;
    NetworkConfig network;
    AlgorithmConfig algorithm;
    MetaConfig meta;
    OutputConfig output;
};

/// Parses and validates a config document. Throws ConfigError naming the
/// offending key path on unknown keys, duplicate keys, type mismatches and
/// out-of-range values.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// The fully resolved config as JSON, defaults included.
nlohmann::json config_to_json(const RunConfig& config);

std::string to_string(AlgorithmName name);
std::string to_string(GraphModel model);

TabularMdp build_environment(const EnvironmentConfig& env);
GraphSchedule build_schedule(const NetworkConfig& network, int num_agents, std::uint64_t run_seed);

} // namespace marl
