#pragma once

// Orchestration behind the CLI subcommands. Every command writes its CSV
// traces and a summary.json into the configured output directory and
// returns the summary.

#include "marl/config.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace marl {

enum class Command { run, compare, meta, estimate };

/// Command-line flags that take precedence over the config file.
struct CommandOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::int64_t> stride;
};

RunConfig apply_options(RunConfig config, const CommandOptions& options);

/// Hyperparameters a config resolves to for `mdp`.
HyperParams resolved_hyperparams(const RunConfig& config, const TabularMdp& mdp);

nlohmann::json execute(Command command, const RunConfig& config);

/// Deterministic rendering: sorted keys, two-space indent, trailing newline.
std::string format_summary(const nlohmann::json& summary);

} // namespace marl
