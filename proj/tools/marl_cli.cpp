#include "marl/errors.hpp"
#include "marl/harness.hpp"

#include "CLI11.hpp"

#include <spdlog/cfg/env.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <iostream>

namespace {

struct Invocation {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::int64_t> stride;
    bool quiet = false;
};

CLI::App* add_command(CLI::App& app, const char* name, const char* description, Invocation& inv) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("config", inv.config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", inv.seed, "override the run seed");
    sub->add_option("--out", inv.out, "override the output directory");
    sub->add_option("--stride", inv.stride, "override the diagnostics stride")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", inv.quiet, "suppress progress logging");
    return sub;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized primal-dual learning for average-reward multi-agent MDPs"};
    app.require_subcommand(1);

    Invocation inv;
    auto* run = add_command(app, "run", "run the configured algorithm", inv);
    auto* compare = add_command(app, "compare", "run rmapd, cspd, iavi and the exact LP on one environment", inv);
    auto* meta = add_command(app, "meta", "best-of-K meta algorithm", inv);
    auto* estimate = add_command(app, "estimate", "estimate t_mix, tau and reference sample counts", inv);

    CLI11_PARSE(app, argc, argv);

    spdlog::set_default_logger(spdlog::default_logger()->clone("marl"));
    spdlog::set_pattern("[%l] %v");
    spdlog::cfg::load_env_levels();
    if (inv.quiet) spdlog::set_level(spdlog::level::warn);

    marl::Command command = marl::Command::run;
    if (compare->parsed()) command = marl::Command::compare;
    else if (meta->parsed()) command = marl::Command::meta;
    else if (estimate->parsed()) command = marl::Command::estimate;
    (void)run;

    try {
        marl::CommandOptions options{inv.seed, inv.out, inv.stride};
        const marl::RunConfig config = marl::apply_options(marl::load_config(inv.config_path), options);
        spdlog::info("resolved config: {}", marl::config_to_json(config).dump());
        const auto summary = marl::execute(command, config);
        if (!inv.quiet) std::cout << marl::format_summary(summary);
    } catch (const marl::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 2;
    }
    return 0;
}
