#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "blockpg/error.hpp"
#include "commands.hpp"
#include "config.hpp"

int main(int argc, char** argv)
{
    using namespace blockpg::app;

    CLI::App app{"Blocked particle Gibbs sampling for hidden Markov models"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
    bool trace = false;
    std::optional<std::size_t> cap_states;

    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--seed", seed, "root seed");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "output directory");
    app.add_flag("--trace", trace, "write the full chain trace");
    app.add_option("--cap-states", cap_states, "cap on enumerated trajectories for exact operators");

    for (const char* name : {"validate", "rates", "sample", "invariance", "stability", "contraction"})
        app.add_subcommand(name);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::Success& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return kExitValidation;
    }

    ExperimentConfig cfg;
    try
    {
        cfg = load_config(config_path);
    }
    catch (const blockpg::ValidationError& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    if (seed)
        cfg.seed = *seed;
    if (threads)
        cfg.threads = *threads;
    if (out_dir)
        cfg.out = *out_dir;
    if (trace)
        cfg.trace = true;
    if (cap_states)
        cfg.cap_states = *cap_states;

    return run_command(app.get_subcommands().front()->get_name(), cfg, std::cout, std::cerr);
}
