#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "repertoire/config.hpp"
#include "repertoire/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Defender repertoire experiments"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::size_t jobs = 1;
    std::optional<double> kkt_tol;
    std::optional<std::size_t> max_iters;

    for (const auto& name : repertoire::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "Config file (key = value lines or JSON)")->required();
        sub->add_option("--seed", seed, "Master seed");
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--kkt-tol", kkt_tol, "Optimizer KKT tolerance");
        sub->add_option("--max-iters", max_iters, "Optimizer iteration limit");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        auto cfg = repertoire::load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (kkt_tol) cfg.optimizer_kkt_tol = *kkt_tol;
        if (max_iters) cfg.optimizer_max_iters = *max_iters;
        if (const char* env = std::getenv("REPERTOIRE_OUT"); env && *env) out_dir = env;
        if (!out_dir.empty()) cfg.out = out_dir;
        cfg.validate();

        repertoire::RunOptions opts;
        opts.out_dir = cfg.out;
        opts.jobs = jobs;
        repertoire::run_command(command, cfg, opts);
    } catch (const std::exception& e) {
        std::cerr << "repertoire " << command << ": " << e.what() << '\n';
        return repertoire::exit_code_for(e);
    }
    return 0;
}
