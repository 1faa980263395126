#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "superct/pipeline.hpp"

namespace {

superct::ExperimentConfig resolve_config(const std::string& config_path,
                                         const std::string& out_dir, long long seed,
                                         int threads) {
    superct::ExperimentConfig cfg = config_path.empty()
                                        ? superct::default_experiment_config()
                                        : superct::load_experiment_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (threads > 0) {
        cfg.threads = threads;
    } else if (cfg.threads == 0) {
        if (const char* env = std::getenv("SUPERCT_THREADS")) cfg.threads = std::atoi(env);
    }
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"superct: low-dose CT reconstruction with the SUPER framework"};
    app.require_subcommand(1);

    std::string config_path, out_dir, method;
    long long seed = -1;
    int threads = 0;
    app.add_option("--config", config_path, "experiment config file (TOML-style)");
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--seed", seed, "master seed (overrides config)");
    app.add_option("--threads", threads, "worker threads (overrides SUPERCT_THREADS)");

    CLI::App* c_sim = app.add_subcommand("simulate", "generate phantoms, sinograms, weights");
    CLI::App* c_lt = app.add_subcommand("learn-transforms", "learn the transform union");
    CLI::App* c_rec = app.add_subcommand("reconstruct", "reconstruct the test set");
    c_rec->add_option("--method", method,
                      "fbp | pwls-ep | pwls-ultra | denoiser | serial-super | parallel-super")
        ->required();
    CLI::App* c_train = app.add_subcommand("train", "train a model");
    c_train->add_option("--method", method, "denoiser | serial-super | parallel-super")
        ->required();
    CLI::App* c_sweep = app.add_subcommand("sweep-lambda", "lambda selection sweep");
    CLI::App* c_eval = app.add_subcommand("evaluate", "metric report over the test set");
    CLI::App* c_run = app.add_subcommand("run", "full experiment: all stages plus manifest");

    CLI11_PARSE(app, argc, argv);

    try {
        const superct::ExperimentConfig cfg =
            resolve_config(config_path, out_dir, seed, threads);
        if (c_sim->parsed()) return superct::cmd_simulate(cfg);
        if (c_lt->parsed()) return superct::cmd_learn_transforms(cfg);
        if (c_rec->parsed()) return superct::cmd_reconstruct(cfg, method);
        if (c_train->parsed()) return superct::cmd_train(cfg, method);
        if (c_sweep->parsed()) return superct::cmd_sweep_lambda(cfg);
        if (c_eval->parsed()) return superct::cmd_evaluate(cfg);
        if (c_run->parsed()) {
            const superct::ExperimentResult r = superct::run_experiment(cfg);
            std::cout << r.manifest;
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "superct: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
