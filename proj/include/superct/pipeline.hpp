#pragma once

#include <string>
#include <vector>

#include "superct/config.hpp"
#include "superct/eval.hpp"
#include "superct/super.hpp"

namespace superct {

struct Dataset {
    std::vector<SuperSample> train, val, test;
};

// Deterministic in-memory generation of phantoms, sinograms and weights.
// x0 fields stay empty until fill_ep_inits runs PWLS-EP per sample.
Dataset generate_dataset(const ExperimentConfig& cfg);
void fill_ep_inits(Dataset& ds, const ExperimentConfig& cfg);

// Union-of-transforms learning from the first transform_slices training
// references.
TransformLearnResult learn_dataset_transforms(const Dataset& ds, const ExperimentConfig& cfg);

SolverSettings ep_settings(const ExperimentConfig& cfg);
SolverSettings ultra_layer_settings(const ExperimentConfig& cfg);
SolverSettings ultra_standalone_settings(const ExperimentConfig& cfg);
SolverSettings serial_settings(const ExperimentConfig& cfg);
SuperTrainOptions parallel_train_options(const ExperimentConfig& cfg);
SuperTrainOptions serial_train_options(const ExperimentConfig& cfg);

struct ExperimentResult {
    SweepResult sweep;
    std::vector<MetricReport> reports;  // fbp, pwls-ep, pwls-ultra, denoiser, serial, parallel
    std::string manifest;
};

// Full pipeline: data generation, transform learning, baseline + SUPER
// training, lambda sweep, test reconstruction, evaluation. Writes every
// artifact under cfg.output_dir, including manifest.txt; a pure function of
// the config, so reruns reproduce all outputs bitwise.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Subcommand entry points; file-based stages under cfg.output_dir.
int cmd_simulate(const ExperimentConfig& cfg);
int cmd_learn_transforms(const ExperimentConfig& cfg);
int cmd_train(const ExperimentConfig& cfg, const std::string& method);
int cmd_reconstruct(const ExperimentConfig& cfg, const std::string& method);
int cmd_sweep_lambda(const ExperimentConfig& cfg);
int cmd_evaluate(const ExperimentConfig& cfg);

}  // namespace superct
