#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "superct/core.hpp"
#include "superct/denoiser.hpp"
#include "superct/patch.hpp"
#include "superct/simulate.hpp"
#include "superct/solvers.hpp"
#include "superct/ultra.hpp"

namespace superct {

struct EpConfig {
    double delta = 20.0;
    double beta = 32768.0;  // 2^15
    int iterations = 100;
};

struct SerialConfig {
    double mu = 5e5;
    int alternations = 20;
    int inner = 5;
};

struct DenoiserConfig {
    NetworkSpec spec;
    int epochs = 40;            // per SUPER layer
    int standalone_epochs = 20; // standalone supervised baseline
    double lr_start = 1e-3;
    double lr_end = 1e-4;
    double momentum = 0.99;
    int batch_size = 1;
    double init_variance = 0.005;
    double grad_clip = 3.0;  // max gradient L2 norm per step; 0 disables
    std::uint64_t seed = 7;
};

struct UltraSolverConfig {
    double beta = 5e3;
    double gamma = 20.0;
    int outer = 5;
    int inner = 5;
};

struct ExperimentConfig {
    Geometry geometry;
    NoiseModel noise;

    int n_train = 40;
    int n_val = 5;
    int n_test = 5;
    std::uint64_t phantom_seed = 11;

    PatchConfig patch;

    TransformLearnOptions transforms;
    int transform_slices = 40;  // training phantoms used for transform learning

    EpConfig ep;
    UltraSolverConfig ultra_layer;       // SUPER-layer regime
    UltraSolverConfig ultra_standalone;  // standalone PWLS-ULTRA regime
    SerialConfig serial;
    DenoiserConfig denoiser;

    std::vector<double> lambdas = {0.1, 0.3, 0.5, 0.7, 0.9};
    double lambda = 0.3;  // used when training without a sweep
    int layers = 3;       // L

    std::uint64_t seed = 1;
    std::string output_dir = "out";
    int threads = 0;  // 0: library default

    void validate() const;
};

ExperimentConfig default_experiment_config();

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string serialize_experiment_config(const ExperimentConfig& cfg);

}  // namespace superct
