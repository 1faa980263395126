#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "superct/core.hpp"

namespace superct {

struct NetworkSpec {
    int depth = 5;       // conv layers, including the final 1-channel one
    int channels = 16;   // hidden channels
    int kernel = 3;      // odd
    bool residual = true;

    void validate() const;
};

// Per-layer kernels [out][in][k][k] (flattened) and biases, 64-bit.
struct NetworkParams {
    NetworkSpec spec;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    int layer_in_channels(int layer) const { return layer == 0 ? 1 : spec.channels; }
    int layer_out_channels(int layer) const {
        return layer == spec.depth - 1 ? 1 : spec.channels;
    }
};

struct TrainConfig {
    int epochs = 4;
    double lr_start = 1e-3;
    double lr_end = 1e-4;    // logarithmic decay per step across the run
    double momentum = 0.99;
    int batch_size = 1;
    double init_variance = 0.005;
    double grad_clip = 3.0;  // max gradient L2 norm per step; 0 disables
    std::uint64_t rng_seed = 0;

    void validate() const;
};

// mu [mm^-1] -> network input units, (HU+1000)/1000.
constexpr double kDenoiserScale = kAttenToHuScale / 1000.0;

NetworkParams init_params(const NetworkSpec& spec, double variance, std::uint64_t seed);

// Attenuation in, attenuation out; normalization handled internally.
Image denoiser_forward(const NetworkParams& params, const Image& input);

// Summed squared error over the batch on the normalized scale, with the exact
// backpropagated gradient. Gradients reuse the NetworkParams layout.
std::pair<double, NetworkParams> loss_and_gradient(
    const NetworkParams& params, const std::vector<std::pair<Image, Image>>& batch);

struct TrainResult {
    NetworkParams params;
    std::vector<double> loss_trace;  // per optimizer step
};

TrainResult train_denoiser(const NetworkParams& params_init,
                           const std::vector<std::pair<Image, Image>>& dataset,
                           const TrainConfig& cfg);

void save_network(const NetworkParams& params, const std::string& path);
NetworkParams load_network(const std::string& path);

}  // namespace superct
