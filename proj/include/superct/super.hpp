#pragma once

#include <string>
#include <vector>

#include "superct/core.hpp"
#include "superct/denoiser.hpp"
#include "superct/solvers.hpp"
#include "superct/ultra.hpp"

namespace superct {

struct SuperSample {
    Sinogram y;
    WeightGrid w;
    Image x0;     // initialization, PWLS-EP reconstruction
    Image xstar;  // reference; may be empty for reconstruction-only use
};

struct SuperTrainOptions {
    double lambda = 0.3;
    int layers = 3;            // L
    SolverSettings ultra;      // per-layer unsupervised settings (Gamma)
    PatchConfig patch;
    NetworkSpec net_spec;
    TrainConfig net_train;     // per-layer supervised training
};

struct SuperModel {
    double lambda = 0.3;
    int layers = 0;
    std::vector<NetworkParams> nets;  // one parameter set per layer
    SolverSettings ultra;
    PatchConfig patch;
    TransformUnion tu;
};

struct LayerStat {
    int layer = 0;
    double val_rmse_hu = -1.0;     // negative when no validation set given
    double train_loss = -1.0;      // final supervised loss (normalized scale)
    double unsup_objective = -1.0; // mean final PWLS-ULTRA objective
};
using LayerTrace = std::vector<LayerStat>;

// Pixelwise convex combination lambda*net + (1-lambda)*mbir; the degenerate
// endpoints return the kept branch untouched.
Image combine(const Image& net_out, const Image& mbir_out, double lambda);

SuperModel train_parallel_super(const std::vector<SuperSample>& train_set,
                                const Geometry& geom, const TransformUnion& tu,
                                const SuperTrainOptions& opt,
                                const std::vector<SuperSample>& val_set = {},
                                LayerTrace* trace = nullptr);

Image reconstruct_parallel_super(const SuperModel& model, const Geometry& geom,
                                 const Sinogram& y, const WeightGrid& w,
                                 const Image& x0, LayerTrace* trace = nullptr);

// Serial SUPER: per layer, train/apply the denoiser, then solve PWLS-ULTRA
// with a mu-weighted proximity term anchored at the denoised image.
SuperModel train_serial_super(const std::vector<SuperSample>& train_set,
                              const Geometry& geom, const TransformUnion& tu,
                              const SuperTrainOptions& opt,
                              const std::vector<SuperSample>& val_set = {},
                              LayerTrace* trace = nullptr);

Image reconstruct_serial_super(const SuperModel& model, const Geometry& geom,
                               const Sinogram& y, const WeightGrid& w,
                               const Image& x0, LayerTrace* trace = nullptr);

struct SweepRow {
    double lambda = 0.0;
    std::vector<double> per_layer_val_rmse;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double best_lambda = 0.0;
    SuperModel best_model;
};

// Trains one parallel SUPER model per candidate and selects the lambda with
// the lowest final-layer validation RMSE, ties toward the smaller lambda.
SweepResult sweep_lambda(const std::vector<double>& candidates,
                         const std::vector<SuperSample>& train_set,
                         const std::vector<SuperSample>& val_set,
                         const Geometry& geom, const TransformUnion& tu,
                         const SuperTrainOptions& opt);

void write_sweep_csv(const SweepResult& sweep, const std::string& path);

void save_super_model(const SuperModel& model, const std::string& dir);
SuperModel load_super_model(const std::string& dir);

}  // namespace superct
