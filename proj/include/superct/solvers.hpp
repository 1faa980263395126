#pragma once

#include <utility>
#include <vector>

#include "superct/core.hpp"
#include "superct/patch.hpp"
#include "superct/ultra.hpp"

namespace superct {

// Hyperparameter block Gamma shared by the model-based solvers. delta, gamma
// and mu are on the solvers' internal HU-like image scale.
struct SolverSettings {
    double beta = 5e3;
    double gamma = 20.0;    // ULTRA threshold
    int outer_iters = 5;
    int inner_iters = 5;
    double ep_delta = 20.0; // EP hyperbola edge parameter
    double mu = 0.0;        // proximity weight (serial SUPER)
    bool nonneg = true;

    void validate() const;
};

struct TraceRow {
    int layer = 0;
    int alternation = 0;
    int inner_step = 0;
    double objective = 0.0;
    double rmse_hu = -1.0;  // negative when no reference was supplied
};
using Trace = std::vector<TraceRow>;

// PWLS with edge-preserving hyperbola regularization over 8-neighbor pixel
// differences, minimized by diagonally majorized projected gradient steps.
Image pwls_ep(const Sinogram& y, const WeightGrid& w, const Geometry& geom,
              const SolverSettings& settings, const Image& x_init,
              Trace* trace = nullptr, const Image* reference = nullptr);

// PWLS-ULTRA alternating minimization: joint clustering/sparse coding, then
// inner majorized image updates; composite objective is nonincreasing.
std::pair<Image, SparseCodeResult> pwls_ultra(
    const Sinogram& y, const WeightGrid& w, const Geometry& geom,
    const TransformUnion& tu, const PatchConfig& patch_cfg,
    const SolverSettings& settings, const Image& x_init,
    Trace* trace = nullptr, const Image* reference = nullptr);

// PWLS-ULTRA plus mu * ||x - anchor||^2 on the internal image scale; the
// extra quadratic joins the majorizer diagonal.
Image pwls_ultra_prox(const Sinogram& y, const WeightGrid& w, const Geometry& geom,
                      const TransformUnion& tu, const PatchConfig& patch_cfg,
                      const SolverSettings& settings, const Image& x_init,
                      const Image& anchor, Trace* trace = nullptr,
                      const Image* reference = nullptr);

void write_trace_csv(const Trace& trace, const std::string& path);

}  // namespace superct
