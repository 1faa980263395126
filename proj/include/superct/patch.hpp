#pragma once

#include <Eigen/Dense>

#include "superct/core.hpp"

namespace superct {

struct PatchConfig {
    int patch_side = 8;
    int stride = 1;

    int dim() const { return patch_side * patch_side; }  // l
    void validate() const;
};

// Number of interior patch positions per axis and in total.
int patch_count_1d(int extent, const PatchConfig& cfg);
int patch_count(int rows, int cols, const PatchConfig& cfg);

// Column j holds P_j x; patch positions ordered row-major, patches
// vectorized row-major.
Eigen::MatrixXd extract_patches(const Image& img, const PatchConfig& cfg);

// Exact adjoint of extract_patches: sum_j P_j^T col_j.
Image aggregate_patches(const Eigen::MatrixXd& patches, const PatchConfig& cfg,
                        int rows, int cols, double pixel_size_mm);

// Per-pixel coverage count, diag(sum_j P_j^T P_j).
Image patch_weight(const PatchConfig& cfg, int rows, int cols, double pixel_size_mm);

}  // namespace superct
