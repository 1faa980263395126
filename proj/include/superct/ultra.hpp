#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "superct/core.hpp"
#include "superct/patch.hpp"

namespace superct {

struct TransformUnion {
    std::vector<Eigen::MatrixXd> omegas;  // K square l x l transforms
    double gamma = 20.0;

    int clusters() const { return static_cast<int>(omegas.size()); }
    int dim() const { return omegas.empty() ? 0 : static_cast<int>(omegas[0].rows()); }
    void validate() const;
    // Largest squared singular value over all transforms; majorizer bound for
    // the patch penalty Hessian.
    double max_spectral_norm_sq() const;
};

struct SparseCodeResult {
    std::vector<int> cluster;        // per patch, 0-based
    Eigen::MatrixXd codes;           // l x J
    std::vector<double> contribution; // ||Omega_k p - z||^2 + gamma^2 ||z||_0
    double total = 0.0;
};

// z_i = v_i if |v_i| > gamma else 0; exact minimizer of ||v-z||^2 + gamma^2 ||z||_0,
// ties (|v_i| == gamma) resolved to zero.
Eigen::VectorXd hard_threshold(const Eigen::VectorXd& v, double gamma);

// Joint clustering + sparse coding; per patch the (cluster, code) pair that
// minimizes the penalty, ties broken toward the lowest cluster index.
SparseCodeResult cluster_and_code(const Eigen::MatrixXd& patches, const TransformUnion& tu);

struct TransformLearnOptions {
    int clusters = 5;        // K
    double gamma = 20.0;
    int iterations = 20;
    double lambda0 = 0.01;   // regularization scale for the transform update
    std::uint64_t rng_seed = 0;
};

struct TransformLearnResult {
    TransformUnion tu;
    std::vector<double> objective_trace;  // one value per full alternation
};

// Alternates cluster_and_code with the closed-form per-cluster transform
// update for ||Omega Y - Z||_F^2 + lambda (||Omega||_F^2 - log|det Omega|).
TransformLearnResult learn_transforms(const Eigen::MatrixXd& training_patches,
                                      const TransformLearnOptions& opt);

// Eq.-style regularizer value at the jointly optimal clustering and codes.
std::pair<double, SparseCodeResult> ultra_regularizer_value(const Image& img,
                                                            const TransformUnion& tu,
                                                            const PatchConfig& cfg);

// 2D DCT-II orthonormal transform of size side^2 x side^2, row-major patch order.
Eigen::MatrixXd dct2_transform(int side);

void save_transform_union(const TransformUnion& tu, const std::string& path);
TransformUnion load_transform_union(const std::string& path);

}  // namespace superct
