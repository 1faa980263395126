#include "superct/patch.hpp"

namespace superct {

void PatchConfig::validate() const {
    if (patch_side < 1) throw std::invalid_argument("patch config: patch_side must be >= 1");
    if (stride < 1 || stride > patch_side)
        throw std::invalid_argument("patch config: stride must be in [1, patch_side]");
}

int patch_count_1d(int extent, const PatchConfig& cfg) {
    return (extent - cfg.patch_side) / cfg.stride + 1;
}

int patch_count(int rows, int cols, const PatchConfig& cfg) {
    return patch_count_1d(rows, cfg) * patch_count_1d(cols, cfg);
}

static void check_size(int rows, int cols, const PatchConfig& cfg) {
    cfg.validate();
    if (rows < cfg.patch_side || cols < cfg.patch_side)
        throw std::invalid_argument("patch: image smaller than patch");
}

Eigen::MatrixXd extract_patches(const Image& img, const PatchConfig& cfg) {
    check_size(img.rows, img.cols, cfg);
    const int p = cfg.patch_side, s = cfg.stride;
    const int nr = patch_count_1d(img.rows, cfg);
    const int nc = patch_count_1d(img.cols, cfg);
    Eigen::MatrixXd out(p * p, static_cast<Eigen::Index>(nr) * nc);
    Eigen::Index j = 0;
    for (int pr = 0; pr < nr; ++pr) {
        for (int pc = 0; pc < nc; ++pc, ++j) {
            int i = 0;
            for (int r = 0; r < p; ++r)
                for (int c = 0; c < p; ++c, ++i)
                    out(i, j) = img.at(pr * s + r, pc * s + c);
        }
    }
    return out;
}

Image aggregate_patches(const Eigen::MatrixXd& patches, const PatchConfig& cfg,
                        int rows, int cols, double pixel_size_mm) {
    check_size(rows, cols, cfg);
    const int p = cfg.patch_side, s = cfg.stride;
    const int nr = patch_count_1d(rows, cfg);
    const int nc = patch_count_1d(cols, cfg);
    if (patches.rows() != p * p || patches.cols() != static_cast<Eigen::Index>(nr) * nc)
        throw std::invalid_argument("aggregate_patches: patch matrix shape mismatch");
    Image out(rows, cols, pixel_size_mm);
    Eigen::Index j = 0;
    for (int pr = 0; pr < nr; ++pr) {
        for (int pc = 0; pc < nc; ++pc, ++j) {
            int i = 0;
            for (int r = 0; r < p; ++r)
                for (int c = 0; c < p; ++c, ++i)
                    out.at(pr * s + r, pc * s + c) += patches(i, j);
        }
    }
    return out;
}

Image patch_weight(const PatchConfig& cfg, int rows, int cols, double pixel_size_mm) {
    check_size(rows, cols, cfg);
    const int p = cfg.patch_side, s = cfg.stride;
    const int nr = patch_count_1d(rows, cfg);
    const int nc = patch_count_1d(cols, cfg);
    Image out(rows, cols, pixel_size_mm);
    for (int pr = 0; pr < nr; ++pr)
        for (int pc = 0; pc < nc; ++pc)
            for (int r = 0; r < p; ++r)
                for (int c = 0; c < p; ++c)
                    out.at(pr * s + r, pc * s + c) += 1.0;
    return out;
}

}  // namespace superct
