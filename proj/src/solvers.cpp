#include "superct/solvers.hpp"

#include <cmath>
#include <fstream>

#include "superct/tomo.hpp"

namespace superct {

void SolverSettings::validate() const {
    if (beta < 0.0) throw std::invalid_argument("solver settings: beta must be >= 0");
    if (gamma <= 0.0) throw std::invalid_argument("solver settings: gamma must be > 0");
    if (ep_delta <= 0.0) throw std::invalid_argument("solver settings: ep_delta must be > 0");
    if (mu < 0.0) throw std::invalid_argument("solver settings: mu must be >= 0");
    if (outer_iters < 1 || inner_iters < 1)
        throw std::invalid_argument("solver settings: iteration counts must be >= 1");
}

namespace {

constexpr double kScale = kAttenToHuScale;  // solver-internal image scale

void check_inputs(const Sinogram& y, const WeightGrid& w, const Geometry& geom,
                  const Image& x_init) {
    geom.validate();
    if (!geom.shape_matches(y) || !geom.shape_matches(w))
        throw std::invalid_argument("solver: sinogram/weight shape mismatch");
    if (!geom.shape_matches(x_init))
        throw std::invalid_argument("solver: initial image shape mismatch");
    for (double v : x_init.data)
        if (v < 0.0) throw std::invalid_argument("solver: initial image must be nonnegative");
}

double trace_rmse(const std::vector<double>& xs, const Image* ref) {
    if (!ref) return -1.0;
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d = xs[i] - ref->data[i] * kScale;  // HU differences
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(xs.size()));
}

void check_finite(double obj, const char* solver, int alternation, int inner) {
    if (!std::isfinite(obj))
        throw std::runtime_error(std::string(solver) + ": non-finite objective at alternation " +
                                 std::to_string(alternation) + ", inner step " +
                                 std::to_string(inner));
}

// EP neighborhood: 4 forward offsets cover each unordered pair once.
struct EpOffsets {
    int dr[4] = {0, 1, 1, 1};
    int dc[4] = {1, 0, 1, -1};
    double kappa[4] = {1.0, 1.0, 1.0 / M_SQRT2, 1.0 / M_SQRT2};
};

double ep_value(const std::vector<double>& x, int rows, int cols, double delta) {
    const EpOffsets off;
    double total = 0.0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            for (int m = 0; m < 4; ++m) {
                const int r2 = r + off.dr[m], c2 = c + off.dc[m];
                if (r2 < 0 || r2 >= rows || c2 < 0 || c2 >= cols) continue;
                const double t = x[r * cols + c] - x[r2 * cols + c2];
                const double u = t / delta;
                total += off.kappa[m] * delta * delta * (std::sqrt(1.0 + u * u) - 1.0);
            }
    return total;
}

void ep_gradient(const std::vector<double>& x, int rows, int cols, double delta,
                 std::vector<double>& grad) {
    const EpOffsets off;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            for (int m = 0; m < 4; ++m) {
                const int r2 = r + off.dr[m], c2 = c + off.dc[m];
                if (r2 < 0 || r2 >= rows || c2 < 0 || c2 >= cols) continue;
                const double t = x[r * cols + c] - x[r2 * cols + c2];
                const double u = t / delta;
                const double dphi = off.kappa[m] * t / std::sqrt(1.0 + u * u);
                grad[r * cols + c] += dphi;
                grad[r2 * cols + c2] -= dphi;
            }
}

// Majorizer curvature: phi'' <= 1, doubled for the separable split.
std::vector<double> ep_curvature(int rows, int cols, double beta) {
    const EpOffsets off;
    std::vector<double> d(static_cast<std::size_t>(rows) * cols, 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            for (int m = 0; m < 4; ++m) {
                const int r2 = r + off.dr[m], c2 = c + off.dc[m];
                if (r2 < 0 || r2 >= rows || c2 < 0 || c2 >= cols) continue;
                d[r * cols + c] += 2.0 * beta * off.kappa[m];
                d[r2 * cols + c2] += 2.0 * beta * off.kappa[m];
            }
    return d;
}

}  // namespace

Image pwls_ep(const Sinogram& y, const WeightGrid& w, const Geometry& geom,
              const SolverSettings& settings, const Image& x_init,
              Trace* trace, const Image* reference) {
    settings.validate();
    check_inputs(y, w, geom, x_init);
    const int rows = geom.image_rows, cols = geom.image_cols;
    const std::size_t np = static_cast<std::size_t>(rows) * cols;

    Image cur(rows, cols, geom.pixel_size_mm);
    for (std::size_t i = 0; i < np; ++i) cur.data[i] = x_init.data[i] * kScale;
    std::vector<double> ys(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) ys[i] = y.data[i] * kScale;

    const Image d_data = sqs_diagonal(geom, w);
    const std::vector<double> d_reg = ep_curvature(rows, cols, settings.beta);

    Sinogram resid(geom.n_views, geom.n_detectors);
    double obj = 0.0;
    auto refresh = [&]() {
        resid = forward_project(cur, geom);
        double data = 0.0;
        for (std::size_t i = 0; i < resid.size(); ++i) {
            resid.data[i] -= ys[i];
            data += w.data[i] * resid.data[i] * resid.data[i];
        }
        obj = 0.5 * data + settings.beta * ep_value(cur.data, rows, cols, settings.ep_delta);
    };

    refresh();
    check_finite(obj, "pwls_ep", 0, 0);
    if (trace) trace->push_back({0, 0, 0, obj, trace_rmse(cur.data, reference)});

    std::vector<double> grad(np), ep_grad(np);
    Sinogram wr(geom.n_views, geom.n_detectors);
    for (int it = 1; it <= settings.outer_iters; ++it) {
        for (std::size_t i = 0; i < wr.size(); ++i) wr.data[i] = w.data[i] * resid.data[i];
        const Image bp = back_project(wr, geom);
        ep_gradient(cur.data, rows, cols, settings.ep_delta, ep_grad);
        for (std::size_t i = 0; i < np; ++i) {
            const double denom = d_data.data[i] + d_reg[i];
            const double g = bp.data[i] + settings.beta * ep_grad[i];
            double v = denom > 0.0 ? cur.data[i] - g / denom : cur.data[i];
            if (settings.nonneg && v < 0.0) v = 0.0;
            cur.data[i] = v;
        }
        refresh();
        check_finite(obj, "pwls_ep", it, 0);
        if (trace) trace->push_back({0, it, 0, obj, trace_rmse(cur.data, reference)});
    }

    for (std::size_t i = 0; i < np; ++i) cur.data[i] /= kScale;
    return cur;
}

namespace {

struct UltraState {
    Sinogram resid;            // A xs - ys
    Eigen::MatrixXd transformed;  // Omega_{k_j} P_j xs per column
    double data_term = 0.0;
    double sparse_resid = 0.0; // sum ||Omega P x - z||^2
    double prox_term = 0.0;
};

}  // namespace

static std::pair<Image, SparseCodeResult> pwls_ultra_core(
    const Sinogram& y, const WeightGrid& w, const Geometry& geom,
    const TransformUnion& tu, const PatchConfig& patch_cfg,
    const SolverSettings& settings, const Image& x_init, const Image* anchor,
    Trace* trace, const Image* reference, const char* name) {
    settings.validate();
    check_inputs(y, w, geom, x_init);
    tu.validate();
    patch_cfg.validate();
    if (patch_cfg.dim() != tu.dim())
        throw std::invalid_argument("pwls_ultra: patch size does not match transforms");
    if (anchor && !anchor->same_shape(x_init))
        throw std::invalid_argument("pwls_ultra: anchor shape mismatch");

    const int rows = geom.image_rows, cols = geom.image_cols;
    const std::size_t np = static_cast<std::size_t>(rows) * cols;
    const double beta = settings.beta;
    const double mu = settings.mu;
    const double g2 = tu.gamma * tu.gamma;

    Image cur(rows, cols, geom.pixel_size_mm);
    for (std::size_t i = 0; i < np; ++i) cur.data[i] = x_init.data[i] * kScale;
    std::vector<double> ys(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) ys[i] = y.data[i] * kScale;
    std::vector<double> anchor_s;
    if (anchor && mu > 0.0) {
        anchor_s.resize(np);
        for (std::size_t i = 0; i < np; ++i) anchor_s[i] = anchor->data[i] * kScale;
    }

    // fixed majorizer diagonal
    const Image d_data = sqs_diagonal(geom, w);
    const Image coverage = patch_weight(patch_cfg, rows, cols, geom.pixel_size_mm);
    const double specsq = tu.max_spectral_norm_sq();
    std::vector<double> denom(np);
    for (std::size_t i = 0; i < np; ++i) {
        denom[i] = d_data.data[i] + 2.0 * beta * specsq * coverage.data[i];
        if (mu > 0.0) denom[i] += 2.0 * mu;
    }

    TransformUnion local = tu;  // gamma from solver settings governs coding
    local.gamma = settings.gamma;

    SparseCodeResult sc;
    double nnz_penalty = 0.0;
    UltraState st;

    auto code_patches = [&]() {
        Eigen::MatrixXd patches = extract_patches(cur, patch_cfg);
        sc = cluster_and_code(patches, local);
        nnz_penalty = 0.0;
        for (Eigen::Index j = 0; j < sc.codes.cols(); ++j)
            for (Eigen::Index i = 0; i < sc.codes.rows(); ++i)
                if (sc.codes(i, j) != 0.0) nnz_penalty += g2;
    };

    auto refresh = [&]() {
        st.resid = forward_project(cur, geom);
        st.data_term = 0.0;
        for (std::size_t i = 0; i < st.resid.size(); ++i) {
            st.resid.data[i] -= ys[i];
            st.data_term += w.data[i] * st.resid.data[i] * st.resid.data[i];
        }
        st.data_term *= 0.5;
        Eigen::MatrixXd patches = extract_patches(cur, patch_cfg);
        st.transformed.resize(patches.rows(), patches.cols());
        const int K = local.clusters();
        for (int k = 0; k < K; ++k) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index j = 0; j < patches.cols(); ++j)
                if (sc.cluster[j] == k) idx.push_back(j);
            if (idx.empty()) continue;
            Eigen::MatrixXd sub(patches.rows(), static_cast<Eigen::Index>(idx.size()));
            for (std::size_t m = 0; m < idx.size(); ++m)
                sub.col(static_cast<Eigen::Index>(m)) = patches.col(idx[m]);
            Eigen::MatrixXd t = local.omegas[k] * sub;
            for (std::size_t m = 0; m < idx.size(); ++m)
                st.transformed.col(idx[m]) = t.col(static_cast<Eigen::Index>(m));
        }
        st.sparse_resid = (st.transformed - sc.codes).squaredNorm();
        st.prox_term = 0.0;
        if (mu > 0.0)
            for (std::size_t i = 0; i < np; ++i) {
                const double d = cur.data[i] - anchor_s[i];
                st.prox_term += d * d;
            }
    };

    auto objective = [&]() {
        return st.data_term + beta * (st.sparse_resid + nnz_penalty) + mu * st.prox_term;
    };

    Sinogram wr(geom.n_views, geom.n_detectors);
    for (int outer = 1; outer <= settings.outer_iters; ++outer) {
        code_patches();
        refresh();
        double obj = objective();
        check_finite(obj, name, outer, 0);
        if (trace) trace->push_back({0, outer, 0, obj, trace_rmse(cur.data, reference)});

        for (int inner = 1; inner <= settings.inner_iters; ++inner) {
            // gradient: A^T W r + 2 beta sum_j P_j^T Omega^T (Omega P_j x - z_j)
            for (std::size_t i = 0; i < wr.size(); ++i)
                wr.data[i] = w.data[i] * st.resid.data[i];
            Image grad = back_project(wr, geom);

            Eigen::MatrixXd presid = st.transformed - sc.codes;
            Eigen::MatrixXd gpatch(presid.rows(), presid.cols());
            const int K = local.clusters();
            for (int k = 0; k < K; ++k) {
                std::vector<Eigen::Index> idx;
                for (Eigen::Index j = 0; j < presid.cols(); ++j)
                    if (sc.cluster[j] == k) idx.push_back(j);
                if (idx.empty()) continue;
                Eigen::MatrixXd sub(presid.rows(), static_cast<Eigen::Index>(idx.size()));
                for (std::size_t m = 0; m < idx.size(); ++m)
                    sub.col(static_cast<Eigen::Index>(m)) = presid.col(idx[m]);
                Eigen::MatrixXd t = local.omegas[k].transpose() * sub;
                for (std::size_t m = 0; m < idx.size(); ++m)
                    gpatch.col(idx[m]) = t.col(static_cast<Eigen::Index>(m));
            }
            const Image agg = aggregate_patches(gpatch, patch_cfg, rows, cols,
                                                geom.pixel_size_mm);
            for (std::size_t i = 0; i < np; ++i) {
                double g = grad.data[i] + 2.0 * beta * agg.data[i];
                if (mu > 0.0) g += 2.0 * mu * (cur.data[i] - anchor_s[i]);
                double v = denom[i] > 0.0 ? cur.data[i] - g / denom[i] : cur.data[i];
                if (settings.nonneg && v < 0.0) v = 0.0;
                cur.data[i] = v;
            }

            refresh();
            obj = objective();
            check_finite(obj, name, outer, inner);
            if (trace) trace->push_back({0, outer, inner, obj, trace_rmse(cur.data, reference)});
        }
    }

    for (std::size_t i = 0; i < np; ++i) cur.data[i] /= kScale;
    return {std::move(cur), std::move(sc)};
}

std::pair<Image, SparseCodeResult> pwls_ultra(
    const Sinogram& y, const WeightGrid& w, const Geometry& geom,
    const TransformUnion& tu, const PatchConfig& patch_cfg,
    const SolverSettings& settings, const Image& x_init,
    Trace* trace, const Image* reference) {
    SolverSettings s = settings;
    s.mu = 0.0;
    return pwls_ultra_core(y, w, geom, tu, patch_cfg, s, x_init, nullptr, trace,
                           reference, "pwls_ultra");
}

Image pwls_ultra_prox(const Sinogram& y, const WeightGrid& w, const Geometry& geom,
                      const TransformUnion& tu, const PatchConfig& patch_cfg,
                      const SolverSettings& settings, const Image& x_init,
                      const Image& anchor, Trace* trace, const Image* reference) {
    return pwls_ultra_core(y, w, geom, tu, patch_cfg, settings, x_init,
                           settings.mu > 0.0 ? &anchor : nullptr, trace, reference,
                           "pwls_ultra_prox")
        .first;
}

void write_trace_csv(const Trace& trace, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "layer,alternation,inner_step,objective,rmse_hu\n";
    char buf[160];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g,%.17g\n", r.layer, r.alternation,
                      r.inner_step, r.objective, r.rmse_hu);
        f << buf;
    }
}

}  // namespace superct
