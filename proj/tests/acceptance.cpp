// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Numeric tolerances are pinned here and must not be loosened.
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "superct/config.hpp"
#include "superct/denoiser.hpp"
#include "superct/eval.hpp"
#include "superct/pipeline.hpp"
#include "superct/rng.hpp"
#include "superct/simulate.hpp"
#include "superct/solvers.hpp"
#include "superct/super.hpp"
#include "superct/tomo.hpp"
#include "superct/ultra.hpp"

using namespace superct;

namespace {

int g_failures = 0;

void report(int criterion, const char* name, bool ok, const std::string& detail) {
    std::printf("%s  %2d  %-28s %s\n", ok ? "PASS" : "FAIL", criterion, name,
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

Geometry parallel_geometry(int n_views, int n_det, int n_img, double pitch = 1.0) {
    Geometry g;
    g.beam = Beam::parallel;
    g.n_views = n_views;
    g.n_detectors = n_det;
    g.detector_pitch_mm = pitch;
    g.angular_range_rad = M_PI;
    g.image_rows = g.image_cols = n_img;
    g.pixel_size_mm = 1.0;
    return g;
}

Geometry fan_geometry(int n_views, int n_det, int n_img) {
    Geometry g = parallel_geometry(n_views, n_det, n_img);
    g.beam = Beam::fan_arc;
    g.angular_range_rad = 2.0 * M_PI;
    g.source_to_center_mm = 200.0;
    g.source_to_detector_mm = 400.0;
    g.detector_pitch_mm = 2.0 * 400.0 * std::asin(0.5 * n_img / 200.0) / n_det;
    return g;
}

// ---- 1: adjoint identity ---------------------------------------------------

void criterion_adjoint() {
    double worst = 0.0;
    for (const bool fan : {false, true}) {
        const Geometry g = fan ? fan_geometry(48, 48, 32) : parallel_geometry(48, 48, 32);
        for (int pair = 0; pair < 100; ++pair) {
            const std::uint64_t seed = static_cast<std::uint64_t>(pair) + (fan ? 1000 : 0);
            Image x(g.image_rows, g.image_cols, g.pixel_size_mm);
            Prng rx(seed, 0);
            for (double& v : x.data) v = rx.gaussian();
            Sinogram y(g.n_views, g.n_detectors);
            Prng ry(seed, 1);
            for (double& v : y.data) v = ry.gaussian();
            const double lhs = dot(forward_project(x, g).data, y.data);
            const double rhs = dot(x.data, back_project(y, g).data);
            const double rel =
                std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1.0});
            worst = std::max(worst, rel);
        }
    }
    report(1, "adjoint identity", worst < 1e-10, fmt("max rel mismatch %.3g", worst));
}

// ---- 2: sparse-coding oracle -----------------------------------------------

void criterion_sparse_coding() {
    Prng rng(2024, 0);
    int instances = 0, wrong = 0;
    while (instances < 1000) {
        const int l = 2 + static_cast<int>(rng.uniform() * 5.0);  // 2..6
        const int k = 1 + static_cast<int>(rng.uniform() * 3.0);  // 1..3
        TransformUnion tu;
        tu.gamma = 0.25 + rng.uniform();
        for (int j = 0; j < k; ++j) {
            Eigen::MatrixXd m(l, l);
            for (Eigen::Index c = 0; c < l; ++c)
                for (Eigen::Index r = 0; r < l; ++r) m(r, c) = rng.gaussian();
            m += 0.5 * l * Eigen::MatrixXd::Identity(l, l);
            tu.omegas.push_back(m);
        }
        Eigen::MatrixXd patches(l, 4);
        for (Eigen::Index c = 0; c < 4; ++c)
            for (Eigen::Index r = 0; r < l; ++r) patches(r, c) = rng.gaussian();
        const SparseCodeResult sc = cluster_and_code(patches, tu);
        for (int j = 0; j < 4 && instances < 1000; ++j, ++instances) {
            // exhaustive minimum over clusters and all 2^l supports
            double best = 1e300;
            int best_k = -1;
            for (int kk = 0; kk < k; ++kk) {
                const Eigen::VectorXd v = tu.omegas[kk] * patches.col(j);
                for (int mask = 0; mask < (1 << l); ++mask) {
                    double cost = 0.0;
                    for (int i = 0; i < l; ++i)
                        cost += (mask & (1 << i)) ? tu.gamma * tu.gamma : v[i] * v[i];
                    if (cost < best) {
                        best = cost;
                        best_k = kk;
                    }
                }
            }
            const Eigen::VectorXd v = tu.omegas[sc.cluster[j]] * patches.col(j);
            double realized = 0.0;
            for (int i = 0; i < l; ++i) {
                const double z = sc.codes(i, j);
                realized += (v[i] - z) * (v[i] - z) + (z != 0.0 ? tu.gamma * tu.gamma : 0.0);
            }
            const double scale = std::max(1.0, std::abs(best));
            if (sc.cluster[j] != best_k ||
                std::abs(sc.contribution[j] - best) > 1e-12 * scale ||
                std::abs(realized - best) > 1e-12 * scale)
                ++wrong;
        }
        // hard_threshold spot check against its definition
        Eigen::VectorXd probe(3);
        probe << 2.0 * tu.gamma, -0.5 * tu.gamma, tu.gamma;
        const Eigen::VectorXd z = hard_threshold(probe, tu.gamma);
        if (z[0] != probe[0] || z[1] != 0.0 || z[2] != 0.0) ++wrong;
    }
    report(2, "sparse-coding oracle", wrong == 0,
           fmt("%d/1000 instances mismatched", wrong));
}

// ---- 3: monotone objectives ------------------------------------------------

bool nonincreasing(const std::vector<double>& v, double rel) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[i - 1] + rel * std::abs(v[i - 1]) + 1e-12) return false;
    return true;
}

std::vector<double> objectives(const Trace& t) {
    std::vector<double> o;
    for (const TraceRow& r : t) o.push_back(r.objective);
    return o;
}

void criterion_monotone() {
    const Geometry g = parallel_geometry(96, 96, 64);
    const Image xstar = make_phantom(random_phantom_spec(64, 64, 1.0, 17, 0));
    NoiseModel nm;
    nm.rng_seed = 17;
    const auto [y, w] = simulate_sinogram(xstar, g, nm);
    const Image x0(64, 64, 1.0, 0.0);

    SolverSettings ep;
    ep.beta = 32768.0;
    ep.outer_iters = 100;
    Trace ep_trace;
    const Image xep = pwls_ep(y, w, g, ep, x0, &ep_trace);
    const bool ep_ok = nonincreasing(objectives(ep_trace), 1e-9);

    TransformUnion tu;
    tu.gamma = 20.0;
    tu.omegas = {dct2_transform(8)};
    PatchConfig pc;
    SolverSettings us;
    us.beta = 5e3;
    us.gamma = 20.0;
    us.outer_iters = 5;
    us.inner_iters = 5;
    Trace ultra_trace;
    pwls_ultra(y, w, g, tu, pc, us, xep, &ultra_trace);
    const bool ultra_ok = nonincreasing(objectives(ultra_trace), 1e-9);

    Image scaled = xstar;
    for (double& v : scaled.data) v *= kAttenToHuScale;
    TransformLearnOptions tl;
    tl.clusters = 5;
    tl.gamma = 20.0;
    tl.iterations = 20;
    tl.rng_seed = 3;
    const TransformLearnResult lr = learn_transforms(extract_patches(scaled, pc), tl);
    const bool learn_ok =
        lr.objective_trace.size() == 20 && nonincreasing(lr.objective_trace, 1e-9);

    SolverSettings prox = us;
    prox.mu = 5e5;
    Trace prox_trace;
    pwls_ultra_prox(y, w, g, tu, pc, prox, xep, xep, &prox_trace);
    const bool prox_ok = nonincreasing(objectives(prox_trace), 1e-9);

    report(3, "monotone objectives", ep_ok && ultra_ok && learn_ok && prox_ok,
           fmt("ep %s ultra %s learning %s prox %s", ep_ok ? "ok" : "VIOLATED",
               ultra_ok ? "ok" : "VIOLATED", learn_ok ? "ok" : "VIOLATED",
               prox_ok ? "ok" : "VIOLATED"));
}

// ---- 4: gradient check -----------------------------------------------------

void criterion_gradcheck() {
    NetworkSpec spec;
    spec.depth = 4;
    spec.channels = 8;
    NetworkParams p = init_params(spec, 0.05, 41);
    // randomized biases keep rectifier pre-activations off the kink, where
    // one-sided finite differences would disagree with any exact gradient
    Prng brng(42, 0);
    for (auto& b : p.biases)
        for (double& v : b) v = 0.05 * brng.gaussian();
    std::vector<std::pair<Image, Image>> batch;
    for (int i = 0; i < 2; ++i) {
        Image a(9, 9, 1.0), b(9, 9, 1.0);
        Prng r(50 + static_cast<std::uint64_t>(i), 0);
        for (double& v : a.data) v = 0.02 * r.uniform();
        for (double& v : b.data) v = 0.02 * r.uniform();
        batch.emplace_back(a, b);
    }
    const auto [loss, grad] = loss_and_gradient(p, batch);
    (void)loss;
    const double h = 1e-6;
    Prng rng(43, 0);
    double worst = 0.0;
    int checked = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t layer = rng.next_u64() % p.weights.size();
        const bool bias = rng.uniform() < 0.2;
        auto& vec = bias ? p.biases[layer] : p.weights[layer];
        const auto& gvec = bias ? grad.biases[layer] : grad.weights[layer];
        const std::size_t idx = rng.next_u64() % vec.size();
        const double keep = vec[idx];
        vec[idx] = keep + h;
        const double lp = loss_and_gradient(p, batch).first;
        vec[idx] = keep - h;
        const double lm = loss_and_gradient(p, batch).first;
        vec[idx] = keep;
        const double fd = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(gvec[idx]), 1e-8});
        worst = std::max(worst, std::abs(fd - gvec[idx]) / denom);
        ++checked;
    }
    report(4, "denoiser gradient check", checked >= 50 && worst < 1e-4,
           fmt("%d coords, max rel error %.3g", checked, worst));
}

// ---- 5: degeneracy identities ----------------------------------------------

void criterion_degeneracy() {
    const Geometry g = parallel_geometry(24, 36, 24);
    std::vector<SuperSample> train;
    for (std::uint64_t i = 0; i < 2; ++i) {
        SuperSample s;
        s.xstar = make_phantom(random_phantom_spec(24, 24, 1.0, 5, i));
        NoiseModel nm;
        nm.rng_seed = 60 + i;
        auto [y, w] = simulate_sinogram(s.xstar, g, nm);
        s.y = std::move(y);
        s.w = std::move(w);
        SolverSettings ep;
        ep.beta = 32768.0;
        ep.outer_iters = 20;
        s.x0 = pwls_ep(s.y, s.w, g, ep, Image(24, 24, 1.0, 0.0));
        train.push_back(std::move(s));
    }
    TransformUnion tu;
    tu.gamma = 20.0;
    tu.omegas = {dct2_transform(8)};
    SuperTrainOptions opt;
    opt.layers = 2;
    opt.ultra.beta = 5e3;
    opt.ultra.gamma = 20.0;
    opt.ultra.outer_iters = 2;
    opt.ultra.inner_iters = 2;
    opt.net_spec.depth = 3;
    opt.net_spec.channels = 4;
    opt.net_train.epochs = 2;

    const SuperSample& s = train[0];

    opt.lambda = 0.0;
    const SuperModel m0 = train_parallel_super(train, g, tu, opt);
    const Image got0 = reconstruct_parallel_super(m0, g, s.y, s.w, s.x0);
    Image chain0 = s.x0;
    for (int l = 0; l < opt.layers; ++l)
        chain0 = pwls_ultra(s.y, s.w, g, tu, opt.patch, m0.ultra, chain0).first;
    const bool ok0 = got0.data == chain0.data;

    opt.lambda = 1.0;
    const SuperModel m1 = train_parallel_super(train, g, tu, opt);
    const Image got1 = reconstruct_parallel_super(m1, g, s.y, s.w, s.x0);
    Image chain1 = s.x0;
    for (int l = 0; l < opt.layers; ++l) chain1 = denoiser_forward(m1.nets[l], chain1);
    const bool ok1 = got1.data == chain1.data;

    SolverSettings prox = opt.ultra;
    prox.mu = 0.0;
    const Image a = pwls_ultra(s.y, s.w, g, tu, opt.patch, prox, s.x0).first;
    const Image b =
        pwls_ultra_prox(s.y, s.w, g, tu, opt.patch, prox, s.x0, Image(24, 24, 1.0, 0.0));
    const bool okp = a.data == b.data;

    report(5, "degeneracy identities", ok0 && ok1 && okp,
           fmt("lambda0 %s lambda1 %s mu0 %s", ok0 ? "bitwise" : "DIFFERS",
               ok1 ? "bitwise" : "DIFFERS", okp ? "bitwise" : "DIFFERS"));
}

// ---- 6/7/10: end-to-end experiment -----------------------------------------

double mean_rmse(const ExperimentResult& res, const std::string& method) {
    for (const MetricReport& r : res.reports)
        if (r.method == method) return r.mean_rmse;
    return -1.0;
}

void criteria_end_to_end() {
    ExperimentConfig cfg = default_experiment_config();
    cfg.output_dir =
        (std::filesystem::temp_directory_path() / "superct_acceptance").string();
    cfg.threads = 0;
    std::filesystem::remove_all(cfg.output_dir);
    const ExperimentResult res = run_experiment(cfg);

    const double par = mean_rmse(res, "parallel-super");
    const double ser = mean_rmse(res, "serial-super");
    const double ultra = mean_rmse(res, "pwls-ultra");
    const double net = mean_rmse(res, "denoiser");
    const bool ordering_ok =
        par > 0.0 && ser > 0.0 && par < ultra && par < net && par <= 1.05 * ser;
    report(6, "end-to-end ordering", ordering_ok,
           fmt("parallel %.2f serial %.2f ultra %.2f denoiser %.2f HU", par, ser, ultra,
               net));

    const double lam = res.sweep.best_lambda;
    const bool interior = lam > cfg.lambdas.front() && lam < cfg.lambdas.back();
    bool trend_ok = false;
    for (const SweepRow& row : res.sweep.rows) {
        if (row.lambda != lam) continue;
        trend_ok = true;
        for (std::size_t l = 1; l < row.per_layer_val_rmse.size(); ++l)
            if (row.per_layer_val_rmse[l] > 1.02 * row.per_layer_val_rmse[l - 1])
                trend_ok = false;
    }
    report(7, "lambda sweep trend", interior && trend_ok,
           fmt("best lambda %.1f (%s), layer curve %s", lam,
               interior ? "interior" : "BOUNDARY", trend_ok ? "nonincreasing" : "RISES"));

    ExperimentConfig cfg2 = cfg;  // identical config, fresh in-memory rerun
    const ExperimentResult res2 = run_experiment(cfg2);
    const bool det_ok = res.manifest == res2.manifest && !res.manifest.empty();
    report(10, "deterministic manifests", det_ok,
           fmt("manifest %zu bytes, rerun %s", res.manifest.size(),
               det_ok ? "identical" : "DIFFERS"));
    std::filesystem::remove_all(cfg.output_dir);
}

// ---- 8: noise/weight consistency -------------------------------------------

void criterion_noise_weights() {
    const Geometry g = parallel_geometry(4, 24, 32);
    const Image xstar = make_phantom(random_phantom_spec(32, 32, 1.0, 23, 0));
    NoiseModel nm;
    nm.rng_seed = 0;
    nm.mean_only = true;
    const auto [ybar, wbar] = simulate_sinogram(xstar, g, nm);
    const Sinogram ax = forward_project(xstar, g);

    const int draws = 100000;
    std::vector<double> sum(ybar.size(), 0.0), sumsq(ybar.size(), 0.0);
    nm.mean_only = false;
    for (int t = 0; t < draws; ++t) {
        nm.rng_seed = static_cast<std::uint64_t>(t);
        const Sinogram y = simulate_sinogram(xstar, g, nm).first;
        for (std::size_t i = 0; i < y.size(); ++i) {
            sum[i] += y.data[i];
            sumsq[i] += y.data[i] * y.data[i];
        }
    }
    double worst = 0.0;
    int rays = 0;
    for (std::size_t i = 0; i < ybar.size(); ++i) {
        const double mean_counts = nm.incident_photons * std::exp(-ax.data[i]);
        if (mean_counts <= 100.0) continue;
        const double m = sum[i] / draws;
        const double var = sumsq[i] / draws - m * m;
        const double pred = 1.0 / wbar.data[i];
        worst = std::max(worst, std::abs(var - pred) / pred);
        ++rays;
    }
    report(8, "noise/weight consistency", rays > 0 && worst < 0.15,
           fmt("%d rays, max |var*w - 1| = %.3f", rays, worst));
}

// ---- 9: FBP sanity ---------------------------------------------------------

void criterion_fbp() {
    // detectors at half the pixel pitch so the skull edge is resolved
    const Geometry g = parallel_geometry(180, 192, 64, 0.5);
    const Image phantom = make_phantom(shepp_logan_spec(64, 1.0));
    const Image recon = fbp(forward_project(phantom, g), g, FbpOptions{/*hann=*/false});
    double lo = 1e300, hi = -1e300, err2 = 0.0;
    for (double v : phantom.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (std::size_t i = 0; i < recon.size(); ++i) {
        const double d = recon.data[i] - phantom.data[i];
        err2 += d * d;
    }
    const double rmse = std::sqrt(err2 / static_cast<double>(recon.size()));
    report(9, "fbp sanity", rmse < 0.05 * (hi - lo),
           fmt("rmse %.3g vs bound %.3g", rmse, 0.05 * (hi - lo)));
}

}  // namespace

int main() {
    criterion_adjoint();
    criterion_sparse_coding();
    criterion_monotone();
    criterion_gradcheck();
    criterion_degeneracy();
    criterion_noise_weights();
    criterion_fbp();
    criteria_end_to_end();
    std::printf("%s: %d criterion(s) failed\n", g_failures ? "FAILURE" : "SUCCESS",
                g_failures);
    return g_failures ? 1 : 0;
}
