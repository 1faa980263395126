#include "superct/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "superct/io.hpp"
#include "superct/rng.hpp"
#include "superct/simulate.hpp"
#include "superct/tomo.hpp"

namespace superct {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSplits[3] = {"train", "val", "test"};

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t s = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    return splitmix64(s);
}

void apply_threads(const ExperimentConfig& cfg) {
#ifdef _OPENMP
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#else
    (void)cfg;
#endif
}

std::string data_path(const ExperimentConfig& cfg, const char* split, const char* kind,
                      int i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%s_%03d.f32", split, kind, i);
    return cfg.output_dir + "/data/" + name;
}

int split_count(const ExperimentConfig& cfg, int which) {
    return which == 0 ? cfg.n_train : which == 1 ? cfg.n_val : cfg.n_test;
}

int split_offset(const ExperimentConfig& cfg, int which) {
    return which == 0 ? 0 : which == 1 ? cfg.n_train : cfg.n_train + cfg.n_val;
}

std::vector<SuperSample>& split_of(Dataset& ds, int which) {
    return which == 0 ? ds.train : which == 1 ? ds.val : ds.test;
}

Image ep_init_image(const Sinogram& y, const Geometry& geom) {
    Image x = fbp(y, geom);
    for (double& v : x.data)
        if (v < 0.0) v = 0.0;
    return x;
}

void write_layer_trace_csv(const LayerTrace& trace, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "layer,val_rmse_hu,train_loss,unsup_objective\n";
    char buf[160];
    for (const LayerStat& s : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", s.layer, s.val_rmse_hu,
                      s.train_loss, s.unsup_objective);
        f << buf;
    }
}

// File-based dataset reload for the per-command workflow; values pass through
// the 32-bit on-disk representation, which keeps each command idempotent.
Dataset load_dataset(const ExperimentConfig& cfg, bool include_train) {
    Dataset ds;
    for (int which = 0; which < 3; ++which) {
        if (!include_train && which < 2) continue;
        auto& split = split_of(ds, which);
        const int n = split_count(cfg, which);
        for (int i = 0; i < n; ++i) {
            const std::string xp = data_path(cfg, kSplits[which], "xstar", i);
            if (!fs::exists(xp))
                throw std::runtime_error("missing " + xp + "; run `superct simulate` first");
            SuperSample s;
            s.xstar = read_f32_image(xp);
            s.y = read_f32_sinogram(data_path(cfg, kSplits[which], "sino", i));
            s.w = read_f32_sinogram(data_path(cfg, kSplits[which], "wgt", i));
            split.push_back(std::move(s));
        }
    }
    return ds;
}

TransformUnion load_required_transforms(const ExperimentConfig& cfg) {
    const std::string path = cfg.output_dir + "/models/transforms.ultr";
    if (!fs::exists(path))
        throw std::runtime_error("missing " + path + "; run `superct learn-transforms` first");
    return load_transform_union(path);
}

void export_dataset(const Dataset& ds, const ExperimentConfig& cfg) {
    fs::create_directories(cfg.output_dir + "/data");
    const Dataset* d = &ds;
    for (int which = 0; which < 3; ++which) {
        const auto& split = which == 0 ? d->train : which == 1 ? d->val : d->test;
        for (std::size_t i = 0; i < split.size(); ++i) {
            const int idx = static_cast<int>(i);
            write_f32_image(split[i].xstar, data_path(cfg, kSplits[which], "xstar", idx));
            write_f32_sinogram(split[i].y, cfg.geometry.detector_pitch_mm,
                               data_path(cfg, kSplits[which], "sino", idx));
            write_f32_sinogram(split[i].w, cfg.geometry.detector_pitch_mm,
                               data_path(cfg, kSplits[which], "wgt", idx));
        }
    }
}

void export_inits(const Dataset& ds, const ExperimentConfig& cfg) {
    for (int which = 0; which < 3; ++which) {
        const auto& split = which == 0 ? ds.train : which == 1 ? ds.val : ds.test;
        for (std::size_t i = 0; i < split.size(); ++i)
            write_f32_image(split[i].x0,
                            data_path(cfg, kSplits[which], "init", static_cast<int>(i)));
    }
}

std::vector<Image> to_hu_all(const std::vector<Image>& imgs) {
    std::vector<Image> out;
    out.reserve(imgs.size());
    for (const Image& im : imgs) out.push_back(to_hu(im));
    return out;
}

void export_recons(const std::vector<Image>& recons, const ExperimentConfig& cfg,
                   const std::string& method) {
    const std::string dir = cfg.output_dir + "/recon/" + method;
    fs::create_directories(dir);
    char name[32];
    for (std::size_t i = 0; i < recons.size(); ++i) {
        std::snprintf(name, sizeof(name), "/%03d.f32", static_cast<int>(i));
        write_f32_image(recons[i], dir + name);
    }
}

NetworkParams train_standalone_denoiser(const Dataset& ds, const ExperimentConfig& cfg,
                                        std::vector<double>* loss_trace = nullptr) {
    std::vector<std::pair<Image, Image>> pairs;
    pairs.reserve(ds.train.size());
    for (const SuperSample& s : ds.train) pairs.emplace_back(s.x0, s.xstar);
    TrainConfig tc;
    tc.epochs = cfg.denoiser.standalone_epochs;
    tc.lr_start = cfg.denoiser.lr_start;
    tc.lr_end = cfg.denoiser.lr_end;
    tc.momentum = cfg.denoiser.momentum;
    tc.batch_size = cfg.denoiser.batch_size;
    tc.init_variance = cfg.denoiser.init_variance;
    tc.grad_clip = cfg.denoiser.grad_clip;
    tc.rng_seed = cfg.denoiser.seed;
    const NetworkParams init =
        init_params(cfg.denoiser.spec, cfg.denoiser.init_variance, tc.rng_seed);
    TrainResult r = train_denoiser(init, pairs, tc);
    if (loss_trace) *loss_trace = std::move(r.loss_trace);
    return std::move(r.params);
}

std::string manifest_text(const ExperimentConfig& cfg, const SweepResult& sweep,
                          const std::vector<MetricReport>& reports) {
    std::ostringstream os;
    char buf[200];
    os << "superct manifest v1\n";
    std::snprintf(buf, sizeof(buf), "config_hash = %016llx\n",
                  static_cast<unsigned long long>(fnv1a64(serialize_experiment_config(cfg))));
    os << buf;
    os << "seed = " << cfg.seed << "\n";
    os << "phantom_seed = " << cfg.phantom_seed << "\n";
    os << "noise_seed = " << cfg.noise.rng_seed << "\n";
    os << "transform_seed = " << cfg.transforms.rng_seed << "\n";
    os << "denoiser_seed = " << cfg.denoiser.seed << "\n";
    std::snprintf(buf, sizeof(buf), "best_lambda = %.17g\n", sweep.best_lambda);
    os << buf;
    for (const SweepRow& row : sweep.rows) {
        std::snprintf(buf, sizeof(buf), "sweep %.17g =", row.lambda);
        os << buf;
        for (double r : row.per_layer_val_rmse) {
            std::snprintf(buf, sizeof(buf), " %.17g", r);
            os << buf;
        }
        os << "\n";
    }
    for (const MetricReport& rep : reports) {
        std::snprintf(buf, sizeof(buf), "method %s rmse_hu = %.17g ssim = %.17g\n",
                      rep.method.c_str(), rep.mean_rmse, rep.mean_ssim);
        os << buf;
    }
    return os.str();
}

}  // namespace

Dataset generate_dataset(const ExperimentConfig& cfg) {
    cfg.validate();
    Dataset ds;
    for (int which = 0; which < 3; ++which) {
        auto& split = split_of(ds, which);
        const int n = split_count(cfg, which);
        const int offset = split_offset(cfg, which);
        for (int i = 0; i < n; ++i) {
            const int idx = offset + i;
            const PhantomSpec spec = random_phantom_spec(
                cfg.geometry.image_rows, cfg.geometry.image_cols, cfg.geometry.pixel_size_mm,
                cfg.phantom_seed, static_cast<std::uint64_t>(idx));
            SuperSample s;
            s.xstar = make_phantom(spec);
            NoiseModel nm = cfg.noise;
            nm.rng_seed = mix_seed(cfg.noise.rng_seed, static_cast<std::uint64_t>(idx));
            auto [y, w] = simulate_sinogram(s.xstar, cfg.geometry, nm);
            s.y = std::move(y);
            s.w = std::move(w);
            split.push_back(std::move(s));
        }
    }
    return ds;
}

void fill_ep_inits(Dataset& ds, const ExperimentConfig& cfg) {
    const SolverSettings ep = ep_settings(cfg);
    for (auto* split : {&ds.train, &ds.val, &ds.test})
        for (SuperSample& s : *split)
            s.x0 = pwls_ep(s.y, s.w, cfg.geometry, ep, ep_init_image(s.y, cfg.geometry));
}

TransformLearnResult learn_dataset_transforms(const Dataset& ds, const ExperimentConfig& cfg) {
    const int slices = std::min<int>(cfg.transform_slices, static_cast<int>(ds.train.size()));
    if (slices < 1) throw std::invalid_argument("transform learning needs training samples");
    const int l = cfg.patch.dim();
    Eigen::MatrixXd all;
    for (int i = 0; i < slices; ++i) {
        Image scaled = ds.train[i].xstar;
        for (double& v : scaled.data) v *= kAttenToHuScale;  // solver-internal scale
        const Eigen::MatrixXd p = extract_patches(scaled, cfg.patch);
        const Eigen::Index old = all.cols();
        all.conservativeResize(l, old + p.cols());
        all.rightCols(p.cols()) = p;
    }
    return learn_transforms(all, cfg.transforms);
}

SolverSettings ep_settings(const ExperimentConfig& cfg) {
    SolverSettings s;
    s.beta = cfg.ep.beta;
    s.ep_delta = cfg.ep.delta;
    s.outer_iters = cfg.ep.iterations;
    s.inner_iters = 1;
    return s;
}

namespace {
SolverSettings ultra_settings(const UltraSolverConfig& u) {
    SolverSettings s;
    s.beta = u.beta;
    s.gamma = u.gamma;
    s.outer_iters = u.outer;
    s.inner_iters = u.inner;
    return s;
}
}  // namespace

SolverSettings ultra_layer_settings(const ExperimentConfig& cfg) {
    return ultra_settings(cfg.ultra_layer);
}

SolverSettings ultra_standalone_settings(const ExperimentConfig& cfg) {
    return ultra_settings(cfg.ultra_standalone);
}

SolverSettings serial_settings(const ExperimentConfig& cfg) {
    SolverSettings s = ultra_settings(cfg.ultra_layer);
    s.outer_iters = cfg.serial.alternations;
    s.inner_iters = cfg.serial.inner;
    s.mu = cfg.serial.mu;
    return s;
}

namespace {
SuperTrainOptions base_train_options(const ExperimentConfig& cfg) {
    SuperTrainOptions opt;
    opt.lambda = cfg.lambda;
    opt.layers = cfg.layers;
    opt.patch = cfg.patch;
    opt.net_spec = cfg.denoiser.spec;
    opt.net_train.epochs = cfg.denoiser.epochs;
    opt.net_train.lr_start = cfg.denoiser.lr_start;
    opt.net_train.lr_end = cfg.denoiser.lr_end;
    opt.net_train.momentum = cfg.denoiser.momentum;
    opt.net_train.batch_size = cfg.denoiser.batch_size;
    opt.net_train.init_variance = cfg.denoiser.init_variance;
    opt.net_train.grad_clip = cfg.denoiser.grad_clip;
    opt.net_train.rng_seed = cfg.denoiser.seed;
    return opt;
}
}  // namespace

SuperTrainOptions parallel_train_options(const ExperimentConfig& cfg) {
    SuperTrainOptions opt = base_train_options(cfg);
    opt.ultra = ultra_layer_settings(cfg);
    return opt;
}

SuperTrainOptions serial_train_options(const ExperimentConfig& cfg) {
    SuperTrainOptions opt = base_train_options(cfg);
    opt.ultra = serial_settings(cfg);
    return opt;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    apply_threads(cfg);
    fs::create_directories(cfg.output_dir + "/models");
    fs::create_directories(cfg.output_dir + "/recon");

    Dataset ds = generate_dataset(cfg);
    export_dataset(ds, cfg);

    const TransformLearnResult tl = learn_dataset_transforms(ds, cfg);
    save_transform_union(tl.tu, cfg.output_dir + "/models/transforms.ultr");

    fill_ep_inits(ds, cfg);
    export_inits(ds, cfg);

    std::vector<double> denoiser_loss;
    const NetworkParams denoiser = train_standalone_denoiser(ds, cfg, &denoiser_loss);
    save_network(denoiser, cfg.output_dir + "/models/denoiser.sdnz");

    const SweepResult sweep = sweep_lambda(cfg.lambdas, ds.train, ds.val, cfg.geometry,
                                           tl.tu, parallel_train_options(cfg));
    write_sweep_csv(sweep, cfg.output_dir + "/sweep.csv");
    save_super_model(sweep.best_model, cfg.output_dir + "/models/parallel-super");

    LayerTrace serial_trace;
    const SuperModel serial_model = train_serial_super(
        ds.train, cfg.geometry, tl.tu, serial_train_options(cfg), ds.val, &serial_trace);
    save_super_model(serial_model, cfg.output_dir + "/models/serial-super");
    write_layer_trace_csv(serial_trace, cfg.output_dir + "/models/serial-super/layers.csv");

    const SolverSettings ustand = ultra_standalone_settings(cfg);
    std::vector<Image> r_fbp, r_ep, r_ultra, r_net, r_serial, r_parallel, refs;
    for (const SuperSample& s : ds.test) {
        refs.push_back(s.xstar);
        r_fbp.push_back(fbp(s.y, cfg.geometry));
        r_ep.push_back(s.x0);
        r_ultra.push_back(
            pwls_ultra(s.y, s.w, cfg.geometry, tl.tu, cfg.patch, ustand, s.x0).first);
        r_net.push_back(denoiser_forward(denoiser, s.x0));
        r_serial.push_back(
            reconstruct_serial_super(serial_model, cfg.geometry, s.y, s.w, s.x0));
        r_parallel.push_back(
            reconstruct_parallel_super(sweep.best_model, cfg.geometry, s.y, s.w, s.x0));
    }
    export_recons(r_fbp, cfg, "fbp");
    export_recons(r_ep, cfg, "pwls-ep");
    export_recons(r_ultra, cfg, "pwls-ultra");
    export_recons(r_net, cfg, "denoiser");
    export_recons(r_serial, cfg, "serial-super");
    export_recons(r_parallel, cfg, "parallel-super");

    const std::vector<Image> refs_hu = to_hu_all(refs);
    ExperimentResult result;
    result.sweep = sweep;
    result.reports.push_back(evaluate_method("fbp", to_hu_all(r_fbp), refs_hu));
    result.reports.push_back(evaluate_method("pwls-ep", to_hu_all(r_ep), refs_hu));
    result.reports.push_back(evaluate_method("pwls-ultra", to_hu_all(r_ultra), refs_hu));
    result.reports.push_back(evaluate_method("denoiser", to_hu_all(r_net), refs_hu));
    result.reports.push_back(evaluate_method("serial-super", to_hu_all(r_serial), refs_hu));
    result.reports.push_back(
        evaluate_method("parallel-super", to_hu_all(r_parallel), refs_hu));

    write_report_csv(result.reports, cfg.output_dir + "/evaluate.csv");
    {
        std::ofstream f(cfg.output_dir + "/summary.txt");
        f << format_report_table(result.reports);
    }
    result.manifest = manifest_text(cfg, sweep, result.reports);
    {
        std::ofstream f(cfg.output_dir + "/manifest.txt");
        f << result.manifest;
    }
    return result;
}

int cmd_simulate(const ExperimentConfig& cfg) {
    apply_threads(cfg);
    Dataset ds = generate_dataset(cfg);
    export_dataset(ds, cfg);
    std::cout << "simulated " << ds.train.size() << " train / " << ds.val.size()
              << " val / " << ds.test.size() << " test samples under " << cfg.output_dir
              << "/data\n";
    return 0;
}

int cmd_learn_transforms(const ExperimentConfig& cfg) {
    apply_threads(cfg);
    Dataset ds = load_dataset(cfg, true);
    const TransformLearnResult tl = learn_dataset_transforms(ds, cfg);
    fs::create_directories(cfg.output_dir + "/models");
    save_transform_union(tl.tu, cfg.output_dir + "/models/transforms.ultr");
    std::cout << "learned " << tl.tu.clusters() << " transforms, final objective "
              << tl.objective_trace.back() << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& method) {
    apply_threads(cfg);
    Dataset ds = load_dataset(cfg, true);
    fill_ep_inits(ds, cfg);
    export_inits(ds, cfg);
    fs::create_directories(cfg.output_dir + "/models");
    if (method == "denoiser") {
        const NetworkParams params = train_standalone_denoiser(ds, cfg);
        save_network(params, cfg.output_dir + "/models/denoiser.sdnz");
    } else if (method == "parallel-super" || method == "serial-super") {
        const TransformUnion tu = load_required_transforms(cfg);
        const bool parallel = method == "parallel-super";
        const SuperTrainOptions opt =
            parallel ? parallel_train_options(cfg) : serial_train_options(cfg);
        LayerTrace trace;
        const SuperModel model =
            parallel ? train_parallel_super(ds.train, cfg.geometry, tu, opt, ds.val, &trace)
                     : train_serial_super(ds.train, cfg.geometry, tu, opt, ds.val, &trace);
        const std::string dir = cfg.output_dir + "/models/" + method;
        save_super_model(model, dir);
        write_layer_trace_csv(trace, dir + "/layers.csv");
    } else {
        throw std::invalid_argument("unknown training method '" + method + "'");
    }
    std::cout << "trained " << method << "\n";
    return 0;
}

int cmd_reconstruct(const ExperimentConfig& cfg, const std::string& method) {
    apply_threads(cfg);
    Dataset ds = load_dataset(cfg, false);
    std::vector<Image> recons;
    if (method == "fbp") {
        for (const SuperSample& s : ds.test) recons.push_back(fbp(s.y, cfg.geometry));
    } else {
        const SolverSettings ep = ep_settings(cfg);
        for (SuperSample& s : ds.test)
            s.x0 = pwls_ep(s.y, s.w, cfg.geometry, ep, ep_init_image(s.y, cfg.geometry));
        if (method == "pwls-ep") {
            for (const SuperSample& s : ds.test) recons.push_back(s.x0);
        } else if (method == "pwls-ultra") {
            const TransformUnion tu = load_required_transforms(cfg);
            const SolverSettings st = ultra_standalone_settings(cfg);
            for (const SuperSample& s : ds.test)
                recons.push_back(
                    pwls_ultra(s.y, s.w, cfg.geometry, tu, cfg.patch, st, s.x0).first);
        } else if (method == "denoiser") {
            const std::string path = cfg.output_dir + "/models/denoiser.sdnz";
            if (!fs::exists(path))
                throw std::runtime_error("missing " + path +
                                         "; run `superct train --method denoiser` first");
            const NetworkParams params = load_network(path);
            for (const SuperSample& s : ds.test)
                recons.push_back(denoiser_forward(params, s.x0));
        } else if (method == "parallel-super" || method == "serial-super") {
            const std::string dir = cfg.output_dir + "/models/" + method;
            if (!fs::exists(dir + "/model.txt"))
                throw std::runtime_error("missing model under " + dir + "; run `superct train" +
                                         " --method " + method + "` first");
            const SuperModel model = load_super_model(dir);
            for (const SuperSample& s : ds.test)
                recons.push_back(method == "parallel-super"
                                     ? reconstruct_parallel_super(model, cfg.geometry, s.y,
                                                                  s.w, s.x0)
                                     : reconstruct_serial_super(model, cfg.geometry, s.y,
                                                                s.w, s.x0));
        } else {
            throw std::invalid_argument("unknown reconstruction method '" + method + "'");
        }
    }
    export_recons(recons, cfg, method);
    std::cout << "reconstructed " << recons.size() << " test samples with " << method
              << "\n";
    return 0;
}

int cmd_sweep_lambda(const ExperimentConfig& cfg) {
    apply_threads(cfg);
    Dataset ds = load_dataset(cfg, true);
    fill_ep_inits(ds, cfg);
    export_inits(ds, cfg);
    const TransformUnion tu = load_required_transforms(cfg);
    const SweepResult sweep = sweep_lambda(cfg.lambdas, ds.train, ds.val, cfg.geometry, tu,
                                           parallel_train_options(cfg));
    write_sweep_csv(sweep, cfg.output_dir + "/sweep.csv");
    save_super_model(sweep.best_model, cfg.output_dir + "/models/parallel-super");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", sweep.best_lambda);
    std::cout << "best lambda " << buf << "\n";
    return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg) {
    apply_threads(cfg);
    std::vector<Image> refs_hu;
    for (int i = 0; i < cfg.n_test; ++i) {
        const std::string xp = data_path(cfg, "test", "xstar", i);
        if (!fs::exists(xp))
            throw std::runtime_error("missing " + xp + "; run `superct simulate` first");
        refs_hu.push_back(to_hu(read_f32_image(xp)));
    }
    std::vector<MetricReport> reports;
    for (const char* method : {"fbp", "pwls-ep", "pwls-ultra", "denoiser", "serial-super",
                               "parallel-super"}) {
        const std::string dir = cfg.output_dir + "/recon/" + method;
        if (!fs::exists(dir)) continue;
        std::vector<Image> recons_hu;
        char name[32];
        for (int i = 0; i < cfg.n_test; ++i) {
            std::snprintf(name, sizeof(name), "/%03d.f32", i);
            recons_hu.push_back(to_hu(read_f32_image(dir + name)));
        }
        reports.push_back(evaluate_method(method, recons_hu, refs_hu));
    }
    if (reports.empty())
        throw std::runtime_error("no reconstructions under " + cfg.output_dir +
                                 "/recon; run `superct reconstruct` first");
    write_report_csv(reports, cfg.output_dir + "/evaluate.csv");
    const std::string table = format_report_table(reports);
    {
        std::ofstream f(cfg.output_dir + "/summary.txt");
        f << table;
    }
    std::cout << table;
    return 0;
}

}  // namespace superct
