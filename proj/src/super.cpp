#include "superct/super.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "superct/eval.hpp"
#include "superct/tomo.hpp"

namespace superct {

Image combine(const Image& net_out, const Image& mbir_out, double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("combine: lambda must be in [0, 1]");
    if (lambda == 0.0) return mbir_out;
    if (lambda == 1.0) return net_out;
    if (!net_out.same_shape(mbir_out))
        throw std::invalid_argument("combine: shape mismatch");
    Image out = net_out;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = lambda * net_out.data[i] + (1.0 - lambda) * mbir_out.data[i];
    return out;
}

namespace {

double mean_val_rmse(const std::vector<Image>& xs, const std::vector<SuperSample>& set) {
    if (set.empty()) return -1.0;
    double s = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i)
        s += rmse_hu(to_hu(xs[i]), to_hu(set[i].xstar));
    return s / static_cast<double>(set.size());
}

// The network branch is unconstrained, so a combined layer output may dip
// below zero; the solver starts from its projection onto the feasible set.
Image nonneg(Image img) {
    for (double& v : img.data)
        if (v < 0.0) v = 0.0;
    return img;
}

// One MBIR pass per sample; parallel across samples, deterministic per sample.
std::vector<Image> mbir_pass(const std::vector<Image>& inits,
                             const std::vector<const SuperSample*>& samples,
                             const Geometry& geom, const TransformUnion& tu,
                             const PatchConfig& patch, const SolverSettings& settings,
                             double* mean_objective) {
    std::vector<Image> out(inits.size());
    std::vector<double> final_obj(inits.size(), 0.0);
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(inits.size()); ++i) {
        try {
            Trace tr;
            out[i] = pwls_ultra(samples[i]->y, samples[i]->w, geom, tu, patch, settings,
                                nonneg(inits[i]), &tr)
                         .first;
            final_obj[i] = tr.empty() ? 0.0 : tr.back().objective;
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    if (mean_objective) {
        double s = 0.0;
        for (double v : final_obj) s += v;
        *mean_objective = inits.empty() ? -1.0 : s / static_cast<double>(inits.size());
    }
    return out;
}

NetworkParams train_layer_net(const std::vector<Image>& inputs,
                              const std::vector<SuperSample>& train_set,
                              const SuperTrainOptions& opt, int layer,
                              double* final_loss) {
    std::vector<std::pair<Image, Image>> dataset;
    dataset.reserve(inputs.size());
    for (std::size_t n = 0; n < inputs.size(); ++n)
        dataset.emplace_back(inputs[n], train_set[n].xstar);
    TrainConfig cfg = opt.net_train;
    cfg.rng_seed = opt.net_train.rng_seed + static_cast<std::uint64_t>(layer);
    NetworkParams init = init_params(opt.net_spec, cfg.init_variance, cfg.rng_seed);
    TrainResult res = train_denoiser(init, dataset, cfg);
    if (final_loss)
        *final_loss = res.loss_trace.empty() ? -1.0 : res.loss_trace.back();
    return std::move(res.params);
}

std::vector<const SuperSample*> ptrs(const std::vector<SuperSample>& v) {
    std::vector<const SuperSample*> p;
    p.reserve(v.size());
    for (const auto& s : v) p.push_back(&s);
    return p;
}

}  // namespace

SuperModel train_parallel_super(const std::vector<SuperSample>& train_set,
                                const Geometry& geom, const TransformUnion& tu,
                                const SuperTrainOptions& opt,
                                const std::vector<SuperSample>& val_set,
                                LayerTrace* trace) {
    if (train_set.empty()) throw std::invalid_argument("train_parallel_super: empty training set");
    if (opt.lambda < 0.0 || opt.lambda > 1.0)
        throw std::invalid_argument("train_parallel_super: lambda must be in [0, 1]");

    SuperModel model;
    model.lambda = opt.lambda;
    model.layers = opt.layers;
    model.ultra = opt.ultra;
    model.ultra.mu = 0.0;
    model.patch = opt.patch;
    model.tu = tu;

    std::vector<Image> xt, xv;
    for (const auto& s : train_set) xt.push_back(s.x0);
    for (const auto& s : val_set) xv.push_back(s.x0);
    const auto train_ptrs = ptrs(train_set);
    const auto val_ptrs = ptrs(val_set);

    for (int l = 1; l <= opt.layers; ++l) {
        try {
            LayerStat stat;
            stat.layer = l;

            std::vector<Image> mbir_t, mbir_v;
            if (opt.lambda < 1.0) {
                mbir_t = mbir_pass(xt, train_ptrs, geom, tu, opt.patch, model.ultra,
                                   &stat.unsup_objective);
                if (!val_set.empty())
                    mbir_v = mbir_pass(xv, val_ptrs, geom, tu, opt.patch, model.ultra, nullptr);
            }

            NetworkParams net;
            if (opt.lambda > 0.0)
                net = train_layer_net(xt, train_set, opt, l, &stat.train_loss);
            else
                net = init_params(opt.net_spec, opt.net_train.init_variance,
                                  opt.net_train.rng_seed + static_cast<std::uint64_t>(l));
            model.nets.push_back(net);

            for (std::size_t n = 0; n < xt.size(); ++n) {
                if (opt.lambda == 0.0)
                    xt[n] = mbir_t[n];
                else if (opt.lambda == 1.0)
                    xt[n] = denoiser_forward(net, xt[n]);
                else
                    xt[n] = combine(denoiser_forward(net, xt[n]), mbir_t[n], opt.lambda);
            }
            for (std::size_t n = 0; n < xv.size(); ++n) {
                if (opt.lambda == 0.0)
                    xv[n] = mbir_v[n];
                else if (opt.lambda == 1.0)
                    xv[n] = denoiser_forward(net, xv[n]);
                else
                    xv[n] = combine(denoiser_forward(net, xv[n]), mbir_v[n], opt.lambda);
            }
            stat.val_rmse_hu = mean_val_rmse(xv, val_set);
            if (trace) trace->push_back(stat);
        } catch (const std::exception& e) {
            throw std::runtime_error("parallel SUPER layer " + std::to_string(l) + ": " +
                                     e.what());
        }
    }
    return model;
}

Image reconstruct_parallel_super(const SuperModel& model, const Geometry& geom,
                                 const Sinogram& y, const WeightGrid& w,
                                 const Image& x0, LayerTrace* trace) {
    Image cur = x0;
    for (int l = 1; l <= model.layers; ++l) {
        try {
            LayerStat stat;
            stat.layer = l;
            if (model.lambda == 0.0) {
                Trace tr;
                cur = pwls_ultra(y, w, geom, model.tu, model.patch, model.ultra, nonneg(cur), &tr)
                          .first;
                stat.unsup_objective = tr.empty() ? -1.0 : tr.back().objective;
            } else if (model.lambda == 1.0) {
                cur = denoiser_forward(model.nets[static_cast<std::size_t>(l - 1)], cur);
            } else {
                Trace tr;
                Image mbir =
                    pwls_ultra(y, w, geom, model.tu, model.patch, model.ultra, nonneg(cur), &tr)
                        .first;
                stat.unsup_objective = tr.empty() ? -1.0 : tr.back().objective;
                Image net = denoiser_forward(model.nets[static_cast<std::size_t>(l - 1)], cur);
                cur = combine(net, mbir, model.lambda);
            }
            if (trace) trace->push_back(stat);
        } catch (const std::exception& e) {
            throw std::runtime_error("parallel SUPER layer " + std::to_string(l) + ": " +
                                     e.what());
        }
    }
    return cur;
}

SuperModel train_serial_super(const std::vector<SuperSample>& train_set,
                              const Geometry& geom, const TransformUnion& tu,
                              const SuperTrainOptions& opt,
                              const std::vector<SuperSample>& val_set,
                              LayerTrace* trace) {
    if (train_set.empty()) throw std::invalid_argument("train_serial_super: empty training set");
    SuperModel model;
    model.lambda = 1.0;  // unused by the serial pipeline
    model.layers = opt.layers;
    model.ultra = opt.ultra;
    model.patch = opt.patch;
    model.tu = tu;

    std::vector<Image> xt, xv;
    for (const auto& s : train_set) xt.push_back(s.x0);
    for (const auto& s : val_set) xv.push_back(s.x0);

    for (int l = 1; l <= opt.layers; ++l) {
        try {
            LayerStat stat;
            stat.layer = l;
            NetworkParams net = train_layer_net(xt, train_set, opt, l, &stat.train_loss);
            model.nets.push_back(net);

            std::vector<double> obj(xt.size(), 0.0);
            auto prox_pass = [&](std::vector<Image>& xs, const std::vector<SuperSample>& set,
                                 bool record) {
                std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
                for (long long n = 0; n < static_cast<long long>(xs.size()); ++n) {
                    try {
                        const Image anchor = denoiser_forward(net, xs[n]);
                        Trace tr;
                        xs[n] = pwls_ultra_prox(set[n].y, set[n].w, geom, tu, opt.patch,
                                                model.ultra, nonneg(xs[n]), anchor, &tr);
                        if (record) obj[n] = tr.empty() ? 0.0 : tr.back().objective;
                    } catch (...) {
#pragma omp critical
                        if (!err) err = std::current_exception();
                    }
                }
                if (err) std::rethrow_exception(err);
            };
            prox_pass(xt, train_set, true);
            if (!val_set.empty()) prox_pass(xv, val_set, false);

            double s = 0.0;
            for (double v : obj) s += v;
            stat.unsup_objective = s / static_cast<double>(obj.size());
            stat.val_rmse_hu = mean_val_rmse(xv, val_set);
            if (trace) trace->push_back(stat);
        } catch (const std::exception& e) {
            throw std::runtime_error("serial SUPER layer " + std::to_string(l) + ": " + e.what());
        }
    }
    return model;
}

Image reconstruct_serial_super(const SuperModel& model, const Geometry& geom,
                               const Sinogram& y, const WeightGrid& w,
                               const Image& x0, LayerTrace* trace) {
    Image cur = x0;
    for (int l = 1; l <= model.layers; ++l) {
        try {
            LayerStat stat;
            stat.layer = l;
            const Image anchor =
                denoiser_forward(model.nets[static_cast<std::size_t>(l - 1)], cur);
            Trace tr;
            cur = pwls_ultra_prox(y, w, geom, model.tu, model.patch, model.ultra, nonneg(cur),
                                  anchor, &tr);
            stat.unsup_objective = tr.empty() ? -1.0 : tr.back().objective;
            if (trace) trace->push_back(stat);
        } catch (const std::exception& e) {
            throw std::runtime_error("serial SUPER layer " + std::to_string(l) + ": " + e.what());
        }
    }
    return cur;
}

SweepResult sweep_lambda(const std::vector<double>& candidates,
                         const std::vector<SuperSample>& train_set,
                         const std::vector<SuperSample>& val_set,
                         const Geometry& geom, const TransformUnion& tu,
                         const SuperTrainOptions& opt) {
    if (candidates.empty()) throw std::invalid_argument("sweep_lambda: empty candidate set");
    for (double c : candidates)
        if (c < 0.0 || c > 1.0)
            throw std::invalid_argument("sweep_lambda: candidates must lie in [0, 1]");
    if (val_set.empty()) throw std::invalid_argument("sweep_lambda: empty validation set");

    SweepResult res;
    double best = -1.0;
    for (double lam : candidates) {
        SuperTrainOptions o = opt;
        o.lambda = lam;
        LayerTrace trace;
        SuperModel model = train_parallel_super(train_set, geom, tu, o, val_set, &trace);
        SweepRow row;
        row.lambda = lam;
        for (const auto& st : trace) row.per_layer_val_rmse.push_back(st.val_rmse_hu);
        const double final_rmse = row.per_layer_val_rmse.back();
        res.rows.push_back(std::move(row));
        if (best < 0.0 || final_rmse < best) {  // ties keep the earlier, smaller lambda
            best = final_rmse;
            res.best_lambda = lam;
            res.best_model = std::move(model);
        }
    }
    return res;
}

void write_sweep_csv(const SweepResult& sweep, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "lambda";
    if (!sweep.rows.empty())
        for (std::size_t l = 0; l < sweep.rows[0].per_layer_val_rmse.size(); ++l)
            f << ",rmse_layer" << (l + 1);
    f << "\n";
    char buf[64];
    for (const auto& row : sweep.rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", row.lambda);
        f << buf;
        for (double v : row.per_layer_val_rmse) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            f << buf;
        }
        f << "\n";
    }
}

void save_super_model(const SuperModel& model, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_transform_union(model.tu, dir + "/transforms.ultr");
    for (int l = 0; l < model.layers; ++l) {
        char name[32];
        std::snprintf(name, sizeof(name), "/layer%03d.sdnz", l + 1);
        save_network(model.nets[static_cast<std::size_t>(l)], dir + name);
    }
    std::ofstream f(dir + "/model.txt");
    if (!f) throw std::runtime_error("cannot write model manifest in " + dir);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "lambda = %.17g\n", model.lambda);
    f << "format = \"super-model-v1\"\n" << buf;
    f << "layers = " << model.layers << "\n";
    std::snprintf(buf, sizeof(buf), "beta = %.17g\ngamma = %.17g\n", model.ultra.beta,
                  model.ultra.gamma);
    f << buf;
    f << "outer_iters = " << model.ultra.outer_iters << "\n";
    f << "inner_iters = " << model.ultra.inner_iters << "\n";
    std::snprintf(buf, sizeof(buf), "mu = %.17g\n", model.ultra.mu);
    f << buf;
    f << "patch_side = " << model.patch.patch_side << "\n";
    f << "stride = " << model.patch.stride << "\n";
    f << "transforms = \"transforms.ultr\"\n";
}

SuperModel load_super_model(const std::string& dir) {
    std::ifstream f(dir + "/model.txt");
    if (!f) throw std::runtime_error("cannot open model manifest in " + dir);
    SuperModel model;
    std::string line;
    while (std::getline(f, line)) {
        std::istringstream is(line);
        std::string key, eq;
        is >> key >> eq;
        if (key == "lambda") is >> model.lambda;
        else if (key == "layers") is >> model.layers;
        else if (key == "beta") is >> model.ultra.beta;
        else if (key == "gamma") is >> model.ultra.gamma;
        else if (key == "outer_iters") is >> model.ultra.outer_iters;
        else if (key == "inner_iters") is >> model.ultra.inner_iters;
        else if (key == "mu") is >> model.ultra.mu;
        else if (key == "patch_side") is >> model.patch.patch_side;
        else if (key == "stride") is >> model.patch.stride;
    }
    model.tu = load_transform_union(dir + "/transforms.ultr");
    for (int l = 0; l < model.layers; ++l) {
        char name[32];
        std::snprintf(name, sizeof(name), "/layer%03d.sdnz", l + 1);
        model.nets.push_back(load_network(dir + name));
    }
    return model;
}

}  // namespace superct
