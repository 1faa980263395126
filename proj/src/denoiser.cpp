#include "superct/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "superct/rng.hpp"

namespace superct {

void NetworkSpec::validate() const {
    if (depth < 2) throw std::invalid_argument("network spec: depth must be >= 2");
    if (channels < 1) throw std::invalid_argument("network spec: channels must be >= 1");
    if (kernel < 1 || kernel % 2 == 0)
        throw std::invalid_argument("network spec: kernel must be odd");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (lr_end <= 0.0 || lr_end > lr_start)
        throw std::invalid_argument("train config: need 0 < lr_end <= lr_start");
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("train config: momentum must be in [0,1)");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (init_variance < 0.0)
        throw std::invalid_argument("train config: init_variance must be >= 0");
    if (grad_clip < 0.0)
        throw std::invalid_argument("train config: grad_clip must be >= 0");
}

NetworkParams init_params(const NetworkSpec& spec, double variance, std::uint64_t seed) {
    spec.validate();
    NetworkParams p;
    p.spec = spec;
    Prng rng(seed, 0x64656E7AULL);
    const double stddev = std::sqrt(variance);
    const int kk = spec.kernel * spec.kernel;
    for (int layer = 0; layer < spec.depth; ++layer) {
        const int ic = p.layer_in_channels(layer);
        const int oc = p.layer_out_channels(layer);
        std::vector<double> w(static_cast<std::size_t>(oc) * ic * kk);
        for (double& v : w) v = stddev * rng.gaussian();
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::vector<double>(oc, 0.0));
    }
    return p;
}

namespace {

using Plane = std::vector<double>;  // [channels][rows][cols]

void conv_forward(const double* in, int ic, const double* w, const double* b,
                  double* out, int oc, int rows, int cols, int k) {
    const int h = k / 2;
#pragma omp parallel for schedule(static)
    for (int o = 0; o < oc; ++o) {
        double* op = out + static_cast<std::size_t>(o) * rows * cols;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) op[r * cols + c] = b[o];
        for (int i = 0; i < ic; ++i) {
            const double* ip = in + static_cast<std::size_t>(i) * rows * cols;
            const double* wp = w + (static_cast<std::size_t>(o) * ic + i) * k * k;
            for (int kr = 0; kr < k; ++kr) {
                for (int kc = 0; kc < k; ++kc) {
                    const double wv = wp[kr * k + kc];
                    if (wv == 0.0) continue;
                    const int r0 = std::max(0, h - kr), r1 = std::min(rows, rows + h - kr);
                    const int c0 = std::max(0, h - kc), c1 = std::min(cols, cols + h - kc);
                    for (int r = r0; r < r1; ++r) {
                        const double* irow = ip + (r + kr - h) * cols + (kc - h);
                        double* orow = op + r * cols;
                        for (int c = c0; c < c1; ++c) orow[c] += wv * irow[c];
                    }
                }
            }
        }
    }
}

struct ForwardCache {
    std::vector<Plane> inputs;  // post-activation input of each layer
    std::vector<Plane> pre;     // pre-activation output of each layer
};

// input: single-channel normalized plane; returns network output (before the
// residual addition).
Plane forward_chain(const NetworkParams& p, const Plane& input, int rows, int cols,
                    ForwardCache* cache) {
    const auto& spec = p.spec;
    Plane cur = input;
    for (int layer = 0; layer < spec.depth; ++layer) {
        const int ic = p.layer_in_channels(layer);
        const int oc = p.layer_out_channels(layer);
        Plane out(static_cast<std::size_t>(oc) * rows * cols);
        conv_forward(cur.data(), ic, p.weights[layer].data(), p.biases[layer].data(),
                     out.data(), oc, rows, cols, spec.kernel);
        if (cache) {
            cache->inputs.push_back(cur);
            cache->pre.push_back(out);
        }
        if (layer < spec.depth - 1)
            for (double& v : out) v = v > 0.0 ? v : 0.0;  // rectifier, 0 at 0
        cur = std::move(out);
    }
    return cur;
}

void backward_chain(const NetworkParams& p, const ForwardCache& cache, Plane dout,
                    int rows, int cols, NetworkParams& grad) {
    const auto& spec = p.spec;
    const int k = spec.kernel;
    const int h = k / 2;
    for (int layer = spec.depth - 1; layer >= 0; --layer) {
        const int ic = p.layer_in_channels(layer);
        const int oc = p.layer_out_channels(layer);
        // dout arrives w.r.t. post-activation; fold in the rectifier mask
        if (layer < spec.depth - 1) {
            const Plane& pre = cache.pre[layer];
            for (std::size_t i = 0; i < dout.size(); ++i)
                if (pre[i] <= 0.0) dout[i] = 0.0;
        }
        const Plane& in = cache.inputs[layer];
        auto& gw = grad.weights[layer];
        auto& gb = grad.biases[layer];
#pragma omp parallel for schedule(static)
        for (int o = 0; o < oc; ++o) {
            const double* dp = dout.data() + static_cast<std::size_t>(o) * rows * cols;
            double acc = 0.0;
            for (int idx = 0; idx < rows * cols; ++idx) acc += dp[idx];
            gb[o] += acc;
            for (int i = 0; i < ic; ++i) {
                const double* ip = in.data() + static_cast<std::size_t>(i) * rows * cols;
                double* gwp = gw.data() + (static_cast<std::size_t>(o) * ic + i) * k * k;
                for (int kr = 0; kr < k; ++kr)
                    for (int kc = 0; kc < k; ++kc) {
                        const int r0 = std::max(0, h - kr), r1 = std::min(rows, rows + h - kr);
                        const int c0 = std::max(0, h - kc), c1 = std::min(cols, cols + h - kc);
                        double s = 0.0;
                        for (int r = r0; r < r1; ++r) {
                            const double* irow = ip + (r + kr - h) * cols + (kc - h);
                            const double* drow = dp + r * cols;
                            for (int c = c0; c < c1; ++c) s += drow[c] * irow[c];
                        }
                        gwp[kr * k + kc] += s;
                    }
            }
        }
        if (layer == 0) break;
        Plane din(static_cast<std::size_t>(ic) * rows * cols, 0.0);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < ic; ++i) {
            double* dip = din.data() + static_cast<std::size_t>(i) * rows * cols;
            for (int o = 0; o < oc; ++o) {
                const double* dp = dout.data() + static_cast<std::size_t>(o) * rows * cols;
                const double* wp =
                    p.weights[layer].data() + (static_cast<std::size_t>(o) * ic + i) * k * k;
                for (int kr = 0; kr < k; ++kr)
                    for (int kc = 0; kc < k; ++kc) {
                        const double wv = wp[kr * k + kc];
                        if (wv == 0.0) continue;
                        const int r0 = std::max(0, h - kr), r1 = std::min(rows, rows + h - kr);
                        const int c0 = std::max(0, h - kc), c1 = std::min(cols, cols + h - kc);
                        for (int r = r0; r < r1; ++r) {
                            const double* drow = dp + r * cols;
                            double* irow = dip + (r + kr - h) * cols + (kc - h);
                            for (int c = c0; c < c1; ++c) irow[c] += wv * drow[c];
                        }
                    }
            }
        }
        dout = std::move(din);
    }
}

NetworkParams zero_like(const NetworkParams& p) {
    NetworkParams g;
    g.spec = p.spec;
    for (const auto& w : p.weights) g.weights.push_back(std::vector<double>(w.size(), 0.0));
    for (const auto& b : p.biases) g.biases.push_back(std::vector<double>(b.size(), 0.0));
    return g;
}

}  // namespace

Image denoiser_forward(const NetworkParams& params, const Image& input) {
    params.spec.validate();
    if (input.rows < params.spec.kernel || input.cols < params.spec.kernel)
        throw std::invalid_argument("denoiser_forward: image smaller than kernel");
    const int rows = input.rows, cols = input.cols;
    Plane u(input.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = input.data[i] * kDenoiserScale;
    Plane out = forward_chain(params, u, rows, cols, nullptr);
    Image result(rows, cols, input.pixel_size_mm);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = out[i];
        if (params.spec.residual) v += u[i];
        result.data[i] = v / kDenoiserScale;
    }
    return result;
}

std::pair<double, NetworkParams> loss_and_gradient(
    const NetworkParams& params, const std::vector<std::pair<Image, Image>>& batch) {
    params.spec.validate();
    if (batch.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
    NetworkParams grad = zero_like(params);
    double loss = 0.0;
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const Image& in = batch[n].first;
        const Image& target = batch[n].second;
        if (!in.same_shape(target))
            throw std::invalid_argument("loss_and_gradient: input/target shape mismatch");
        const int rows = in.rows, cols = in.cols;
        Plane u(in.size()), t(in.size());
        for (std::size_t i = 0; i < u.size(); ++i) {
            u[i] = in.data[i] * kDenoiserScale;
            t[i] = target.data[i] * kDenoiserScale;
        }
        ForwardCache cache;
        Plane out = forward_chain(params, u, rows, cols, &cache);
        Plane dout(out.size());
        double sample_loss = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            double v = out[i];
            if (params.spec.residual) v += u[i];
            const double d = v - t[i];
            sample_loss += d * d;
            dout[i] = 2.0 * d;
        }
        if (!std::isfinite(sample_loss))
            throw std::runtime_error("loss_and_gradient: non-finite loss at sample " +
                                     std::to_string(n));
        loss += sample_loss;
        backward_chain(params, cache, std::move(dout), rows, cols, grad);
    }
    return {loss, std::move(grad)};
}

TrainResult train_denoiser(const NetworkParams& params_init,
                           const std::vector<std::pair<Image, Image>>& dataset,
                           const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train_denoiser: empty dataset");
    TrainResult res;
    res.params = params_init;
    NetworkParams velocity = zero_like(params_init);

    const int n = static_cast<int>(dataset.size());
    const int steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const long long total_steps = static_cast<long long>(cfg.epochs) * steps_per_epoch;
    const double lr_ratio = cfg.lr_end / cfg.lr_start;

    double initial_loss = -1.0;
    long long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        Prng rng(cfg.rng_seed, 0x73687566ULL + static_cast<std::uint64_t>(epoch));
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
            std::swap(order[i], order[j]);
        }
        for (int b = 0; b < steps_per_epoch; ++b, ++step) {
            std::vector<std::pair<Image, Image>> batch;
            for (int m = b * cfg.batch_size; m < std::min(n, (b + 1) * cfg.batch_size); ++m)
                batch.push_back(dataset[order[m]]);
            auto [loss, grad] = loss_and_gradient(res.params, batch);
            res.loss_trace.push_back(loss);
            if (initial_loss < 0.0) initial_loss = loss;
            if (initial_loss > 0.0 && loss > 1e6 * initial_loss)
                throw std::runtime_error("train_denoiser: divergence at step " +
                                         std::to_string(step));
            if (cfg.grad_clip > 0.0) {
                double norm2 = 0.0;
                for (std::size_t l = 0; l < grad.weights.size(); ++l) {
                    for (double v : grad.weights[l]) norm2 += v * v;
                    for (double v : grad.biases[l]) norm2 += v * v;
                }
                if (norm2 > cfg.grad_clip * cfg.grad_clip) {
                    const double scale = cfg.grad_clip / std::sqrt(norm2);
                    for (std::size_t l = 0; l < grad.weights.size(); ++l) {
                        for (double& v : grad.weights[l]) v *= scale;
                        for (double& v : grad.biases[l]) v *= scale;
                    }
                }
            }
            const double frac =
                total_steps > 1 ? static_cast<double>(step) / static_cast<double>(total_steps - 1)
                                : 0.0;
            const double lr = cfg.lr_start * std::pow(lr_ratio, frac);
            for (std::size_t l = 0; l < res.params.weights.size(); ++l) {
                auto& w = res.params.weights[l];
                auto& vw = velocity.weights[l];
                const auto& gw = grad.weights[l];
                for (std::size_t i = 0; i < w.size(); ++i) {
                    vw[i] = cfg.momentum * vw[i] - lr * gw[i];
                    w[i] += vw[i];
                }
                auto& bb = res.params.biases[l];
                auto& vb = velocity.biases[l];
                const auto& gb = grad.biases[l];
                for (std::size_t i = 0; i < bb.size(); ++i) {
                    vb[i] = cfg.momentum * vb[i] - lr * gb[i];
                    bb[i] += vb[i];
                }
            }
        }
    }
    return res;
}

void save_network(const NetworkParams& params, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f.write("SDNZ", 4);
    const std::uint32_t version = 1;
    const std::int32_t depth = params.spec.depth;
    const std::int32_t channels = params.spec.channels;
    const std::int32_t kernel = params.spec.kernel;
    const std::uint8_t residual = params.spec.residual ? 1 : 0;
    const double norm = kDenoiserScale;
    f.write(reinterpret_cast<const char*>(&version), 4);
    f.write(reinterpret_cast<const char*>(&depth), 4);
    f.write(reinterpret_cast<const char*>(&channels), 4);
    f.write(reinterpret_cast<const char*>(&kernel), 4);
    f.write(reinterpret_cast<const char*>(&residual), 1);
    f.write(reinterpret_cast<const char*>(&norm), 8);
    for (int layer = 0; layer < params.spec.depth; ++layer) {
        const auto& w = params.weights[layer];
        const auto& b = params.biases[layer];
        f.write(reinterpret_cast<const char*>(w.data()), 8 * static_cast<std::streamsize>(w.size()));
        f.write(reinterpret_cast<const char*>(b.data()), 8 * static_cast<std::streamsize>(b.size()));
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

NetworkParams load_network(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::string(magic, 4) != "SDNZ")
        throw std::runtime_error("not a denoiser model file: " + path);
    std::uint32_t version = 0;
    std::int32_t depth = 0, channels = 0, kernel = 0;
    std::uint8_t residual = 0;
    double norm = 0.0;
    f.read(reinterpret_cast<char*>(&version), 4);
    f.read(reinterpret_cast<char*>(&depth), 4);
    f.read(reinterpret_cast<char*>(&channels), 4);
    f.read(reinterpret_cast<char*>(&kernel), 4);
    f.read(reinterpret_cast<char*>(&residual), 1);
    f.read(reinterpret_cast<char*>(&norm), 8);
    if (!f || version != 1) throw std::runtime_error("bad denoiser model header: " + path);
    NetworkSpec spec;
    spec.depth = depth;
    spec.channels = channels;
    spec.kernel = kernel;
    spec.residual = residual != 0;
    spec.validate();
    NetworkParams p;
    p.spec = spec;
    const int kk = kernel * kernel;
    for (int layer = 0; layer < depth; ++layer) {
        const int ic = p.layer_in_channels(layer);
        const int oc = p.layer_out_channels(layer);
        std::vector<double> w(static_cast<std::size_t>(oc) * ic * kk);
        std::vector<double> b(oc);
        f.read(reinterpret_cast<char*>(w.data()), 8 * static_cast<std::streamsize>(w.size()));
        f.read(reinterpret_cast<char*>(b.data()), 8 * static_cast<std::streamsize>(b.size()));
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    if (!f) throw std::runtime_error("truncated denoiser model file: " + path);
    return p;
}

}  // namespace superct
