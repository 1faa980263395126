#include "superct/ultra.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "superct/rng.hpp"

namespace superct {

void TransformUnion::validate() const {
    if (omegas.empty()) throw std::invalid_argument("transform union: K must be >= 1");
    if (gamma <= 0.0) throw std::invalid_argument("transform union: gamma must be > 0");
    const int l = dim();
    for (const auto& om : omegas) {
        if (om.rows() != l || om.cols() != l)
            throw std::invalid_argument("transform union: transforms must be square, same size");
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(om);
        double logdet = 0.0;
        for (int i = 0; i < l; ++i) logdet += std::log(std::abs(lu.matrixLU()(i, i)));
        if (!std::isfinite(logdet))
            throw std::invalid_argument("transform union: singular transform");
    }
}

double TransformUnion::max_spectral_norm_sq() const {
    double m = 0.0;
    for (const auto& om : omegas) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(om);
        const double s = svd.singularValues()(0);
        m = std::max(m, s * s);
    }
    return m;
}

Eigen::VectorXd hard_threshold(const Eigen::VectorXd& v, double gamma) {
    if (gamma <= 0.0) throw std::invalid_argument("hard_threshold: gamma must be > 0");
    Eigen::VectorXd z = v;
    for (Eigen::Index i = 0; i < z.size(); ++i)
        if (std::abs(z(i)) <= gamma) z(i) = 0.0;
    return z;
}

SparseCodeResult cluster_and_code(const Eigen::MatrixXd& patches, const TransformUnion& tu) {
    const int l = tu.dim();
    const int K = tu.clusters();
    if (patches.rows() != l)
        throw std::invalid_argument("cluster_and_code: patch length does not match transforms");
    const Eigen::Index J = patches.cols();
    const double g2 = tu.gamma * tu.gamma;

    SparseCodeResult res;
    res.cluster.assign(static_cast<std::size_t>(J), 0);
    res.codes.resize(l, J);
    res.contribution.assign(static_cast<std::size_t>(J), 0.0);

    // transformed patches per cluster, one GEMM each
    std::vector<Eigen::MatrixXd> tp(K);
    for (int k = 0; k < K; ++k) tp[k] = tu.omegas[k] * patches;

#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < J; ++j) {
        double best = 0.0;
        int best_k = -1;
        for (int k = 0; k < K; ++k) {
            double cost = 0.0;
            for (int i = 0; i < l; ++i) {
                const double v = tp[k](i, j);
                if (std::abs(v) > tu.gamma)
                    cost += g2;  // kept entry: zero residual, pay the l0 price
                else
                    cost += v * v;
            }
            if (best_k < 0 || cost < best) {
                best = cost;
                best_k = k;
            }
        }
        res.cluster[j] = best_k;
        res.contribution[j] = best;
        for (int i = 0; i < l; ++i) {
            const double v = tp[best_k](i, j);
            res.codes(i, j) = std::abs(v) > tu.gamma ? v : 0.0;
        }
    }
    double total = 0.0;
    for (double c : res.contribution) total += c;
    res.total = total;
    return res;
}

Eigen::MatrixXd dct2_transform(int side) {
    Eigen::MatrixXd d1(side, side);
    for (int k = 0; k < side; ++k) {
        const double a = k == 0 ? std::sqrt(1.0 / side) : std::sqrt(2.0 / side);
        for (int n = 0; n < side; ++n)
            d1(k, n) = a * std::cos(M_PI * (n + 0.5) * k / side);
    }
    const int l = side * side;
    Eigen::MatrixXd out(l, l);
    // kron(d1, d1): patch is vectorized row-major, so row index = kr*side+kc
    for (int kr = 0; kr < side; ++kr)
        for (int kc = 0; kc < side; ++kc)
            for (int nr = 0; nr < side; ++nr)
                for (int nc = 0; nc < side; ++nc)
                    out(kr * side + kc, nr * side + nc) = d1(kr, nr) * d1(kc, nc);
    return out;
}

namespace {

Eigen::MatrixXd random_rotation(int n, Prng& rng) {
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = rng.gaussian();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ();
    // fix signs so the factorization is unique-ish
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i)
        if (r(i, i) < 0) q.col(i) *= -1.0;
    return q;
}

double log_abs_det(const Eigen::MatrixXd& m) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    double s = 0.0;
    for (int i = 0; i < m.rows(); ++i) s += std::log(std::abs(lu.matrixLU()(i, i)));
    return s;
}

// argmin_Omega ||Omega Y - Z||_F^2 + lambda (||Omega||_F^2 - log|det Omega|)
Eigen::MatrixXd transform_update(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Z,
                                 double lambda) {
    const int l = static_cast<int>(Y.rows());
    Eigen::MatrixXd G = Y * Y.transpose();
    G.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd M = L.triangularView<Eigen::Lower>().solve(Y * Z.transpose());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::VectorXd sig = svd.singularValues();
    Eigen::VectorXd d(l);
    for (int i = 0; i < l; ++i)
        d(i) = 0.5 * (sig(i) + std::sqrt(sig(i) * sig(i) + 2.0 * lambda));
    Eigen::MatrixXd core = svd.matrixV() * d.asDiagonal() * svd.matrixU().transpose();
    // right-multiply by L^{-1}
    return L.triangularView<Eigen::Lower>().transpose().solve(core.transpose()).transpose();
}

}  // namespace

TransformLearnResult learn_transforms(const Eigen::MatrixXd& training_patches,
                                      const TransformLearnOptions& opt) {
    if (opt.clusters < 1) throw std::invalid_argument("learn_transforms: K must be >= 1");
    if (opt.gamma <= 0.0) throw std::invalid_argument("learn_transforms: gamma must be > 0");
    const int l = static_cast<int>(training_patches.rows());
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(l))));
    if (side * side != l)
        throw std::invalid_argument("learn_transforms: patch length must be a square");

    TransformUnion tu;
    tu.gamma = opt.gamma;
    Eigen::MatrixXd dct = dct2_transform(side);
    Prng rng(opt.rng_seed, 0x756C747261ULL);
    tu.omegas.push_back(dct);
    for (int k = 1; k < opt.clusters; ++k)
        tu.omegas.push_back(random_rotation(l, rng) * dct);

    // fixed regularization weight keeps the learning objective well-defined
    // across alternations (block coordinate descent stays exactly monotone)
    const double lambda = opt.lambda0 * training_patches.squaredNorm() / opt.clusters;

    TransformLearnResult res;
    const Eigen::Index J = training_patches.cols();
    SparseCodeResult sc = cluster_and_code(training_patches, tu);
    for (int it = 0; it < opt.iterations; ++it) {
        for (int k = 0; k < opt.clusters; ++k) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index j = 0; j < J; ++j)
                if (sc.cluster[j] == k) idx.push_back(j);
            if (idx.empty()) {
                std::fprintf(stderr, "learn_transforms: cluster %d empty at iteration %d\n",
                             k, it);
                continue;
            }
            Eigen::MatrixXd Y(l, static_cast<Eigen::Index>(idx.size()));
            Eigen::MatrixXd Z(l, static_cast<Eigen::Index>(idx.size()));
            for (std::size_t m = 0; m < idx.size(); ++m) {
                Y.col(static_cast<Eigen::Index>(m)) = training_patches.col(idx[m]);
                Z.col(static_cast<Eigen::Index>(m)) = sc.codes.col(idx[m]);
            }
            tu.omegas[k] = transform_update(Y, Z, lambda);
        }

        // full objective after the transform update, with codes refit; the
        // refit doubles as the next alternation's clustering step
        sc = cluster_and_code(training_patches, tu);
        double obj = sc.total;
        for (int k = 0; k < opt.clusters; ++k)
            obj += lambda * (tu.omegas[k].squaredNorm() - log_abs_det(tu.omegas[k]));
        res.objective_trace.push_back(obj);
    }
    res.tu = std::move(tu);
    return res;
}

std::pair<double, SparseCodeResult> ultra_regularizer_value(const Image& img,
                                                            const TransformUnion& tu,
                                                            const PatchConfig& cfg) {
    Eigen::MatrixXd patches = extract_patches(img, cfg);
    SparseCodeResult sc = cluster_and_code(patches, tu);
    return {sc.total, std::move(sc)};
}

void save_transform_union(const TransformUnion& tu, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f.write("ULTR", 4);
    const std::uint32_t version = 1;
    const std::uint32_t K = static_cast<std::uint32_t>(tu.clusters());
    const std::uint32_t l = static_cast<std::uint32_t>(tu.dim());
    f.write(reinterpret_cast<const char*>(&version), 4);
    f.write(reinterpret_cast<const char*>(&K), 4);
    f.write(reinterpret_cast<const char*>(&l), 4);
    f.write(reinterpret_cast<const char*>(&tu.gamma), 8);
    std::vector<double> row(l);
    for (const auto& om : tu.omegas)
        for (std::uint32_t r = 0; r < l; ++r) {
            for (std::uint32_t c = 0; c < l; ++c) row[c] = om(r, c);
            f.write(reinterpret_cast<const char*>(row.data()), 8 * l);
        }
    if (!f) throw std::runtime_error("write failed: " + path);
}

TransformUnion load_transform_union(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::string(magic, 4) != "ULTR")
        throw std::runtime_error("not a transform union file: " + path);
    std::uint32_t version = 0, K = 0, l = 0;
    f.read(reinterpret_cast<char*>(&version), 4);
    f.read(reinterpret_cast<char*>(&K), 4);
    f.read(reinterpret_cast<char*>(&l), 4);
    TransformUnion tu;
    f.read(reinterpret_cast<char*>(&tu.gamma), 8);
    if (!f || version != 1 || K == 0 || l == 0)
        throw std::runtime_error("bad transform union header: " + path);
    std::vector<double> row(l);
    for (std::uint32_t k = 0; k < K; ++k) {
        Eigen::MatrixXd om(l, l);
        for (std::uint32_t r = 0; r < l; ++r) {
            f.read(reinterpret_cast<char*>(row.data()), 8 * l);
            for (std::uint32_t c = 0; c < l; ++c) om(r, c) = row[c];
        }
        tu.omegas.push_back(std::move(om));
    }
    if (!f) throw std::runtime_error("truncated transform union file: " + path);
    return tu;
}

}  // namespace superct
