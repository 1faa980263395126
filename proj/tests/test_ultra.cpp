#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "superct/rng.hpp"
#include "superct/ultra.hpp"

using namespace superct;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
    Eigen::MatrixXd m(rows, cols);
    Prng rng(seed, 0);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.gaussian();
    return m;
}

TransformUnion random_union(int k, int l, double gamma, std::uint64_t seed) {
    TransformUnion tu;
    tu.gamma = gamma;
    for (int i = 0; i < k; ++i) {
        Eigen::MatrixXd m = random_matrix(l, l, seed + 100 * i);
        m += 0.5 * l * Eigen::MatrixXd::Identity(l, l);  // keep it nonsingular
        tu.omegas.push_back(m);
    }
    tu.validate();
    return tu;
}

// exhaustive minimum of ||Omega p - z||^2 + gamma^2 ||z||_0 over clusters and
// all 2^l supports
std::pair<int, double> brute_force(const Eigen::VectorXd& p, const TransformUnion& tu) {
    const int l = tu.dim();
    double best = 1e300;
    int best_k = -1;
    for (int k = 0; k < tu.clusters(); ++k) {
        const Eigen::VectorXd v = tu.omegas[k] * p;
        for (int mask = 0; mask < (1 << l); ++mask) {
            double cost = 0.0;
            for (int i = 0; i < l; ++i) {
                if (mask & (1 << i))
                    cost += tu.gamma * tu.gamma;  // z_i = v_i kept
                else
                    cost += v[i] * v[i];  // z_i = 0
            }
            if (cost < best) {
                best = cost;
                best_k = k;
            }
        }
    }
    return {best_k, best};
}

}  // namespace

TEST_CASE("hard threshold cases") {
    Eigen::VectorXd v(3);
    v << 25.0, -5.0, 19.0;
    const Eigen::VectorXd z = hard_threshold(v, 20.0);
    CHECK(z[0] == 25.0);
    CHECK(z[1] == 0.0);
    CHECK(z[2] == 0.0);

    Eigen::VectorXd tie(2);
    tie << 20.0, -20.0;  // |v| == gamma resolves to zero
    const Eigen::VectorXd zt = hard_threshold(tie, 20.0);
    CHECK(zt[0] == 0.0);
    CHECK(zt[1] == 0.0);

    const Eigen::VectorXd none = hard_threshold(v, 0.5);
    CHECK(none == v);
}

TEST_CASE("cluster_and_code matches exhaustive brute force") {
    Prng rng(77, 0);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int l = 2 + static_cast<int>(rng.uniform() * 5.0);   // 2..6
        const int k = 1 + static_cast<int>(rng.uniform() * 3.0);   // 1..3
        const double gamma = 0.3 + rng.uniform();
        const TransformUnion tu = random_union(k, l, gamma, 1000 + trial);
        const Eigen::MatrixXd patches = random_matrix(l, 5, 2000 + trial);
        const SparseCodeResult sc = cluster_and_code(patches, tu);
        REQUIRE(sc.codes.rows() == l);
        REQUIRE(sc.codes.cols() == 5);
        double total = 0.0;
        for (int j = 0; j < 5; ++j) {
            const auto [bk, bcost] = brute_force(patches.col(j), tu);
            CHECK(sc.cluster[j] == bk);
            CHECK(sc.contribution[j] == doctest::Approx(bcost).epsilon(1e-12));
            // the reported code must realize the reported cost
            const Eigen::VectorXd v = tu.omegas[sc.cluster[j]] * patches.col(j);
            double cost = 0.0;
            for (int i = 0; i < l; ++i) {
                const double z = sc.codes(i, j);
                cost += (v[i] - z) * (v[i] - z) + (z != 0.0 ? gamma * gamma : 0.0);
            }
            CHECK(cost == doctest::Approx(bcost).epsilon(1e-12));
            total += bcost;
            ++checked;
        }
        CHECK(sc.total == doctest::Approx(total).epsilon(1e-12));
    }
    CHECK(checked == 1000);
}

TEST_CASE("tie between identical transforms goes to the lowest index") {
    TransformUnion tu;
    tu.gamma = 1.0;
    tu.omegas = {Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(3, 3)};
    const Eigen::MatrixXd p = random_matrix(3, 7, 5);
    const SparseCodeResult sc = cluster_and_code(p, tu);
    for (int c : sc.cluster) CHECK(c == 0);
}

TEST_CASE("dct2 transform is orthonormal") {
    for (int side : {4, 8}) {
        const Eigen::MatrixXd d = dct2_transform(side);
        const int l = side * side;
        REQUIRE(d.rows() == l);
        CHECK((d.transpose() * d - Eigen::MatrixXd::Identity(l, l)).cwiseAbs().maxCoeff() <
              1e-12);
    }
}

TEST_CASE("transform learning decreases the objective monotonically") {
    // mixed-texture synthetic patches
    Eigen::MatrixXd patches(16, 600);
    Prng rng(9, 0);
    for (int j = 0; j < 600; ++j) {
        const double base = 50.0 * rng.gaussian();
        for (int i = 0; i < 16; ++i)
            patches(i, j) = base + (j % 2 ? 15.0 * rng.gaussian()
                                          : 30.0 * ((i / 4) % 2) + rng.gaussian());
    }
    TransformLearnOptions opt;
    opt.clusters = 3;
    opt.gamma = 10.0;
    opt.iterations = 15;
    opt.rng_seed = 4;
    const TransformLearnResult res = learn_transforms(patches, opt);
    REQUIRE(res.objective_trace.size() == 15);
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
        CHECK(res.objective_trace[i] <=
              res.objective_trace[i - 1] * (1.0 + 1e-9) + 1e-12);
    CHECK(res.tu.clusters() == 3);
    CHECK_NOTHROW(res.tu.validate());
}

TEST_CASE("learning is deterministic in the seed") {
    const Eigen::MatrixXd patches = random_matrix(16, 300, 21) * 10.0;
    TransformLearnOptions opt;
    opt.clusters = 2;
    opt.gamma = 5.0;
    opt.iterations = 5;
    opt.rng_seed = 8;
    const TransformLearnResult a = learn_transforms(patches, opt);
    const TransformLearnResult b = learn_transforms(patches, opt);
    REQUIRE(a.tu.clusters() == b.tu.clusters());
    for (int k = 0; k < a.tu.clusters(); ++k) CHECK(a.tu.omegas[k] == b.tu.omegas[k]);
}

TEST_CASE("patch column permutation leaves the objective unchanged") {
    const Eigen::MatrixXd patches = random_matrix(9, 200, 31) * 20.0;
    Eigen::MatrixXd shuffled = patches;
    Prng rng(6, 0);
    for (int j = 199; j > 0; --j) {
        const int i = static_cast<int>(rng.uniform() * (j + 1));
        shuffled.col(j).swap(shuffled.col(i));
    }
    TransformLearnOptions opt;
    opt.clusters = 2;
    opt.gamma = 8.0;
    opt.iterations = 6;
    opt.rng_seed = 12;
    const double a = learn_transforms(patches, opt).objective_trace.back();
    const double b = learn_transforms(shuffled, opt).objective_trace.back();
    CHECK(a == doctest::Approx(b).epsilon(1e-6));
}

TEST_CASE("regularizer value is coherent with cluster_and_code") {
    Image img(12, 12, 1.0);
    Prng rng(14, 0);
    for (double& v : img.data) v = 40.0 * rng.gaussian();
    PatchConfig cfg;
    cfg.patch_side = 4;
    cfg.stride = 2;
    const TransformUnion tu = random_union(2, 16, 10.0, 99);
    const auto [val, sc] = ultra_regularizer_value(img, tu, cfg);
    CHECK(val == doctest::Approx(sc.total).epsilon(1e-12));
    CHECK(val >= 0.0);
}

TEST_CASE("transform file round trip is bitwise") {
    const TransformUnion tu = random_union(3, 16, 17.5, 123);
    const std::string path =
        (std::filesystem::temp_directory_path() / "roundtrip.ultr").string();
    save_transform_union(tu, path);
    const TransformUnion back = load_transform_union(path);
    CHECK(back.gamma == tu.gamma);
    REQUIRE(back.clusters() == tu.clusters());
    for (int k = 0; k < tu.clusters(); ++k) CHECK(back.omegas[k] == tu.omegas[k]);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_transform_union(path), std::runtime_error);
}

TEST_CASE("validation rejects singular transforms") {
    TransformUnion tu;
    tu.omegas = {Eigen::MatrixXd::Zero(4, 4)};
    CHECK_THROWS_AS(tu.validate(), std::invalid_argument);
    tu.omegas = {Eigen::MatrixXd::Identity(4, 4), Eigen::MatrixXd::Identity(3, 3)};
    CHECK_THROWS_AS(tu.validate(), std::invalid_argument);
    tu.omegas.clear();
    CHECK_THROWS_AS(tu.validate(), std::invalid_argument);
}
