#include <doctest.h>

#include <cmath>

#include "superct/rng.hpp"
#include "superct/simulate.hpp"
#include "superct/tomo.hpp"

using namespace superct;

namespace {

Geometry parallel_geometry(int n_views, int n_det, int n_img, double pitch = 1.0,
                           double px = 1.0) {
    Geometry g;
    g.beam = Beam::parallel;
    g.n_views = n_views;
    g.n_detectors = n_det;
    g.detector_pitch_mm = pitch;
    g.angular_range_rad = M_PI;
    g.image_rows = g.image_cols = n_img;
    g.pixel_size_mm = px;
    return g;
}

Geometry fan_geometry(int n_views, int n_det, int n_img) {
    Geometry g = parallel_geometry(n_views, n_det, n_img);
    g.beam = Beam::fan_arc;
    g.angular_range_rad = 2.0 * M_PI;
    g.source_to_center_mm = 200.0;
    g.source_to_detector_mm = 400.0;
    // arc pitch chosen so the fan covers the image comfortably
    g.detector_pitch_mm = 2.0 * 400.0 * std::asin(0.5 * n_img / 200.0) / n_det;
    return g;
}

Image disc_image(int n, double px, double radius_mm, double value) {
    Image img(n, n, px);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const double x = (c + 0.5) * px - 0.5 * n * px;
            const double y = 0.5 * n * px - (r + 0.5) * px;
            if (x * x + y * y <= radius_mm * radius_mm) img.at(r, c) = value;
        }
    return img;
}

Image random_image(const Geometry& g, std::uint64_t seed) {
    Image img(g.image_rows, g.image_cols, g.pixel_size_mm);
    Prng rng(seed, 0);
    for (double& v : img.data) v = rng.gaussian();
    return img;
}

Sinogram random_sinogram(const Geometry& g, std::uint64_t seed) {
    Sinogram s(g.n_views, g.n_detectors);
    Prng rng(seed, 1);
    for (double& v : s.data) v = rng.gaussian();
    return s;
}

}  // namespace

TEST_CASE("parallel projection of a disc matches the chord length") {
    const int n = 128;
    const double px = 0.5, radius = 20.0, value = 0.01;
    const Geometry g = parallel_geometry(12, 128, n, 0.5, px);
    const Image disc = disc_image(n, px, radius, value);
    const Sinogram sino = forward_project(disc, g);
    for (int v = 0; v < g.n_views; ++v)
        for (int d = 0; d < g.n_detectors; ++d) {
            const double s = (d - 0.5 * (g.n_detectors - 1)) * g.detector_pitch_mm;
            if (std::abs(s) > radius - 2.0) continue;  // skip the grazing rays
            const double chord = 2.0 * std::sqrt(radius * radius - s * s) * value;
            CHECK(sino.at(v, d) == doctest::Approx(chord).epsilon(0.05));
        }
}

TEST_CASE("ray lengths sum to the traversal length") {
    // a horizontal ray through a uniform unit image integrates to width * value
    const int n = 32;
    const Geometry g = parallel_geometry(1, 8, n);  // view 0: rays along +x
    Image ones(n, n, 1.0, 1.0);
    const Sinogram sino = forward_project(ones, g);
    for (int d = 0; d < g.n_detectors; ++d)
        CHECK(sino.at(0, d) == doctest::Approx(n * g.pixel_size_mm).epsilon(1e-12));
}

TEST_CASE("forward/back projection adjoint identity") {
    for (const bool fan : {false, true}) {
        const Geometry g = fan ? fan_geometry(48, 48, 32) : parallel_geometry(48, 48, 32);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const Image x = random_image(g, seed);
            const Sinogram y = random_sinogram(g, seed);
            const Sinogram ax = forward_project(x, g);
            const Image aty = back_project(y, g);
            const double lhs = dot(ax.data, y.data);
            const double rhs = dot(x.data, aty.data);
            const double scale = std::max({std::abs(lhs), std::abs(rhs), 1.0});
            CHECK(std::abs(lhs - rhs) / scale < 1e-10);
        }
    }
}

TEST_CASE("centered disc projections are rotation invariant") {
    const Geometry g = parallel_geometry(24, 64, 64);
    const Sinogram sino = forward_project(disc_image(64, 1.0, 20.0, 1.0), g);
    for (int d = 0; d < g.n_detectors; ++d) {
        double lo = 1e300, hi = -1e300;
        for (int v = 0; v < g.n_views; ++v) {
            lo = std::min(lo, sino.at(v, d));
            hi = std::max(hi, sino.at(v, d));
        }
        CHECK(hi - lo < 2.5 * g.pixel_size_mm);  // pixelization jitter only
    }
}

TEST_CASE("sqs_diagonal equals dense A^T W A 1") {
    const Geometry g = parallel_geometry(10, 12, 8);
    const int np = g.image_rows * g.image_cols;
    const int nr = g.n_views * g.n_detectors;
    WeightGrid w(g.n_views, g.n_detectors);
    Prng rng(3, 0);
    for (double& v : w.data) v = rng.uniform() + 0.5;

    // dense system matrix, one unit image per column
    std::vector<std::vector<double>> a(nr, std::vector<double>(np, 0.0));
    for (int j = 0; j < np; ++j) {
        Image e(g.image_rows, g.image_cols, g.pixel_size_mm);
        e.data[j] = 1.0;
        const Sinogram col = forward_project(e, g);
        for (int i = 0; i < nr; ++i) a[i][j] = col.data[i];
    }
    const Image diag = sqs_diagonal(g, w);
    for (int j = 0; j < np; ++j) {
        double want = 0.0;
        for (int i = 0; i < nr; ++i) {
            double a1 = 0.0;
            for (int k = 0; k < np; ++k) a1 += a[i][k];
            want += a[i][j] * w.data[i] * a1;
        }
        CHECK(diag.data[j] == doctest::Approx(want).epsilon(1e-11));
    }

    w.data[0] = -1.0;
    CHECK_THROWS_AS(sqs_diagonal(g, w), std::invalid_argument);
}

TEST_CASE("fbp recovers a noiseless Shepp-Logan phantom") {
    const int n = 64;
    // detectors at half the pixel pitch so the skull edge is resolved
    Geometry g = parallel_geometry(180, 192, n, 0.5);
    const Image phantom = make_phantom(shepp_logan_spec(n, 1.0));
    const Sinogram sino = forward_project(phantom, g);
    const Image recon = fbp(sino, g, FbpOptions{/*hann=*/false});
    double lo = 1e300, hi = -1e300;
    for (double v : phantom.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double err2 = 0.0;
    for (std::size_t i = 0; i < recon.size(); ++i) {
        const double d = recon.data[i] - phantom.data[i];
        err2 += d * d;
    }
    const double rmse = std::sqrt(err2 / static_cast<double>(recon.size()));
    CHECK(rmse < 0.05 * (hi - lo));
}

TEST_CASE("fan-arc fbp recovers a centered disc") {
    const int n = 64;
    const Geometry g = fan_geometry(256, 128, n);
    const Image disc = disc_image(n, 1.0, 20.0, 0.02);
    const Image recon = fbp(forward_project(disc, g), g);
    // interior of the disc, away from the edge
    for (int r = 24; r < 40; ++r)
        for (int c = 24; c < 40; ++c)
            CHECK(recon.at(r, c) == doctest::Approx(0.02).epsilon(0.15));
    CHECK(recon.at(2, 2) == doctest::Approx(0.0).epsilon(1.0).scale(0.002));
}

TEST_CASE("fbp is linear") {
    const Geometry g = parallel_geometry(32, 48, 32);
    const Sinogram a = random_sinogram(g, 7);
    const Sinogram b = random_sinogram(g, 8);
    Sinogram sum = a;
    for (std::size_t i = 0; i < sum.size(); ++i) sum.data[i] += b.data[i];
    const Image fa = fbp(a, g), fb = fbp(b, g), fs = fbp(sum, g);
    for (std::size_t i = 0; i < fs.size(); ++i)
        CHECK(fs.data[i] == doctest::Approx(fa.data[i] + fb.data[i]).epsilon(1e-9));
}

TEST_CASE("shape and geometry errors") {
    const Geometry g = parallel_geometry(8, 8, 16);
    Image wrong(8, 8, 1.0);
    CHECK_THROWS_AS(forward_project(wrong, g), std::invalid_argument);
    Sinogram s(4, 4);
    CHECK_THROWS_AS(back_project(s, g), std::invalid_argument);
    CHECK_THROWS_AS(fbp(s, g), std::invalid_argument);

    Geometry one_view = parallel_geometry(1, 8, 16);
    Sinogram sv(1, 8);
    CHECK_THROWS_AS(fbp(sv, one_view), std::invalid_argument);

    Geometry bad = g;
    bad.pixel_size_mm = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    Geometry fan = fan_geometry(8, 8, 16);
    fan.source_to_center_mm = fan.source_to_detector_mm + 1.0;
    CHECK_THROWS_AS(fan.validate(), std::invalid_argument);
}

TEST_CASE("hu conversions are inverse maps") {
    Image img(4, 4, 1.0);
    Prng rng(9, 0);
    for (double& v : img.data) v = 0.05 * rng.uniform();
    const Image back = from_hu(to_hu(img));
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-12));
    CHECK(to_hu(Image(2, 2, 1.0, kMuWater)).data[0] == doctest::Approx(0.0));
    CHECK(to_hu(Image(2, 2, 1.0, 0.0)).data[0] == doctest::Approx(-1000.0));
}
