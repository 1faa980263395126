#include "superct/simulate.hpp"

#include <cmath>

#include "superct/rng.hpp"
#include "superct/tomo.hpp"

namespace superct {

void NoiseModel::validate() const {
    if (incident_photons <= 0.0)
        throw std::invalid_argument("noise model: incident_photons must be > 0");
    if (gaussian_variance < 0.0)
        throw std::invalid_argument("noise model: gaussian_variance must be >= 0");
    if (epsilon <= 0.0 || epsilon > 1.0)
        throw std::invalid_argument("noise model: epsilon must be in (0, 1]");
}

void PhantomSpec::validate() const {
    if (rows < 1 || cols < 1 || pixel_size_mm <= 0.0)
        throw std::invalid_argument("phantom spec: invalid image size");
}

Image make_phantom(const PhantomSpec& spec) {
    spec.validate();
    Image img(spec.rows, spec.cols, spec.pixel_size_mm);
    const double px = spec.pixel_size_mm;
    for (int r = 0; r < spec.rows; ++r) {
        const double y = 0.5 * spec.rows * px - (r + 0.5) * px;
        for (int c = 0; c < spec.cols; ++c) {
            const double x = (c + 0.5) * px - 0.5 * spec.cols * px;
            double v = 0.0;
            for (const auto& e : spec.ellipses) {
                const double ca = std::cos(e.angle_rad), sa = std::sin(e.angle_rad);
                const double u = (x - e.cx_mm) * ca + (y - e.cy_mm) * sa;
                const double w = -(x - e.cx_mm) * sa + (y - e.cy_mm) * ca;
                const double q = (u / e.ax_mm) * (u / e.ax_mm) + (w / e.ay_mm) * (w / e.ay_mm);
                if (q <= 1.0) v += e.value;
            }
            for (const auto& rc : spec.rects) {
                if (std::abs(x - rc.cx_mm) <= 0.5 * rc.w_mm &&
                    std::abs(y - rc.cy_mm) <= 0.5 * rc.h_mm)
                    v += rc.value;
            }
            img.at(r, c) = v;
        }
    }
    for (double v : img.data)
        if (v < 0.0 || v > 0.1)
            throw std::invalid_argument("phantom spec: attenuation outside [0, 0.1] mm^-1");
    return img;
}

PhantomSpec shepp_logan_spec(int n, double pixel_size_mm) {
    // modified (Toft) Shepp-Logan, unit head; scaled to attenuation
    struct E { double v, ax, ay, cx, cy, deg; };
    static const E tab[] = {
        {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
        {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
        {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
        {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
        {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
        {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
        {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
        {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
        {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
        {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
    };
    PhantomSpec spec;
    spec.rows = n;
    spec.cols = n;
    spec.pixel_size_mm = pixel_size_mm;
    const double half = 0.5 * n * pixel_size_mm * 0.95;  // keep the head inside
    for (const auto& e : tab) {
        EllipseSpec es;
        es.value = e.v * kMuWater;
        es.ax_mm = e.ax * half;
        es.ay_mm = e.ay * half;
        es.cx_mm = e.cx * half;
        es.cy_mm = e.cy * half;
        es.angle_rad = e.deg * M_PI / 180.0;
        spec.ellipses.push_back(es);
    }
    return spec;
}

PhantomSpec random_phantom_spec(int rows, int cols, double pixel_size_mm,
                                std::uint64_t seed, std::uint64_t index) {
    Prng rng(seed, 0x7068616E74ULL + index);
    PhantomSpec spec;
    spec.rows = rows;
    spec.cols = cols;
    spec.pixel_size_mm = pixel_size_mm;
    const double half = 0.5 * std::min(rows, cols) * pixel_size_mm;

    EllipseSpec body;
    body.ax_mm = half * (0.78 + 0.1 * rng.uniform());
    body.ay_mm = half * (0.78 + 0.1 * rng.uniform());
    body.angle_rad = 0.3 * (rng.uniform() - 0.5);
    body.value = kMuWater * (0.95 + 0.1 * rng.uniform());
    spec.ellipses.push_back(body);

    const int n_inner = 3 + static_cast<int>(rng.uniform() * 5.0);
    for (int i = 0; i < n_inner; ++i) {
        EllipseSpec e;
        e.ax_mm = half * (0.06 + 0.18 * rng.uniform());
        e.ay_mm = half * (0.06 + 0.18 * rng.uniform());
        // keep inner structures strictly inside the body ellipse
        const double rad = rng.uniform() * (0.74 * half - std::max(e.ax_mm, e.ay_mm));
        const double th = 2.0 * M_PI * rng.uniform();
        e.cx_mm = rad * std::cos(th);
        e.cy_mm = rad * std::sin(th);
        e.angle_rad = M_PI * rng.uniform();
        // +/- 10% of water, soft-tissue-like contrast
        e.value = kMuWater * 0.2 * (rng.uniform() - 0.5);
        spec.ellipses.push_back(e);
    }
    if (rng.uniform() < 0.5) {
        RectSpec rc;
        rc.w_mm = half * (0.08 + 0.2 * rng.uniform());
        rc.h_mm = half * (0.08 + 0.2 * rng.uniform());
        rc.cx_mm = 0.4 * half * (rng.uniform() - 0.5);
        rc.cy_mm = 0.4 * half * (rng.uniform() - 0.5);
        rc.value = kMuWater * 0.12 * rng.uniform();
        spec.rects.push_back(rc);
    }
    return spec;
}

double statistical_weight(double y, const NoiseModel& nm) {
    const double yhat = nm.incident_photons * std::exp(-y);
    return yhat * yhat / (yhat + nm.gaussian_variance);
}

std::pair<Sinogram, WeightGrid> simulate_sinogram(const Image& x_star,
                                                  const Geometry& geom,
                                                  const NoiseModel& nm) {
    nm.validate();
    for (double v : x_star.data)
        if (v < 0.0) throw std::invalid_argument("simulate_sinogram: image must be nonnegative");
    Sinogram line = forward_project(x_star, geom);
    Sinogram y(geom.n_views, geom.n_detectors);
    WeightGrid w(geom.n_views, geom.n_detectors);
    const double i0 = nm.incident_photons;
    const double sigma = std::sqrt(nm.gaussian_variance);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(line.size()); ++i) {
        const double mean = i0 * std::exp(-line.data[i]);
        double counts;
        if (nm.mean_only) {
            counts = mean;
        } else {
            Prng rng(nm.rng_seed, static_cast<std::uint64_t>(i));
            counts = static_cast<double>(rng.poisson(mean, nm.poisson_normal_threshold));
            if (sigma > 0.0) counts += sigma * rng.gaussian();
        }
        const double clamped = std::max(counts, nm.epsilon);
        y.data[i] = -std::log(clamped / i0);
        w.data[i] = statistical_weight(y.data[i], nm);
    }
    return {std::move(y), std::move(w)};
}

}  // namespace superct
