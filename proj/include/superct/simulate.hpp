#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "superct/core.hpp"

namespace superct {

struct NoiseModel {
    double incident_photons = 1e4;   // I0, photons per ray
    double gaussian_variance = 25.0; // detector units^2
    double epsilon = 1e-5;           // clamp before the log
    std::uint64_t rng_seed = 0;
    bool mean_only = false;          // debug: Poisson draw replaced by its mean
    double poisson_normal_threshold = 50.0;

    void validate() const;
};

struct EllipseSpec {
    double cx_mm = 0.0, cy_mm = 0.0;   // center, image-centered coordinates
    double ax_mm = 1.0, ay_mm = 1.0;   // semi-axes
    double angle_rad = 0.0;
    double value = 0.0;                // additive attenuation, mm^-1
};

struct RectSpec {
    double cx_mm = 0.0, cy_mm = 0.0;
    double w_mm = 1.0, h_mm = 1.0;
    double value = 0.0;
};

struct PhantomSpec {
    int rows = 64, cols = 64;
    double pixel_size_mm = 1.0;
    std::vector<EllipseSpec> ellipses;
    std::vector<RectSpec> rects;

    void validate() const;
};

// Pixel value = sum of the shapes covering the pixel center.
Image make_phantom(const PhantomSpec& spec);

// Modified Shepp-Logan scaled so the skull reaches 0.02 mm^-1.
PhantomSpec shepp_logan_spec(int n, double pixel_size_mm);

// Randomized soft-tissue-like family: body ellipse plus seeded inner
// structures. Deterministic in (seed, index).
PhantomSpec random_phantom_spec(int rows, int cols, double pixel_size_mm,
                                std::uint64_t seed, std::uint64_t index);

// y_i = -log(I0^-1 max(Poisson{I0 exp(-[Ax*]_i)} + N(0,sigma^2), eps)),
// w_i = yhat_i^2/(yhat_i + sigma^2) with yhat_i = I0 exp(-y_i).
std::pair<Sinogram, WeightGrid> simulate_sinogram(const Image& x_star,
                                                  const Geometry& geom,
                                                  const NoiseModel& nm);

// Weight for a single post-log measurement value.
double statistical_weight(double y, const NoiseModel& nm);

}  // namespace superct
