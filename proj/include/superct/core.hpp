#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace superct {

// Water attenuation reference used for the HU scale, mm^-1.
constexpr double kMuWater = 0.02;
// mu [mm^-1] -> HU+1000 (air at 0, water at 1000).
constexpr double kAttenToHuScale = 1000.0 / kMuWater;

struct Image {
    int rows = 0;
    int cols = 0;
    double pixel_size_mm = 1.0;
    std::vector<double> data;

    Image() = default;
    Image(int r, int c, double px_mm, double fill = 0.0)
        : rows(r), cols(c), pixel_size_mm(px_mm),
          data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const { return rows == o.rows && cols == o.cols; }
};

struct Sinogram {
    int n_views = 0;
    int n_detectors = 0;
    std::vector<double> data;

    Sinogram() = default;
    Sinogram(int v, int d, double fill = 0.0)
        : n_views(v), n_detectors(d),
          data(static_cast<std::size_t>(v) * static_cast<std::size_t>(d), fill) {}

    double& at(int v, int d) { return data[static_cast<std::size_t>(v) * n_detectors + d]; }
    double at(int v, int d) const { return data[static_cast<std::size_t>(v) * n_detectors + d]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Sinogram& o) const {
        return n_views == o.n_views && n_detectors == o.n_detectors;
    }
};

// Per-ray statistical weights share the sinogram layout.
using WeightGrid = Sinogram;

enum class Beam { parallel, fan_arc };

struct Geometry {
    Beam beam = Beam::parallel;
    int n_views = 0;
    int n_detectors = 0;
    double detector_pitch_mm = 1.0;     // fan-arc: arc length at the detector
    double source_to_detector_mm = 0.0; // fan-arc only
    double source_to_center_mm = 0.0;   // fan-arc only
    double angular_range_rad = 0.0;
    int image_rows = 0;
    int image_cols = 0;
    double pixel_size_mm = 1.0;

    // Regularly spaced views over [0, angular_range).
    double view_angle(int v) const { return angular_range_rad * v / n_views; }

    void validate() const;
    bool shape_matches(const Image& img) const {
        return img.rows == image_rows && img.cols == image_cols;
    }
    bool shape_matches(const Sinogram& s) const {
        return s.n_views == n_views && s.n_detectors == n_detectors;
    }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const std::vector<double>& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

Image to_hu(const Image& img);
Image from_hu(const Image& img);

}  // namespace superct
