#include "superct/tomo.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <utility>
#include <vector>

namespace superct {

void Geometry::validate() const {
    if (n_views < 1 || n_detectors < 1)
        throw std::invalid_argument("geometry: n_views and n_detectors must be >= 1");
    if (detector_pitch_mm <= 0.0 || pixel_size_mm <= 0.0)
        throw std::invalid_argument("geometry: lengths must be positive");
    if (image_rows < 1 || image_cols < 1)
        throw std::invalid_argument("geometry: image size must be positive");
    if (angular_range_rad <= 0.0)
        throw std::invalid_argument("geometry: angular range must be positive");
    if (beam == Beam::fan_arc) {
        if (source_to_center_mm <= 0.0 || source_to_detector_mm <= 0.0)
            throw std::invalid_argument("geometry: fan distances must be positive");
        if (source_to_center_mm >= source_to_detector_mm)
            throw std::invalid_argument(
                "geometry: fan requires source_to_center < source_to_detector");
    }
}

namespace {

struct Ray {
    double ox, oy;  // origin, mm, image-centered coordinates (+y up)
    double dx, dy;  // unit direction
};

// Detector index d maps to signed offset from the central channel.
inline double detector_offset(const Geometry& g, int d) {
    return (d - 0.5 * (g.n_detectors - 1)) * g.detector_pitch_mm;
}

inline Ray make_ray(const Geometry& g, int view, int det) {
    const double phi = g.view_angle(view);
    const double c = std::cos(phi), s = std::sin(phi);
    if (g.beam == Beam::parallel) {
        const double t = detector_offset(g, det);
        // ray passes through t*(-sin,cos) along (cos,sin)
        return Ray{-t * s, t * c, c, s};
    }
    // fan-arc: source on a circle of radius Dso, detector arc centered at the
    // source; detector pitch is arc length, so the per-channel fan angle is
    // pitch / Dsd.
    const double alpha = detector_offset(g, det) / g.source_to_detector_mm;
    const double sx = g.source_to_center_mm * c;
    const double sy = g.source_to_center_mm * s;
    // central ray points at the rotation center; rotate by the fan angle
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    const double dx = -c * ca - (-s) * sa;
    const double dy = -s * ca - c * sa;
    return Ray{sx, sy, dx, dy};
}

// Siddon-style traversal; emits (flat pixel index, intersection length in mm)
// for every pixel the ray crosses. Rays missing the grid emit nothing.
template <typename Emit>
void trace_ray(const Geometry& g, int view, int det, Emit&& emit) {
    const Ray r = make_ray(g, view, det);
    const int nx = g.image_cols, ny = g.image_rows;
    const double px = g.pixel_size_mm;
    const double x0 = -0.5 * nx * px;  // left edge
    const double ytop = 0.5 * ny * px; // top edge (row 0)

    // slab clipping
    double tmin = -std::numeric_limits<double>::infinity();
    double tmax = std::numeric_limits<double>::infinity();
    const double eps = 1e-12;
    if (std::abs(r.dx) < eps) {
        if (r.ox < x0 || r.ox > x0 + nx * px) return;
    } else {
        double t1 = (x0 - r.ox) / r.dx;
        double t2 = (x0 + nx * px - r.ox) / r.dx;
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
    }
    if (std::abs(r.dy) < eps) {
        if (r.oy > ytop || r.oy < ytop - ny * px) return;
    } else {
        double t1 = (ytop - r.oy) / r.dy;
        double t2 = (ytop - ny * px - r.oy) / r.dy;
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
    }
    if (tmax <= tmin) return;

    // entry cell from a point just inside
    const double tstart = tmin + 1e-10 * (tmax - tmin);
    double xs = r.ox + tstart * r.dx;
    double ys = r.oy + tstart * r.dy;
    int ix = static_cast<int>(std::floor((xs - x0) / px));
    int iy = static_cast<int>(std::floor((ytop - ys) / px));  // row index
    ix = std::clamp(ix, 0, nx - 1);
    iy = std::clamp(iy, 0, ny - 1);

    const int step_x = (r.dx > 0) ? 1 : -1;
    const int step_y = (r.dy > 0) ? -1 : 1;  // +dy moves toward smaller row
    const double inf = std::numeric_limits<double>::infinity();
    double t_next_x = inf, dt_x = inf;
    if (std::abs(r.dx) >= eps) {
        const double next_xb = x0 + (ix + (r.dx > 0 ? 1 : 0)) * px;
        t_next_x = (next_xb - r.ox) / r.dx;
        dt_x = px / std::abs(r.dx);
    }
    double t_next_y = inf, dt_y = inf;
    if (std::abs(r.dy) >= eps) {
        const double next_yb = ytop - (iy + (r.dy < 0 ? 1 : 0)) * px;
        t_next_y = (next_yb - r.oy) / r.dy;
        dt_y = px / std::abs(r.dy);
    }

    double t = tmin;
    while (t < tmax) {
        double t_exit = std::min({t_next_x, t_next_y, tmax});
        const double len = t_exit - t;
        if (len > 0.0) emit(iy * nx + ix, len);
        if (t_exit >= tmax) break;
        if (t_next_x <= t_next_y) {
            ix += step_x;
            t_next_x += dt_x;
            if (ix < 0 || ix >= nx) break;
        } else {
            iy += step_y;
            t_next_y += dt_y;
            if (iy < 0 || iy >= ny) break;
        }
        t = t_exit;
    }
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n < 2) return;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Ramp-filter one projection row sampled with spacing tau; in-place.
void ramp_filter_row(std::vector<double>& row, double tau, bool hann) {
    const std::size_t n = row.size();
    const std::size_t npad = next_pow2(2 * n);
    std::vector<std::complex<double>> buf(npad, {0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) buf[i] = row[i];
    fft(buf, false);
    for (std::size_t k = 0; k < npad; ++k) {
        const std::size_t kk = std::min(k, npad - k);  // symmetric frequency index
        const double freq = static_cast<double>(kk) / (static_cast<double>(npad) * tau);
        double h = freq;
        if (hann) {
            const double x = static_cast<double>(kk) / (0.5 * static_cast<double>(npad));
            h *= 0.5 * (1.0 + std::cos(M_PI * std::min(1.0, x)));
        }
        buf[k] *= h;
    }
    fft(buf, true);
    for (std::size_t i = 0; i < n; ++i) row[i] = buf[i].real();
}

}  // namespace

Sinogram forward_project(const Image& img, const Geometry& geom) {
    geom.validate();
    if (!geom.shape_matches(img))
        throw std::invalid_argument("forward_project: image shape does not match geometry");
    Sinogram out(geom.n_views, geom.n_detectors);
    const double* x = img.data.data();
#pragma omp parallel for schedule(static)
    for (int v = 0; v < geom.n_views; ++v) {
        for (int d = 0; d < geom.n_detectors; ++d) {
            double acc = 0.0;
            trace_ray(geom, v, d, [&](int p, double len) { acc += len * x[p]; });
            out.at(v, d) = acc;
        }
    }
    return out;
}

Image back_project(const Sinogram& sino, const Geometry& geom) {
    geom.validate();
    if (!geom.shape_matches(sino))
        throw std::invalid_argument("back_project: sinogram shape does not match geometry");
    Image out(geom.image_rows, geom.image_cols, geom.pixel_size_mm);
    double* x = out.data.data();
    for (int v = 0; v < geom.n_views; ++v) {
        for (int d = 0; d < geom.n_detectors; ++d) {
            const double s = sino.at(v, d);
            if (s == 0.0) continue;
            trace_ray(geom, v, d, [&](int p, double len) { x[p] += len * s; });
        }
    }
    return out;
}

Image sqs_diagonal(const Geometry& geom, const WeightGrid& weights) {
    geom.validate();
    if (!geom.shape_matches(weights))
        throw std::invalid_argument("sqs_diagonal: weight shape does not match geometry");
    for (double w : weights.data)
        if (w < 0.0) throw std::invalid_argument("sqs_diagonal: negative weight");
    Image ones(geom.image_rows, geom.image_cols, geom.pixel_size_mm, 1.0);
    Sinogram a1 = forward_project(ones, geom);
    for (std::size_t i = 0; i < a1.size(); ++i) a1.data[i] *= weights.data[i];
    return back_project(a1, geom);
}

Image fbp(const Sinogram& sino, const Geometry& geom, const FbpOptions& opt) {
    geom.validate();
    if (!geom.shape_matches(sino))
        throw std::invalid_argument("fbp: sinogram shape does not match geometry");
    if (geom.n_views < 2)
        throw std::invalid_argument("fbp: unsupported geometry, needs at least 2 views");

    const int nv = geom.n_views, nd = geom.n_detectors;
    const int nx = geom.image_cols, ny = geom.image_rows;
    const double px = geom.pixel_size_mm;
    const double dphi = geom.angular_range_rad / nv;
    Image out(ny, nx, px);

    if (geom.beam == Beam::parallel) {
        std::vector<std::vector<double>> filt(nv, std::vector<double>(nd));
        for (int v = 0; v < nv; ++v) {
            for (int d = 0; d < nd; ++d) filt[v][d] = sino.at(v, d);
            ramp_filter_row(filt[v], geom.detector_pitch_mm, opt.hann);
        }
#pragma omp parallel for schedule(static)
        for (int r = 0; r < ny; ++r) {
            for (int c = 0; c < nx; ++c) {
                const double x = (c + 0.5) * px - 0.5 * nx * px;
                const double y = 0.5 * ny * px - (r + 0.5) * px;
                double acc = 0.0;
                for (int v = 0; v < nv; ++v) {
                    const double phi = geom.view_angle(v);
                    const double t = -x * std::sin(phi) + y * std::cos(phi);
                    const double u = t / geom.detector_pitch_mm + 0.5 * (nd - 1);
                    const int i0 = static_cast<int>(std::floor(u));
                    if (i0 < 0 || i0 + 1 >= nd) continue;
                    const double f = u - i0;
                    acc += (1.0 - f) * filt[v][i0] + f * filt[v][i0 + 1];
                }
                out.at(r, c) = acc * dphi;
            }
        }
        return out;
    }

    // fan-arc: cosine pre-weighting, ramp in the fan-angle variable,
    // distance-weighted backprojection (Kak-Slaney equiangular form).
    const double dso = geom.source_to_center_mm;
    const double dgamma = geom.detector_pitch_mm / geom.source_to_detector_mm;
    std::vector<std::vector<double>> filt(nv, std::vector<double>(nd));
    for (int v = 0; v < nv; ++v) {
        for (int d = 0; d < nd; ++d) {
            const double gamma = (d - 0.5 * (nd - 1)) * dgamma;
            filt[v][d] = sino.at(v, d) * dso * std::cos(gamma);
        }
        ramp_filter_row(filt[v], dgamma, opt.hann);
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < ny; ++r) {
        for (int c = 0; c < nx; ++c) {
            const double x = (c + 0.5) * px - 0.5 * nx * px;
            const double y = 0.5 * ny * px - (r + 0.5) * px;
            double acc = 0.0;
            for (int v = 0; v < nv; ++v) {
                const double phi = geom.view_angle(v);
                const double sx = dso * std::cos(phi), sy = dso * std::sin(phi);
                const double rx = x - sx, ry = y - sy;
                const double l2 = rx * rx + ry * ry;
                // fan angle of the pixel: angle between source->pixel and
                // source->center directions, signed consistently with rays
                const double cx = -std::cos(phi), cy = -std::sin(phi);
                const double proj = rx * cx + ry * cy;
                const double cross = cx * ry - cy * rx;
                const double gamma = std::atan2(cross, proj);
                const double u = gamma / dgamma + 0.5 * (nd - 1);
                const int i0 = static_cast<int>(std::floor(u));
                if (i0 < 0 || i0 + 1 >= nd) continue;
                const double f = u - i0;
                acc += ((1.0 - f) * filt[v][i0] + f * filt[v][i0 + 1]) / l2;
            }
            out.at(r, c) = acc * dphi;
        }
    }
    return out;
}

Image to_hu(const Image& img) {
    Image out = img;
    for (double& v : out.data) v = v * kAttenToHuScale - 1000.0;
    return out;
}

Image from_hu(const Image& img) {
    Image out = img;
    for (double& v : out.data) v = (v + 1000.0) / kAttenToHuScale;
    return out;
}

}  // namespace superct
