#pragma once

#include "superct/core.hpp"

namespace superct {

// Matrix-free system operator A built from exact intersection-length ray
// tracing. forward_project and back_project use identical ray weights, so
// the pair is an exact adjoint in floating point.
Sinogram forward_project(const Image& img, const Geometry& geom);
Image back_project(const Sinogram& sino, const Geometry& geom);

// Diagonal SQS majorizer for the weighted data term: A^T W A 1.
Image sqs_diagonal(const Geometry& geom, const WeightGrid& weights);

struct FbpOptions {
    bool hann = true;  // Hann apodization on the ramp, cutoff at Nyquist
};

Image fbp(const Sinogram& sino, const Geometry& geom, const FbpOptions& opt = {});

}  // namespace superct
