#pragma once

#include <complex>
#include <span>

namespace semibloch {

using cd = std::complex<double>;

namespace fft {

// Unnormalized DFTs on a d-dimensional cube of side n (row-major, first axis slowest).
// forward:  c_m = sum_j f_j exp(-2 pi i j.m / n)
// backward: f_j = sum_m c_m exp(+2 pi i j.m / n)
// Plans are created once per (dim, n, direction) with FFTW_ESTIMATE, so results
// are bit-reproducible across runs. Safe to call concurrently.
void forward(std::span<const cd> in, std::span<cd> out, int dim, int n);
void backward(std::span<const cd> in, std::span<cd> out, int dim, int n);

}  // namespace fft
}  // namespace semibloch
