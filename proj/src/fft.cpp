#include "fracpile/fft.hpp"

#include <unsupported/Eigen/FFT>

namespace fracpile {
namespace {

// One plan cache per thread; Eigen::FFT instances are not shareable.
Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

// Apply a 1-d transform along every axis of the flat row-major array.
template <bool Forward>
void transform_all_axes(const LatticeSpec& spec, CField& data) {
  const int n = spec.n;
  const std::int64_t total = spec.sites();
  auto& fft = fft_engine();
  Eigen::VectorXcd line(n), out(n);
  std::int64_t stride = total / n;  // axis 0 first (slowest-varying)
  for (int axis = 0; axis < spec.d; ++axis) {
    const std::int64_t blocks = total / (stride * n);
    for (std::int64_t b = 0; b < blocks; ++b) {
      for (std::int64_t off = 0; off < stride; ++off) {
        const std::int64_t base = b * stride * n + off;
        for (int m = 0; m < n; ++m) line[m] = data[base + m * stride];
        if constexpr (Forward)
          fft.fwd(out, line);
        else
          fft.inv(out, line);
        for (int m = 0; m < n; ++m) data[base + m * stride] = out[m];
      }
    }
    stride /= n;
  }
}

}  // namespace

void dft_forward(const LatticeSpec& spec, CField& data) {
  if (data.size() != spec.sites()) throw std::invalid_argument("dft_forward: size mismatch");
  transform_all_axes<true>(spec, data);
}

void dft_inverse(const LatticeSpec& spec, CField& data) {
  if (data.size() != spec.sites()) throw std::invalid_argument("dft_inverse: size mismatch");
  transform_all_axes<false>(spec, data);
}

CField dft_forward(const LatticeSpec& spec, const Field& f) {
  CField data = f.cast<std::complex<double>>();
  dft_forward(spec, data);
  return data;
}

Field dft_inverse_real(const LatticeSpec& spec, const CField& data, double imag_tol) {
  CField work = data;
  dft_inverse(spec, work);
  double imag_res = work.imag().abs().maxCoeff();
  double scale = std::max(1.0, work.real().abs().maxCoeff());
  if (imag_res > imag_tol * scale)
    throw std::runtime_error("dft_inverse_real: imaginary residue above tolerance");
  return work.real();
}

Field circular_convolve(const LatticeSpec& spec, const Field& f, const Field& g) {
  CField F = dft_forward(spec, f);
  CField G = dft_forward(spec, g);
  CField prod = F * G;
  dft_inverse(spec, prod);
  return prod.real();
}

}  // namespace fracpile
