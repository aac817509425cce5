// Copyright (c) 2026 The spkfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Learnable band-pass front end. Each filter is the difference of two
// low-pass sinc kernels with cutoffs (f1, f2) in normalized frequency
// (Hz / sample_rate), multiplied by a Hamming window:
//
//   g[m] = 2 f2 sinc(2 pi f2 m) - 2 f1 sinc(2 pi f1 m),  m = n - (L-1)/2
//
// The learnable quantities are unconstrained reals (raw_low, raw_band) that
// are mapped onto 0 <= f1 <= f2 <= 0.5 by ConstrainCutoffs.

#ifndef SPKFUSE_SINC_FILTERBANK_H_
#define SPKFUSE_SINC_FILTERBANK_H_

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "spkfuse/audio_io.h"
#include "spkfuse/common.h"
#include "spkfuse/dsp.h"

namespace spkfuse {

inline constexpr double kNyquist = 0.5;

template <typename Scalar>
struct Cutoffs {
  Scalar low;
  Scalar high;
};

// Partial derivatives of the constraint map. d(low)/d(raw_band) is always 0.
template <typename Scalar>
struct CutoffJacobian {
  Scalar dlow_draw_low;
  Scalar dhigh_draw_low;
  Scalar dhigh_draw_band;
};

namespace internal {

// Right derivative of |x|: sign(0) = +1, so a collapsed band can reopen.
template <typename Scalar>
Scalar Sign(Scalar x) {
  return x < 0 ? Scalar(-1) : Scalar(1);
}

template <typename Scalar>
void CheckFinite(Scalar raw_low, Scalar raw_band) {
  if (!std::isfinite(raw_low) || !std::isfinite(raw_band)) {
    throw DomainError("cutoff parameters must be finite");
  }
}

}  // namespace internal

// f1 = min(|raw_low|, 0.5)
// f2 = min(|raw_low| + |raw_band - raw_low|, 0.5)
template <typename Scalar>
Cutoffs<Scalar> ConstrainCutoffs(Scalar raw_low, Scalar raw_band) {
  internal::CheckFinite(raw_low, raw_band);
  const Scalar nyq = static_cast<Scalar>(kNyquist);
  const Scalar a = std::abs(raw_low);
  // |b - a| can overflow to inf for huge inputs; min() still yields 0.5.
  const Scalar high = std::min(a + std::abs(raw_band - raw_low), nyq);
  return {std::min(a, nyq), high};
}

// Subgradient of ConstrainCutoffs: sign(0) = +1, saturated clamps pass zero.
template <typename Scalar>
CutoffJacobian<Scalar> ConstrainCutoffsJacobian(Scalar raw_low,
                                                Scalar raw_band) {
  internal::CheckFinite(raw_low, raw_band);
  const Scalar nyq = static_cast<Scalar>(kNyquist);
  const Scalar a = std::abs(raw_low);
  const Scalar s_low = internal::Sign(raw_low);
  const Scalar s_band = internal::Sign(raw_band - raw_low);
  CutoffJacobian<Scalar> j{};
  j.dlow_draw_low = a < nyq ? s_low : Scalar(0);
  if (a + std::abs(raw_band - raw_low) < nyq) {
    j.dhigh_draw_low = s_low - s_band;
    j.dhigh_draw_band = s_band;
  } else {
    j.dhigh_draw_low = Scalar(0);
    j.dhigh_draw_band = Scalar(0);
  }
  return j;
}

// Symmetric window for odd-length kernels: the Hamming formula
// 0.54 - 0.46 cos(2 pi n / L) on n = 0..(L-1)/2, mirrored onto the right half.
template <typename Scalar>
RowVector<Scalar> SymmetricFilterWindow(int length) {
  if (length < 1 || length % 2 == 0) {
    throw DomainError("kernel length must be odd and positive");
  }
  const std::vector<double> w = HammingWindow(length);
  RowVector<Scalar> out(length);
  const int center = (length - 1) / 2;
  for (int n = 0; n <= center; ++n) {
    out[n] = static_cast<Scalar>(w[n]);
    out[length - 1 - n] = static_cast<Scalar>(w[n]);
  }
  return out;
}

// sin(x)/x with the removable singularity filled in.
template <typename Scalar>
Scalar Sinc(Scalar x) {
  return x == Scalar(0) ? Scalar(1) : std::sin(x) / x;
}

// Windowed band-pass kernel for 0 <= f1 <= f2 <= 0.5 and odd L.
template <typename Scalar>
RowVector<Scalar> BuildFilter(Scalar f1, Scalar f2, int length) {
  if (!(f1 >= 0 && f1 <= f2 && f2 <= static_cast<Scalar>(kNyquist))) {
    throw DomainError("filter cutoffs must satisfy 0 <= f1 <= f2 <= 0.5");
  }
  const RowVector<Scalar> window = SymmetricFilterWindow<Scalar>(length);
  const Scalar two_pi = static_cast<Scalar>(2.0 * std::numbers::pi);
  const int center = (length - 1) / 2;
  RowVector<Scalar> g(length);
  for (int n = 0; n < length; ++n) {
    const auto m = static_cast<Scalar>(n - center);
    g[n] = 2 * f2 * Sinc(two_pi * f2 * m) - 2 * f1 * Sinc(two_pi * f1 * m);
  }
  return g.cwiseProduct(window);
}

template <typename Scalar>
struct SincParams {
  RowVector<Scalar> raw_low;
  RowVector<Scalar> raw_band;
  int kernel_len = 251;

  int NumFilters() const { return static_cast<int>(raw_low.size()); }

  void Validate() const {
    if (raw_low.size() < 1 || raw_low.size() != raw_band.size()) {
      throw DomainError("sinc params need n_filters >= 1 of each kind");
    }
    if (kernel_len < 1 || kernel_len % 2 == 0) {
      throw DomainError("sinc kernel length must be odd");
    }
  }

  template <typename Other>
  SincParams<Other> Cast() const {
    return {raw_low.template cast<Other>(), raw_band.template cast<Other>(),
            kernel_len};
  }
};

// n_filters + 2 band edges equally spaced in mel between 30 Hz and
// sample_rate/2 - 100 Hz; filter i spans edges i .. i+2.
template <typename Scalar>
SincParams<Scalar> InitMelScale(int n_filters, int sample_rate_hz,
                                int kernel_len) {
  if (n_filters < 1) throw DomainError("n_filters must be >= 1");
  if (kernel_len < 1 || kernel_len % 2 == 0) {
    throw DomainError("kernel length must be odd");
  }
  const double lo_hz = 30.0;
  const double hi_hz = 0.5 * sample_rate_hz - 100.0;
  if (!(hi_hz > lo_hz)) {
    throw DomainError("sample rate too low for the mel initialization range");
  }
  const double lo = HzToMel(lo_hz), hi = HzToMel(hi_hz);
  std::vector<double> edges(n_filters + 2);
  for (int i = 0; i < n_filters + 2; ++i) {
    edges[i] = MelToHz(lo + (hi - lo) * i / (n_filters + 1)) / sample_rate_hz;
  }
  for (int i = 1; i < n_filters + 2; ++i) {
    if (!(edges[i] > edges[i - 1])) {
      throw DomainError("too many filters: band width collapses to zero");
    }
  }
  SincParams<Scalar> p;
  p.kernel_len = kernel_len;
  p.raw_low.resize(n_filters);
  p.raw_band.resize(n_filters);
  for (int i = 0; i < n_filters; ++i) {
    p.raw_low[i] = static_cast<Scalar>(edges[i]);
    p.raw_band[i] = static_cast<Scalar>(edges[i + 2]);
  }
  return p;
}

// Read-only Hankel view H(k, t) = x[t * stride + k] over a contiguous signal.
template <typename Scalar>
using HankelView =
    Eigen::Map<const Matrix<Scalar>, 0, Eigen::Stride<Eigen::Dynamic,
                                                      Eigen::Dynamic>>;

template <typename Scalar>
HankelView<Scalar> MakeHankel(const Scalar* data, Eigen::Index rows,
                              Eigen::Index cols, Eigen::Index stride = 1) {
  // Row-major map: outer stride steps rows (k), inner stride steps cols (t).
  return HankelView<Scalar>(
      data, rows, cols,
      Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(1, stride));
}

template <typename Scalar>
struct SincGradients {
  RowVector<Scalar> raw_low;
  RowVector<Scalar> raw_band;
  RowVector<Scalar> input;  // empty unless requested
};

template <typename Scalar>
class SincFilterBank {
 public:
  SincFilterBank() = default;
  explicit SincFilterBank(SincParams<Scalar> params)
      : params_(std::move(params)) {
    Materialize();
  }

  const SincParams<Scalar>& params() const { return params_; }
  void set_params(SincParams<Scalar> params) {
    params_ = std::move(params);
    Materialize();
  }

  int NumFilters() const { return params_.NumFilters(); }
  int KernelLength() const { return params_.kernel_len; }
  const RowVector<Scalar>& low() const { return low_; }
  const RowVector<Scalar>& high() const { return high_; }
  const Matrix<Scalar>& kernels() const { return kernels_; }

  // Recomputes cutoffs and kernels from the raw parameters.
  void Materialize() {
    params_.Validate();
    const int n = params_.NumFilters();
    low_.resize(n);
    high_.resize(n);
    kernels_.resize(n, params_.kernel_len);
    for (int i = 0; i < n; ++i) {
      const Cutoffs<Scalar> c =
          ConstrainCutoffs(params_.raw_low[i], params_.raw_band[i]);
      low_[i] = c.low;
      high_[i] = c.high;
      kernels_.row(i) = BuildFilter(c.low, c.high, params_.kernel_len);
    }
  }

  // Test hook: replaces the materialized kernels (e.g. with a unit impulse).
  void OverrideKernels(Matrix<Scalar> kernels) {
    if (kernels.rows() != NumFilters() || kernels.cols() != KernelLength()) {
      throw DomainError("override kernel shape mismatch");
    }
    kernels_ = std::move(kernels);
  }

  int OutputLength(Eigen::Index chunk_len) const {
    if (chunk_len < KernelLength()) {
      throw DomainError("chunk of " + std::to_string(chunk_len) +
                        " samples is shorter than the kernel (" +
                        std::to_string(KernelLength()) + ")");
    }
    return static_cast<int>(chunk_len - KernelLength() + 1);
  }

  // Valid cross-correlation: y[i, t] = sum_k h[i, k] x[t + k].
  Matrix<Scalar> Forward(const RowVector<Scalar>& chunk) const {
    const int t_out = OutputLength(chunk.size());
    return kernels_ * MakeHankel(chunk.data(), KernelLength(), t_out);
  }

  Matrix<Scalar> Forward(const WaveformBuffer& chunk) const {
    return Forward(ToRow(chunk));
  }

  SincGradients<Scalar> Backward(const RowVector<Scalar>& chunk,
                                 const Matrix<Scalar>& grad_out,
                                 bool need_input_grad = true) const {
    const int t_out = OutputLength(chunk.size());
    if (grad_out.rows() != NumFilters() || grad_out.cols() != t_out) {
      throw DomainError("output gradient shape mismatch");
    }
    const int len = KernelLength();
    const auto hankel = MakeHankel(chunk.data(), len, t_out);
    const Matrix<Scalar> grad_kernels = grad_out * hankel.transpose();

    SincGradients<Scalar> g;
    g.raw_low.setZero(NumFilters());
    g.raw_band.setZero(NumFilters());
    const RowVector<Scalar> window = SymmetricFilterWindow<Scalar>(len);
    const Scalar two_pi = static_cast<Scalar>(2.0 * std::numbers::pi);
    const int center = (len - 1) / 2;
    for (int i = 0; i < NumFilters(); ++i) {
      // dh/df2 = 2 cos(2 pi f2 m) w, dh/df1 = -2 cos(2 pi f1 m) w.
      Scalar d_low = 0, d_high = 0;
      for (int n = 0; n < len; ++n) {
        const auto m = static_cast<Scalar>(n - center);
        const Scalar gw = grad_kernels(i, n) * window[n];
        d_high += gw * 2 * std::cos(two_pi * high_[i] * m);
        d_low -= gw * 2 * std::cos(two_pi * low_[i] * m);
      }
      const CutoffJacobian<Scalar> j =
          ConstrainCutoffsJacobian(params_.raw_low[i], params_.raw_band[i]);
      g.raw_low[i] = d_low * j.dlow_draw_low + d_high * j.dhigh_draw_low;
      g.raw_band[i] = d_high * j.dhigh_draw_band;
    }
    if (need_input_grad) {
      // Adjoint of the correlation: scatter K^T * grad_out along diagonals.
      const Matrix<Scalar> cols = kernels_.transpose() * grad_out;
      g.input.setZero(chunk.size());
      for (int k = 0; k < len; ++k) {
        g.input.segment(k, t_out) += cols.row(k);
      }
    }
    return g;
  }

  SincGradients<Scalar> Backward(const WaveformBuffer& chunk,
                                 const Matrix<Scalar>& grad_out,
                                 bool need_input_grad = true) const {
    return Backward(ToRow(chunk), grad_out, need_input_grad);
  }

  // Magnitude response of each zero-padded kernel, n_filters x (n_fft/2+1).
  Matrix<double> FrequencyResponse(int n_fft) const {
    if (n_fft < KernelLength()) {
      throw DomainError("n_fft must be at least the kernel length");
    }
    Matrix<double> out(NumFilters(), n_fft / 2 + 1);
    std::vector<double> taps(KernelLength());
    for (int i = 0; i < NumFilters(); ++i) {
      for (int n = 0; n < KernelLength(); ++n) {
        taps[n] = static_cast<double>(kernels_(i, n));
      }
      const std::vector<double> mag = DftMagnitude(taps, n_fft);
      for (size_t k = 0; k < mag.size(); ++k) out(i, k) = mag[k];
    }
    return out;
  }

  static RowVector<Scalar> ToRow(const WaveformBuffer& chunk) {
    RowVector<Scalar> x(chunk.samples.size());
    for (size_t i = 0; i < chunk.samples.size(); ++i) {
      x[i] = static_cast<Scalar>(chunk.samples[i]);
    }
    return x;
  }

 private:
  SincParams<Scalar> params_;
  RowVector<Scalar> low_;
  RowVector<Scalar> high_;
  Matrix<Scalar> kernels_;
};

}  // namespace spkfuse

#endif  // SPKFUSE_SINC_FILTERBANK_H_
