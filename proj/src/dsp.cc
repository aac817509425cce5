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


#include "spkfuse/dsp.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

#include "spkfuse/binary_io.h"

namespace spkfuse {

std::vector<double> HammingWindow(int length) {
  if (length < 1) throw DomainError("window length must be >= 1");
  std::vector<double> w(length);
  for (int n = 0; n < length; ++n) {
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / length);
  }
  return w;
}

bool IsPowerOfTwo(int n) { return n > 0 && (n & (n - 1)) == 0; }

void Fft(std::vector<std::complex<double>>* data) {
  auto& a = *data;
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw DomainError("FFT size must be a power of two");
  }
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    const size_t half = len / 2;
    for (size_t i = 0; i < n; i += len) {
      for (size_t k = 0; k < half; ++k) {
        // Twiddles computed directly rather than by recurrence to keep the
        // error at the 1e-15 level for large n.
        const std::complex<double> w(std::cos(angle * k), std::sin(angle * k));
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

std::vector<double> DftMagnitude(std::span<const double> signal, int n_fft) {
  if (!IsPowerOfTwo(n_fft)) {
    throw DomainError("n_fft must be a power of two, got " +
                      std::to_string(n_fft));
  }
  if (signal.size() > static_cast<size_t>(n_fft)) {
    throw DomainError("signal longer than n_fft");
  }
  std::vector<std::complex<double>> buf(n_fft);
  std::copy(signal.begin(), signal.end(), buf.begin());
  Fft(&buf);
  std::vector<double> mag(n_fft / 2 + 1);
  for (size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(buf[k]);
  return mag;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

void FrameSpec::Validate() const {
  if (!(0 < hop_samples && hop_samples <= frame_length_samples &&
        frame_length_samples <= n_fft)) {
    throw DomainError("frame spec requires 0 < hop <= frame_length <= n_fft");
  }
  if (!IsPowerOfTwo(n_fft)) throw DomainError("n_fft must be a power of two");
}

int FrameSpec::NumFrames(size_t num_samples) const {
  if (num_samples < static_cast<size_t>(frame_length_samples)) {
    throw DomainError("signal of " + std::to_string(num_samples) +
                      " samples is shorter than one frame (" +
                      std::to_string(frame_length_samples) + ")");
  }
  return 1 + static_cast<int>((num_samples - frame_length_samples) /
                              hop_samples);
}

std::vector<double> MelFilterCenters(int n_mels, double low_hz,
                                     double high_hz) {
  const double lo = HzToMel(low_hz), hi = HzToMel(high_hz);
  std::vector<double> centers(n_mels);
  for (int m = 0; m < n_mels; ++m) {
    centers[m] = MelToHz(lo + (hi - lo) * (m + 1) / (n_mels + 1));
  }
  return centers;
}

Matrix<double> MelFilterbank(int n_mels, int n_fft, int sample_rate_hz,
                             double low_hz, double high_hz) {
  if (n_mels < 1) throw DomainError("n_mels must be >= 1");
  if (!(low_hz >= 0.0 && low_hz < high_hz)) {
    throw DomainError("mel range must satisfy 0 <= low < high");
  }
  const int n_bins = n_fft / 2 + 1;
  const double lo = HzToMel(low_hz), hi = HzToMel(high_hz);
  const double step = (hi - lo) / (n_mels + 1);
  Matrix<double> weights = Matrix<double>::Zero(n_mels, n_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double left = lo + step * m;
    const double center = left + step;
    const double right = center + step;
    for (int k = 0; k < n_bins; ++k) {
      const double mel =
          HzToMel(static_cast<double>(k) * sample_rate_hz / n_fft);
      if (mel > left && mel < right) {
        weights(m, k) = mel <= center ? (mel - left) / (center - left)
                                      : (right - mel) / (right - center);
      }
    }
  }
  return weights;
}

FeatureMatrix MelFilterbankFeatures(const WaveformBuffer& buffer,
                                    const FrameSpec& spec, int n_mels) {
  spec.Validate();
  if (n_mels < 1) throw DomainError("n_mels must be >= 1");
  const int frames = spec.NumFrames(buffer.samples.size());
  const Matrix<double> bank =
      MelFilterbank(n_mels, spec.n_fft, buffer.sample_rate_hz, 20.0,
                    0.5 * buffer.sample_rate_hz);
  const std::vector<double> window = HammingWindow(spec.frame_length_samples);
  const int n_bins = spec.n_fft / 2 + 1;

  FeatureMatrix out;
  out.frame_spec = spec;
  out.values.resize(frames, n_mels);
  std::vector<std::complex<double>> buf(spec.n_fft);
  Eigen::VectorXd power(n_bins);
  for (int t = 0; t < frames; ++t) {
    const size_t start = static_cast<size_t>(t) * spec.hop_samples;
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (int i = 0; i < spec.frame_length_samples; ++i) {
      buf[i] = buffer.samples[start + i] * window[i];
    }
    Fft(&buf);
    for (int k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
    const Eigen::VectorXd energies = bank * power;
    for (int m = 0; m < n_mels; ++m) {
      out.values(t, m) = std::log(std::max(energies[m], kLogFloor));
    }
  }
  return out;
}

FeatureMatrix MeanVarianceNormalize(const FeatureMatrix& features) {
  const auto& x = features.values;
  if (x.rows() < 2) {
    throw DomainError("mean/variance normalization needs at least 2 frames");
  }
  FeatureMatrix out = features;
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    const double mean = x.col(f).sum() / n;
    const double var = (x.col(f).array() - mean).square().sum() / n;
    const double scale = std::max(std::sqrt(var), kNormFloor);
    out.values.col(f) = (x.col(f).array() - mean) / scale;
  }
  return out;
}

void WriteFeatureMatrix(const FeatureMatrix& features,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << features.values.rows() << ' ' << features.values.cols() << '\n';
  WriteFloat32Block(out, features.values);
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureMatrix ReadFeatureMatrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  long rows = 0, cols = 0;
  if (std::sscanf(header.c_str(), "%ld %ld", &rows, &cols) != 2 || rows < 1 ||
      cols < 1) {
    throw FormatError(path.string() + ": bad feature header");
  }
  FeatureMatrix fm;
  fm.values.resize(rows, cols);
  ReadFloat32Block(in, &fm.values, path.string());
  return fm;
}

}  // namespace spkfuse
