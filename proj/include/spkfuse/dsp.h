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


#ifndef SPKFUSE_DSP_H_
#define SPKFUSE_DSP_H_

#include <complex>
#include <filesystem>
#include <span>
#include <vector>

#include "spkfuse/audio_io.h"
#include "spkfuse/common.h"

namespace spkfuse {

// w[n] = 0.54 - 0.46 cos(2 pi n / L), n = 0..L-1.
std::vector<double> HammingWindow(int length);

// In-place iterative radix-2 transform; size must be a power of two.
void Fft(std::vector<std::complex<double>>* data);

bool IsPowerOfTwo(int n);

// |DFT| of `signal` zero-padded to n_fft, bins 0..n_fft/2.
std::vector<double> DftMagnitude(std::span<const double> signal, int n_fft);

double HzToMel(double hz);
double MelToHz(double mel);

enum class WindowKind { kHamming };

struct FrameSpec {
  int frame_length_samples = 400;
  int hop_samples = 160;
  int n_fft = 512;
  WindowKind window = WindowKind::kHamming;

  void Validate() const;
  // 1 + floor((num_samples - frame_length) / hop); throws if too short.
  int NumFrames(size_t num_samples) const;
};

// Triangular filters with n_mels + 2 edges equally spaced in mel between
// low_hz and high_hz; returns n_mels x (n_fft/2 + 1) weights.
Matrix<double> MelFilterbank(int n_mels, int n_fft, int sample_rate_hz,
                             double low_hz, double high_hz);
// Center frequency in Hz of each filter above.
std::vector<double> MelFilterCenters(int n_mels, double low_hz,
                                     double high_hz);

struct FeatureMatrix {
  Matrix<double> values;  // T x F
  FrameSpec frame_spec;

  int NumFrames() const { return static_cast<int>(values.rows()); }
  int Dim() const { return static_cast<int>(values.cols()); }
};

inline constexpr double kLogFloor = 1e-10;
inline constexpr double kNormFloor = 1e-8;

// Hamming window -> power spectrum -> mel filterbank (20 Hz .. Nyquist) ->
// natural log floored at 1e-10.
FeatureMatrix MelFilterbankFeatures(const WaveformBuffer& buffer,
                                    const FrameSpec& spec, int n_mels);

// Per-dimension utterance mean/variance normalization (population std,
// divisor floored at 1e-8). Requires T >= 2.
FeatureMatrix MeanVarianceNormalize(const FeatureMatrix& features);

// Debug serialization: text line "T F\n" then T*F little-endian float32.
void WriteFeatureMatrix(const FeatureMatrix& features,
                        const std::filesystem::path& path);
FeatureMatrix ReadFeatureMatrix(const std::filesystem::path& path);

}  // namespace spkfuse

#endif  // SPKFUSE_DSP_H_
