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


// Slow, obviously-correct reference implementations and frozen constants
// used to check the library. Nothing here calls into spkfuse numerics.

#ifndef SPKFUSE_TESTS_ORACLES_H_
#define SPKFUSE_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using MatrixD =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Values computed offline with mpmath at 50 digits.
// 0.54 - 0.46 cos(2 pi 125 / 251)
inline constexpr double kHamming251At125 = 0.999963969153222;
// 2595 log10(1 + 700 / 700)
inline constexpr double kMelOf700Hz = 781.1728387480312;
// 2 * 0.25 - 2 * 0.05 at m = 0, times the window center
inline constexpr double kCenterTapF005F025 = 0.399985587661289;

// |X[k]|, k = 0..n_fft/2, by the defining sum.
inline std::vector<double> NaiveDftMagnitude(const std::vector<double>& x,
                                             int n_fft) {
  std::vector<double> out(n_fft / 2 + 1);
  for (int k = 0; k <= n_fft / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (size_t n = 0; n < x.size() && n < static_cast<size_t>(n_fft); ++n) {
      const double ang = -2.0 * std::numbers::pi * k * double(n) / n_fft;
      acc += x[n] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = std::abs(acc);
  }
  return out;
}

// y[n] = sum_l x[l] g[n - l] over the fully overlapping range. For a kernel
// of length L centered at (L-1)/2, output index t corresponds to
// n = t + L - 1.
inline std::vector<double> NaiveValidConvolution(const std::vector<double>& x,
                                                 const std::vector<double>& g) {
  const size_t L = g.size();
  std::vector<double> y;
  for (size_t n = L - 1; n < x.size(); ++n) {
    double acc = 0.0;
    for (size_t l = n + 1 - L; l <= n; ++l) acc += x[l] * g[n - l];
    y.push_back(acc);
  }
  return y;
}

// Deep-learning "convolution" (cross-correlation) with stride:
// y[o][t] = b[o] + sum_c sum_k w[o][c*K + k] x[c][t*stride + k].
inline MatrixD NaiveConv1d(const MatrixD& x, const MatrixD& w,
                           const MatrixD& b, int width, int stride) {
  const long cin = x.rows(), cout = w.rows();
  const long t_out = (x.cols() - width) / stride + 1;
  MatrixD y(cout, t_out);
  for (long o = 0; o < cout; ++o) {
    for (long t = 0; t < t_out; ++t) {
      double acc = b(o, 0);
      for (long c = 0; c < cin; ++c) {
        for (int k = 0; k < width; ++k) {
          acc += w(o, c * width + k) * x(c, t * stride + k);
        }
      }
      y(o, t) = acc;
    }
  }
  return y;
}

inline MatrixD NaiveMatMul(const MatrixD& a, const MatrixD& b) {
  MatrixD c = MatrixD::Zero(a.rows(), b.cols());
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < b.cols(); ++j)
      for (long k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

struct Eer {
  double eer;
  double threshold;
};

// FAR(t) / FRR(t) by direct counting at every candidate threshold (minimum
// score, midpoints of adjacent distinct scores, just above the maximum),
// then linear interpolation between the two points bracketing the first
// FRR >= FAR.
inline Eer BruteForceEer(const std::vector<double>& same,
                         const std::vector<double>& diff) {
  std::set<double> distinct(same.begin(), same.end());
  distinct.insert(diff.begin(), diff.end());
  const std::vector<double> u(distinct.begin(), distinct.end());
  std::vector<double> th{u.front()};
  for (size_t i = 0; i + 1 < u.size(); ++i) th.push_back((u[i] + u[i + 1]) / 2);
  th.push_back(std::nextafter(u.back(), INFINITY));
  auto far = [&](double t) {
    double n = 0;
    for (double d : diff) n += d >= t;
    return n / diff.size();
  };
  auto frr = [&](double t) {
    double n = 0;
    for (double s : same) n += s < t;
    return n / same.size();
  };
  for (size_t i = 0; i < th.size(); ++i) {
    const double a = far(th[i]), r = frr(th[i]);
    if (a == r) return {a, th[i]};
    if (r > a) {
      const double a0 = far(th[i - 1]), r0 = frr(th[i - 1]);
      const double w = (a0 - r0) / ((a0 - r0) - (a - r));
      return {a0 + w * (a - a0), th[i - 1] + w * (th[i] - th[i - 1])};
    }
  }
  return {-1, 0};
}

// Triangular mel filter weight by the textbook definition.
inline double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

}  // namespace oracle

#endif  // SPKFUSE_TESTS_ORACLES_H_
