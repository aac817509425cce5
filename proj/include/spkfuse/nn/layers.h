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


// Reverse-mode layers. Each layer caches what its backward pass needs during
// Forward(); Backward() accumulates parameter gradients into Parameter::grad
// and returns the gradient with respect to the layer input.
//
// Shape conventions: frame sequences are T x F (one frame per row); channel
// maps produced by the convolutional stack are C x T (one channel per row).

#ifndef SPKFUSE_NN_LAYERS_H_
#define SPKFUSE_NN_LAYERS_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "spkfuse/common.h"
#include "spkfuse/rng.h"
#include "spkfuse/sinc_filterbank.h"

namespace spkfuse {
namespace nn {

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)),
        value(Matrix<Scalar>::Zero(rows, cols)),
        grad(Matrix<Scalar>::Zero(rows, cols)) {}

  void ZeroGrad() { grad.setZero(value.rows(), value.cols()); }
};

struct Shape {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool operator==(const Shape&) const = default;
};

enum class LayerKind {
  kDense,
  kConv1d,
  kTdnnSplice,
  kStatsPool,
  kLeakyRelu,
  kRelu,
  kLayerNorm,
  kMaxPool,
  kFlatten,
  kSincConv,
};

const char* LayerKindName(LayerKind kind);

// Discrete branch decisions taken during the last forward pass (ReLU signs,
// max-pool winners, constraint-map branches). Gradient checking treats a
// change in this signature under perturbation as a kink crossing.
using KinkSignature = std::vector<int8_t>;

template <typename Scalar>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const { return name_; }
  virtual LayerKind kind() const = 0;

  virtual Matrix<Scalar> Forward(const Matrix<Scalar>& input) = 0;
  virtual Matrix<Scalar> Backward(const Matrix<Scalar>& grad_output,
                                  bool need_input_grad) = 0;
  // Throws DomainError if the layer cannot accept `input`.
  virtual Shape OutputShape(Shape input) const = 0;

  virtual std::vector<Parameter<Scalar>*> Params() { return {}; }
  virtual void AppendKinks(KinkSignature*) const {}

 protected:
  void CheckShape(const Matrix<Scalar>& m, Shape expected,
                  const char* what) const {
    if (m.rows() != expected.rows || m.cols() != expected.cols) {
      throw DomainError(name_ + ": " + what + " shape " +
                        std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + ", expected " +
                        std::to_string(expected.rows) + "x" +
                        std::to_string(expected.cols));
    }
  }

 private:
  std::string name_;
};

// Fills `m` with U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
template <typename Scalar>
void GlorotUniform(Matrix<Scalar>* m, Eigen::Index fan_in,
                   Eigen::Index fan_out, Rng* rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index i = 0; i < m->size(); ++i) {
    m->data()[i] = static_cast<Scalar>(rng->Uniform(-a, a));
  }
}

// y = x W + b for every row of x.
template <typename Scalar>
class Dense final : public Layer<Scalar> {
 public:
  Dense(std::string name, Eigen::Index in_dim, Eigen::Index out_dim)
      : Layer<Scalar>(name),
        weight_(name + ".weight", in_dim, out_dim),
        bias_(name + ".bias", 1, out_dim) {}

  LayerKind kind() const override { return LayerKind::kDense; }
  Eigen::Index InDim() const { return weight_.value.rows(); }
  Eigen::Index OutDim() const { return weight_.value.cols(); }
  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }

  void Init(Rng* rng) {
    GlorotUniform(&weight_.value, InDim(), OutDim(), rng);
    bias_.value.setZero();
  }

  Shape OutputShape(Shape in) const override {
    if (in.cols != InDim() || in.rows < 1) {
      throw DomainError(this->name() + ": input width " +
                        std::to_string(in.cols) + ", expected " +
                        std::to_string(InDim()));
    }
    return {in.rows, OutDim()};
  }

  Matrix<Scalar> Forward(const Matrix<Scalar>& x) override {
    OutputShape({x.rows(), x.cols()});
    input_ = x;
    Matrix<Scalar> y = x * weight_.value;
    y.rowwise() += bias_.value.row(0);
    return y;
  }

  Matrix<Scalar> Backward(const Matrix<Scalar>& gy,
                          bool need_input_grad) override {
    this->CheckShape(gy, {input_.rows(), OutDim()}, "gradient");
    weight_.grad.noalias() += input_.transpose() * gy;
    bias_.grad.row(0) += gy.colwise().sum();
    if (!need_input_grad) return {};
    return gy * weight_.value.transpose();
  }

  std::vector<Parameter<Scalar>*> Params() override {
    return {&weight_, &bias_};
  }

 private:
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
  Matrix<Scalar> input_;
};

// Valid 1-D cross-correlation over C_in x T maps, C_out x (C_in*K) weights
// laid out channel-major, plus per-output-channel bias.
template <typename Scalar>
class Conv1d final : public Layer<Scalar> {
 public:
  Conv1d(std::string name, int in_channels, int out_channels, int width,
         int stride = 1)
      : Layer<Scalar>(name),
        in_channels_(in_channels),
        width_(width),
        stride_(stride),
        weight_(name + ".weight", out_channels,
                static_cast<Eigen::Index>(in_channels) * width),
        bias_(name + ".bias", out_channels, 1) {
    if (in_channels < 1 || out_channels < 1 || width < 1 || stride < 1) {
      throw DomainError(name + ": conv dims must be positive");
    }
  }

  LayerKind kind() const override { return LayerKind::kConv1d; }
  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }
  int OutChannels() const { return static_cast<int>(weight_.value.rows()); }

  void Init(Rng* rng) {
    GlorotUniform(&weight_.value, in_channels_ * width_,
                  OutChannels() * width_, rng);
    bias_.value.setZero();
  }

  Shape OutputShape(Shape in) const override {
    if (in.rows != in_channels_) {
      throw DomainError(this->name() + ": expected " +
                        std::to_string(in_channels_) + " input channels, got " +
                        std::to_string(in.rows));
    }
    if (in.cols < width_) {
      throw DomainError(this->name() + ": input length " +
                        std::to_string(in.cols) + " shorter than kernel width " +
                        std::to_string(width_));
    }
    return {OutChannels(), (in.cols - width_) / stride_ + 1};
  }

  Matrix<Scalar> Forward(const Matrix<Scalar>& x) override {
    const Shape out = OutputShape({x.rows(), x.cols()});
    input_ = x;
    Matrix<Scalar> y(out.rows, out.cols);
    y.colwise() = bias_.value.col(0);
    for (int c = 0; c < in_channels_; ++c) {
      y.noalias() +=
          weight_.value.middleCols(static_cast<Eigen::Index>(c) * width_,
                                   width_) *
          MakeHankel(input_.row(c).data(), width_, out.cols, stride_);
    }
    return y;
  }

  Matrix<Scalar> Backward(const Matrix<Scalar>& gy,
                          bool need_input_grad) override {
    const Shape out = OutputShape({input_.rows(), input_.cols()});
    this->CheckShape(gy, out, "gradient");
    bias_.grad.col(0) += gy.rowwise().sum();
    Matrix<Scalar> gx;
    if (need_input_grad) gx.setZero(input_.rows(), input_.cols());
    for (int c = 0; c < in_channels_; ++c) {
      const auto hankel =
          MakeHankel(input_.row(c).data(), width_, out.cols, stride_);
      const Eigen::Index off = static_cast<Eigen::Index>(c) * width_;
      weight_.grad.middleCols(off, width_).noalias() +=
          gy * hankel.transpose();
      if (need_input_grad) {
        const Matrix<Scalar> cols =
            weight_.value.middleCols(off, width_).transpose() * gy;
        for (int k = 0; k < width_; ++k) {
          for (Eigen::Index t = 0; t < out.cols; ++t) {
            gx(c, t * stride_ + k) += cols(k, t);
          }
        }
      }
    }
    return gx;
  }

  std::vector<Parameter<Scalar>*> Params() override {
    return {&weight_, &bias_};
  }

 private:
  int in_channels_;
  int width_;
  int stride_;
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
  Matrix<Scalar> input_;
};

// Frame splicing over a T x F sequence. Output row t concatenates input rows
// t + (o - min_offset) for each offset o, so T' = T - (max - min).
template <typename Scalar>
class TdnnSplice final : public Layer<Scalar> {
 public:
  TdnnSplice(std::string name, std::vector<int> offsets)
      : Layer<Scalar>(name), offsets_(std::move(offsets)) {
    if (offsets_.empty() ||
        !std::is_sorted(offsets_.begin(), offsets_.end()) ||
        std::adjacent_find(offsets_.begin(), offsets_.end()) != offsets_.end()) {
      throw DomainError(this->name() +
                        ": offsets must be non-empty, sorted and unique");
    }
  }

  LayerKind kind() const override { return LayerKind::kTdnnSplice; }
  const std::vector<int>& offsets() const { return offsets_; }
  int Span() const { return offsets_.back() - offsets_.front(); }

  Shape OutputShape(Shape in) const override {
    if (in.rows <= Span()) {
      throw DomainError(this->name() + ": need more than " +
                        std::to_string(Span()) + " frames, got " +
                        std::to_string(in.rows));
    }
    return {in.rows - Span(),
            in.cols * static_cast<Eigen::Index>(offsets_.size())};
  }

  Matrix<Scalar> Forward(const Matrix<Scalar>& x) override {
    const Shape out = OutputShape({x.rows(), x.cols()});
    in_shape_ = {x.rows(), x.cols()};
    Matrix<Scalar> y(out.rows, out.cols);
    const Eigen::Index f = x.cols();
    for (size_t k = 0; k < offsets_.size(); ++k) {
      y.middleCols(static_cast<Eigen::Index>(k) * f, f) =
          x.middleRows(offsets_[k] - offsets_.front(), out.rows);
    }
    return y;
  }

  Matrix<Scalar> Backward(const Matrix<Scalar>& gy,
                          bool need_input_grad) override {
    this->CheckShape(gy, OutputShape(in_shape_), "gradient");
    if (!need_input_grad) return {};
    Matrix<Scalar> gx = Matrix<Scalar>::Zero(in_shape_.rows, in_shape_.cols);
    const Eigen::Index f = in_shape_.cols;
    for (size_t k = 0; k < offsets_.size(); ++k) {
      gx.middleRows(offsets_[k] - offsets_.front(), gy.rows()) +=
          gy.middleCols(static_cast<Eigen::Index>(k) * f, f);
    }
    return gx;
  }

 private:
  std::vector<int> offsets_;
  Shape in_shape_;
};

// Pairwise summation of an already ordered range.
template <typename Scalar>
Scalar PairwiseSum(const Scalar* v, size_t n) {
  if (n <= 8) {
    Scalar s = 0;
    for (size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const size_t half = n / 2;
  return PairwiseSum(v, half) + PairwiseSum(v + half, n - half);
}

// Sum that is bit-identical under any permutation of `values`: the values are
// sorted before pairwise reduction. `values` is used as scratch.
template <typename Scalar>
Scalar PermutationStableSum(std::vector<Scalar>* values) {
  std::sort(values->begin(), values->end());
  return PairwiseSum(values->data(), values->size());
}

inline constexpr double kStatsPoolEpsilon = 1e-12;

// T x F -> 1 x 2F: per-dimension mean, then sqrt(population var + 1e-12).
template <typename Scalar>
class StatsPooling final : public Layer<Scalar> {
 public:
  explicit StatsPooling(std::string name, int min_frames = 2)
      : Layer<Scalar>(name), min_frames_(min_frames) {}

  LayerKind kind() const override { return LayerKind::kStatsPool; }

  Shape OutputShape(Shape in) const override {
    if (in.rows < min_frames_) {
      throw DomainError(this->name() + ": statistics pooling needs at least " +
                        std::to_string(min_frames_) + " frames, got " +
                        std::to_string(in.rows));
    }
    return {1, 2 * in.cols};
  }

  Matrix<Scalar> Forward(const Matrix<Scalar>& x) override {
    OutputShape({x.rows(), x.cols()});
    input_ = x;
    const Eigen::Index t = x.rows(), f = x.cols();
    mean_.resize(f);
    std_.resize(f);
    std::vector<Scalar> scratch(t);
    for (Eigen::Index j = 0; j < f; ++j) {
      for (Eigen::Index i = 0; i < t; ++i) scratch[i] = x(i, j);
      const Scalar mean = PermutationStableSum(&scratch) / static_cast<Scalar>(t);
      for (Eigen::Index i = 0; i < t; ++i) {
        const Scalar d = x(i, j) - mean;
        scratch[i] = d * d;
      }
      const Scalar var = PermutationStableSum(&scratch) / static_cast<Scalar>(t);
      mean_[j] = mean;
      std_[j] = std::sqrt(var + static_cast<Scalar>(kStatsPoolEpsilon));
    }
    Matrix<Scalar> y(1, 2 * f);
    y.leftCols(f) = mean_;
    y.rightCols(f) = std_;
    return y;
  }

  Matrix<Scalar> Backward(const Matrix<Scalar>& gy,
                          bool need_input_grad) override {
    const Eigen::Index t = input_.rows(), f = input_.cols();
    this->CheckShape(gy, {1, 2 * f}, "gradient");
    if (!need_input_grad) return {};
    const Scalar inv_t = Scalar(1) / static_cast<Scalar>(t);
    Matrix<Scalar> gx(t, f);
    for (Eigen::Index j = 0; j < f; ++j) {
      const Scalar g_mean = gy(0, j) * inv_t;
      const Scalar g_std = gy(0, f + j) * inv_t / std_[j];
      for (Eigen::Index i = 0; i < t; ++i) {
        gx(i, j) = g_mean + g_std * (input_(i, j) - mean_[j]);
      }
    }
    return gx;
  }

 private:
  int min_frames_;
  Matrix<Scalar> input_;
  RowVector<Scalar> mean_;
  RowVector<Scalar> std_;
};

// max(x, slope * x); slope 0 is a plain ReLU.
template <typename Scalar>
class LeakyRelu final : public Layer<Scalar> {
 public:
  LeakyRelu(std::string name, Scalar slope)
      : Layer<Scalar>(name), slope_(slope) {
    if (!(slope >= 0 && slope < 1)) {
      throw DomainError(this->name() + ": slope must be in [0, 1)");
    }
  }

  LayerKind kind() const override {
    return slope_ == Scalar(0) ? LayerKind::kRelu : LayerKind::kLeakyRelu;
  }
  Scalar slope() const { return slope_; }

  Shape OutputShape(Shape in) const override { return in; }

  Matrix<Scalar> Forward(const Matrix<Scalar>& x) override {
    input_ = x;
    return x.unaryExpr([s = slope_](Scalar v) { return v > 0 ? v : s * v; });
  }

  Matrix<Scalar> Backward(const Matrix<Scalar>& gy,
                          bool need_input_grad) override {
    this->CheckShape(gy, {input_.rows(), input_.cols()}, "gradient");
    if (!need_input_grad) return {};
    return gy.binaryExpr(input_, [s = slope_](Scalar g, Scalar v) {
      return v > 0 ? g : s * g;
    });
  }

  void AppendKinks(KinkSignature* sig) const override {
    for (Eigen::Index i = 0; i < input_.size(); ++i) {
      const Scalar v = input_.data()[i];
      sig->push_back(static_cast<int8_t>((v > 0) - (v < 0)));
    }
  }

 private:
  Scalar slope_;
  Matrix<Scalar> input_;
};

inline constexpr double kLayerNormEpsilon = 1e-5;

// Normalization axis: kRow normalizes each row across its columns (the B x F
// layer norm of a dense stack, gain/bias per column). kColumn normalizes each
// column across rows, i.e. across channels at each time step of a C x T map,
// with gain/bias per channel.
enum class NormAxis { kRow, kColumn };

template <typename Scalar>
class LayerNorm final : public Layer<Scalar> {
 public:
  LayerNorm(std::string name, Eigen::Index features, NormAxis axis)
      : Layer<Scalar>(name),
        axis_(axis),
        gain_(name + ".gain", 1, features),
        bias_(name + ".bias", 1, features) {
    if (features < 2) throw DomainError(name + ": layer norm needs F >= 2");
    gain_.value.setOnes();
  }

  LayerKind kind() const override { return LayerKind::kLayerNorm; }
  Parameter<Scalar>& gain() { return gain_; }
  Parameter<Scalar>& bias() { return bias_; }

  Shape OutputShape(Shape in) const override {
    const Eigen::Index f = axis_ == NormAxis::kRow ? in.cols : in.rows;
    if (f != gain_.value.cols()) {
      throw DomainError(this->name() + ": normalized dimension " +
                        std::to_string(f) + ", expected " +
                        std::to_string(gain_.value.cols()));
    }
    return in;
  }

  Matrix<Scalar> Forward(const Matrix<Scalar>& x) override {
    OutputShape({x.rows(), x.cols()});
    // Work in row orientation: each row of `rows` is one normalized vector.
    const Matrix<Scalar> rows =
        axis_ == NormAxis::kRow ? x : Matrix<Scalar>(x.transpose());
    const Eigen::Index f = rows.cols();
    normalized_.resize(rows.rows(), f);
    inv_std_.resize(rows.rows());
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      const Scalar mean = rows.row(r).sum() / static_cast<Scalar>(f);
      const Scalar var =
          (rows.row(r).array() - mean).square().sum() / static_cast<Scalar>(f);
      inv_std_[r] =
          Scalar(1) / std::sqrt(var + static_cast<Scalar>(kLayerNormEpsilon));
      normalized_.row(r) = (rows.row(r).array() - mean) * inv_std_[r];
    }
    Matrix<Scalar> y = normalized_.array().rowwise() * gain_.value.row(0).array();
    y.rowwise() += bias_.value.row(0);
    if (axis_ == NormAxis::kRow) return y;
    return y.transpose();
  }

  Matrix<Scalar> Backward(const Matrix<Scalar>& gy_in,
                          bool need_input_grad) override {
    const Matrix<Scalar> gy =
        axis_ == NormAxis::kRow ? gy_in : Matrix<Scalar>(gy_in.transpose());
    this->CheckShape(gy, {normalized_.rows(), normalized_.cols()}, "gradient");
    gain_.grad.row(0) += (gy.array() * normalized_.array()).colwise().sum().matrix();
    bias_.grad.row(0) += gy.colwise().sum();
    if (!need_input_grad) return {};
    const Eigen::Index f = normalized_.cols();
    Matrix<Scalar> gx(gy.rows(), f);
    for (Eigen::Index r = 0; r < gy.rows(); ++r) {
      const RowVector<Scalar> gxhat =
          gy.row(r).cwiseProduct(gain_.value.row(0));
      const Scalar mean_g = gxhat.sum() / static_cast<Scalar>(f);
      const Scalar mean_gx =
          gxhat.cwiseProduct(normalized_.row(r)).sum() / static_cast<Scalar>(f);
      gx.row(r) = inv_std_[r] * (gxhat.array() - mean_g -
                                 normalized_.row(r).array() * mean_gx)
                                    .matrix();
    }
    if (axis_ == NormAxis::kRow) return gx;
    return gx.transpose();
  }

  std::vector<Parameter<Scalar>*> Params() override {
    return {&gain_, &bias_};
  }

 private:
  NormAxis axis_;
  Parameter<Scalar> gain_;
  Parameter<Scalar> bias_;
  Matrix<Scalar> normalized_;
  RowVector<Scalar> inv_std_;
};

// Non-overlapping max over windows along the time axis of a C x T map.
// Trailing samples that do not fill a window are dropped. Ties go to the
// first index.
template <typename Scalar>
class MaxPool1d final : public Layer<Scalar> {
 public:
  MaxPool1d(std::string name, int width) : Layer<Scalar>(name), width_(width) {
    if (width < 1) throw DomainError(this->name() + ": width must be >= 1");
  }

  LayerKind kind() const override { return LayerKind::kMaxPool; }

  Shape OutputShape(Shape in) const override {
    if (in.cols < width_) {
      throw DomainError(this->name() + ": input length " +
                        std::to_string(in.cols) + " shorter than pool width " +
                        std::to_string(width_));
    }
    return {in.rows, in.cols / width_};
  }

  Matrix<Scalar> Forward(const Matrix<Scalar>& x) override {
    const Shape out = OutputShape({x.rows(), x.cols()});
    in_shape_ = {x.rows(), x.cols()};
    argmax_.resize(out.rows, out.cols);
    ties_.assign(static_cast<size_t>(out.rows * out.cols), 0);
    Matrix<Scalar> y(out.rows, out.cols);
    for (Eigen::Index c = 0; c < out.rows; ++c) {
      for (Eigen::Index t = 0; t < out.cols; ++t) {
        const Eigen::Index start = t * width_;
        Eigen::Index best = start;
        for (Eigen::Index k = start + 1; k < start + width_; ++k) {
          if (x(c, k) > x(c, best)) best = k;
        }
        for (Eigen::Index k = start; k < start + width_; ++k) {
          if (k != best && x(c, k) == x(c, best)) {
            ties_[c * out.cols + t] = 1;
          }
        }
        argmax_(c, t) = best;
        y(c, t) = x(c, best);
      }
    }
    return y;
  }

  Matrix<Scalar> Backward(const Matrix<Scalar>& gy,
                          bool need_input_grad) override {
    this->CheckShape(gy, OutputShape(in_shape_), "gradient");
    if (!need_input_grad) return {};
    Matrix<Scalar> gx = Matrix<Scalar>::Zero(in_shape_.rows, in_shape_.cols);
    for (Eigen::Index c = 0; c < gy.rows(); ++c) {
      for (Eigen::Index t = 0; t < gy.cols(); ++t) {
        gx(c, argmax_(c, t)) += gy(c, t);
      }
    }
    return gx;
  }

  void AppendKinks(KinkSignature* sig) const override {
    for (Eigen::Index i = 0; i < argmax_.size(); ++i) {
      sig->push_back(static_cast<int8_t>(argmax_.data()[i] % width_));
      sig->push_back(static_cast<int8_t>(ties_[i]));
    }
  }

  // True when the last forward pass hit an exact tie in some window.
  bool HadTie() const {
    return std::find(ties_.begin(), ties_.end(), 1) != ties_.end();
  }

 private:
  int width_;
  Shape in_shape_;
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      argmax_;
  std::vector<int8_t> ties_;
};

// C x T -> 1 x (C*T), row-major order.
template <typename Scalar>
class Flatten final : public Layer<Scalar> {
 public:
  explicit Flatten(std::string name) : Layer<Scalar>(name) {}
  LayerKind kind() const override { return LayerKind::kFlatten; }

  Shape OutputShape(Shape in) const override {
    return {1, in.rows * in.cols};
  }

  Matrix<Scalar> Forward(const Matrix<Scalar>& x) override {
    in_shape_ = {x.rows(), x.cols()};
    return Eigen::Map<const Matrix<Scalar>>(x.data(), 1, x.size());
  }

  Matrix<Scalar> Backward(const Matrix<Scalar>& gy,
                          bool need_input_grad) override {
    this->CheckShape(gy, {1, in_shape_.rows * in_shape_.cols}, "gradient");
    if (!need_input_grad) return {};
    return Eigen::Map<const Matrix<Scalar>>(gy.data(), in_shape_.rows,
                                            in_shape_.cols);
  }

 private:
  Shape in_shape_;
};

// Learnable sinc band-pass front end: 1 x N chunk -> n_filters x (N - L + 1).
template <typename Scalar>
class SincConv final : public Layer<Scalar> {
 public:
  SincConv(std::string name, const SincParams<Scalar>& init)
      : Layer<Scalar>(name),
        raw_low_(name + ".raw_low", 1, init.NumFilters()),
        raw_band_(name + ".raw_band", 1, init.NumFilters()),
        kernel_len_(init.kernel_len) {
    init.Validate();
    raw_low_.value.row(0) = init.raw_low;
    raw_band_.value.row(0) = init.raw_band;
    bank_.set_params(CurrentParams());
  }

  LayerKind kind() const override { return LayerKind::kSincConv; }
  int NumFilters() const { return static_cast<int>(raw_low_.value.cols()); }
  int KernelLength() const { return kernel_len_; }

  // Filter bank materialized from the current parameter values.
  const SincFilterBank<Scalar>& bank() {
    Sync();
    return bank_;
  }

  SincParams<Scalar> CurrentParams() const {
    return {raw_low_.value.row(0), raw_band_.value.row(0), kernel_len_};
  }

  Shape OutputShape(Shape in) const override {
    if (in.rows != 1) {
      throw DomainError(this->name() + ": expects a single-row chunk");
    }
    if (in.cols < kernel_len_) {
      throw DomainError(this->name() + ": chunk of " + std::to_string(in.cols) +
                        " samples is shorter than the kernel (" +
                        std::to_string(kernel_len_) + ")");
    }
    return {NumFilters(), in.cols - kernel_len_ + 1};
  }

  Matrix<Scalar> Forward(const Matrix<Scalar>& x) override {
    OutputShape({x.rows(), x.cols()});
    Sync();
    input_ = x.row(0);
    return bank_.Forward(input_);
  }

  Matrix<Scalar> Backward(const Matrix<Scalar>& gy,
                          bool need_input_grad) override {
    const SincGradients<Scalar> g = bank_.Backward(input_, gy, need_input_grad);
    raw_low_.grad.row(0) += g.raw_low;
    raw_band_.grad.row(0) += g.raw_band;
    if (!need_input_grad) return {};
    return g.input;
  }

  std::vector<Parameter<Scalar>*> Params() override {
    return {&raw_low_, &raw_band_};
  }

  void AppendKinks(KinkSignature* sig) const override {
    const Scalar nyq = static_cast<Scalar>(kNyquist);
    for (int i = 0; i < NumFilters(); ++i) {
      const Scalar a = raw_low_.value(0, i), b = raw_band_.value(0, i);
      sig->push_back(static_cast<int8_t>((a > 0) - (a < 0)));
      sig->push_back(static_cast<int8_t>((b - a > 0) - (b - a < 0)));
      sig->push_back(static_cast<int8_t>(std::abs(a) < nyq));
      sig->push_back(static_cast<int8_t>(std::abs(a) + std::abs(b - a) < nyq));
    }
  }

 private:
  void Sync() {
    if (bank_.params().raw_low != raw_low_.value.row(0) ||
        bank_.params().raw_band != raw_band_.value.row(0)) {
      bank_.set_params(CurrentParams());
    }
  }

  Parameter<Scalar> raw_low_;
  Parameter<Scalar> raw_band_;
  int kernel_len_;
  SincFilterBank<Scalar> bank_;
  RowVector<Scalar> input_;
};

inline const char* LayerKindName(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv1d: return "conv1d";
    case LayerKind::kTdnnSplice: return "tdnn_splice";
    case LayerKind::kStatsPool: return "stats_pool";
    case LayerKind::kLeakyRelu: return "leaky_relu";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kLayerNorm: return "layer_norm";
    case LayerKind::kMaxPool: return "max_pool";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kSincConv: return "sinc_conv";
  }
  return "unknown";
}

}  // namespace nn
}  // namespace spkfuse

#endif  // SPKFUSE_NN_LAYERS_H_
