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


#ifndef SPKFUSE_NN_LOSS_H_
#define SPKFUSE_NN_LOSS_H_

#include <cmath>
#include <span>
#include <string>

#include "spkfuse/common.h"

namespace spkfuse {
namespace nn {

// Row-wise softmax with max subtraction.
template <typename Scalar>
Matrix<Scalar> Softmax(const Matrix<Scalar>& logits) {
  Matrix<Scalar> p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar m = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - m).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

template <typename Scalar>
struct LossAndGrad {
  Scalar loss = 0;
  Matrix<Scalar> grad;  // d(loss)/d(logits)
};

// Mean over the batch of -log softmax(logits)[target].
template <typename Scalar>
LossAndGrad<Scalar> SoftmaxCrossEntropy(const Matrix<Scalar>& logits,
                                        std::span<const int> targets) {
  const Eigen::Index batch = logits.rows(), classes = logits.cols();
  if (static_cast<Eigen::Index>(targets.size()) != batch || batch == 0) {
    throw DomainError("one target per logit row required");
  }
  LossAndGrad<Scalar> out;
  out.grad = Softmax(logits);
  for (Eigen::Index r = 0; r < batch; ++r) {
    const int t = targets[r];
    if (t < 0 || t >= classes) {
      throw DomainError("target " + std::to_string(t) + " out of range [0, " +
                        std::to_string(classes) + ")");
    }
    const Scalar m = logits.row(r).maxCoeff();
    const Scalar log_z =
        m + std::log((logits.row(r).array() - m).exp().sum());
    out.loss += log_z - logits(r, t);
    out.grad(r, t) -= 1;
  }
  out.loss /= static_cast<Scalar>(batch);
  out.grad /= static_cast<Scalar>(batch);
  return out;
}

}  // namespace nn
}  // namespace spkfuse

#endif  // SPKFUSE_NN_LOSS_H_
