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


#ifndef SPKFUSE_NN_OPTIMIZER_H_
#define SPKFUSE_NN_OPTIMIZER_H_

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spkfuse/nn/layers.h"

namespace spkfuse {
namespace nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment optimizer with bias correction. Moments are keyed by
// parameter name so that checkpoints do not depend on registration order.
template <typename Scalar>
class Adam {
 public:
  struct Moments {
    Matrix<Scalar> first;
    Matrix<Scalar> second;
  };

  explicit Adam(AdamOptions options = {}) : options_(options) {
    if (!(options.learning_rate >= 0)) {
      throw DomainError("learning rate must be non-negative");
    }
  }

  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  int64_t step() const { return step_; }
  void set_step(int64_t s) { step_ = s; }
  std::map<std::string, Moments>& moments() { return moments_; }
  const std::map<std::string, Moments>& moments() const { return moments_; }

  void Step(const std::vector<Parameter<Scalar>*>& params) {
    ++step_;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const auto c1 = static_cast<Scalar>(1.0 - std::pow(b1, step_));
    const auto c2 = static_cast<Scalar>(1.0 - std::pow(b2, step_));
    const auto lr = static_cast<Scalar>(options_.learning_rate);
    const auto eps = static_cast<Scalar>(options_.epsilon);
    for (Parameter<Scalar>* p : params) {
      if (p->grad.rows() != p->value.rows() ||
          p->grad.cols() != p->value.cols()) {
        throw DomainError("gradient shape mismatch for " + p->name);
      }
      auto [it, inserted] = moments_.try_emplace(p->name);
      Moments& m = it->second;
      if (inserted) {
        m.first.setZero(p->value.rows(), p->value.cols());
        m.second.setZero(p->value.rows(), p->value.cols());
      } else if (m.first.rows() != p->value.rows() ||
                 m.first.cols() != p->value.cols()) {
        throw DomainError("moment shape mismatch for " + p->name);
      }
      m.first = static_cast<Scalar>(b1) * m.first +
                static_cast<Scalar>(1.0 - b1) * p->grad;
      m.second = static_cast<Scalar>(b2) * m.second +
                 static_cast<Scalar>(1.0 - b2) * p->grad.cwiseAbs2();
      p->value.array() -= lr * (m.first.array() / c1) /
                          ((m.second.array() / c2).sqrt() + eps);
    }
  }

 private:
  AdamOptions options_;
  int64_t step_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace nn
}  // namespace spkfuse

#endif  // SPKFUSE_NN_OPTIMIZER_H_
