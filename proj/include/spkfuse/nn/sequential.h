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


#ifndef SPKFUSE_NN_SEQUENTIAL_H_
#define SPKFUSE_NN_SEQUENTIAL_H_

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "spkfuse/nn/layers.h"

namespace spkfuse {
namespace nn {

// A static, ordered chain of layers. Backward() consumes the cache written by
// the preceding Forward(); calling it twice without a new forward pass is a
// StateError.
template <typename Scalar>
class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L>
  L* Add(std::unique_ptr<L> layer) {
    L* raw = layer.get();
    layers_.push_back(std::move(layer));
    return raw;
  }

  template <typename L, typename... Args>
  L* Emplace(Args&&... args) {
    return Add(std::make_unique<L>(std::forward<Args>(args)...));
  }

  size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  Layer<Scalar>& layer(size_t i) { return *layers_[i]; }
  const Layer<Scalar>& layer(size_t i) const { return *layers_[i]; }

  Shape OutputShape(Shape in) const {
    for (const auto& l : layers_) in = l->OutputShape(in);
    return in;
  }

  Matrix<Scalar> Forward(const Matrix<Scalar>& input) {
    Matrix<Scalar> x = input;
    for (auto& l : layers_) x = l->Forward(x);
    cache_valid_ = true;
    return x;
  }

  // Returns the input gradient (empty when need_input_grad is false).
  Matrix<Scalar> Backward(const Matrix<Scalar>& grad_output,
                          bool need_input_grad = true) {
    if (!cache_valid_) {
      throw StateError(
          "backward called without a fresh forward pass (stale cache)");
    }
    cache_valid_ = false;
    Matrix<Scalar> g = grad_output;
    for (size_t i = layers_.size(); i-- > 0;) {
      const bool need = i > 0 || need_input_grad;
      g = layers_[i]->Backward(g, need);
      if (!need) break;
    }
    return g;
  }

  std::vector<Parameter<Scalar>*> Params() {
    std::vector<Parameter<Scalar>*> out;
    for (auto& l : layers_) {
      for (Parameter<Scalar>* p : l->Params()) out.push_back(p);
    }
    return out;
  }

  void AppendKinks(KinkSignature* sig) const {
    for (const auto& l : layers_) l->AppendKinks(sig);
  }

 private:
  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
  bool cache_valid_ = false;
};

}  // namespace nn
}  // namespace spkfuse

#endif  // SPKFUSE_NN_SEQUENTIAL_H_
