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


// Central finite-difference checking of analytic gradients.

#ifndef SPKFUSE_NN_GRADCHECK_H_
#define SPKFUSE_NN_GRADCHECK_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "spkfuse/nn/sequential.h"
#include "spkfuse/rng.h"

namespace spkfuse {
namespace nn {

struct GradCheckOptions {
  double step = 1e-6;
  int max_coords = 200;  // per tensor; larger tensors are subsampled
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a| + |n|, denominator_floor).
  // Central differences at step 1e-6 carry ~1e-10 absolute round-off; the
  // floor keeps near-zero gradients from failing on that noise alone.
  double denominator_floor = 1e-5;
  uint64_t seed = 0;
};

struct TensorCheck {
  std::string name;
  int checked = 0;
  int excluded = 0;  // coordinates whose perturbation crossed a kink
  double max_rel_error = 0.0;
  double worst_analytic = 0.0;  // values at the worst coordinate
  double worst_numeric = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;

  bool passed() const {
    return std::all_of(tensors.begin(), tensors.end(),
                       [](const TensorCheck& t) { return t.passed; });
  }
  const TensorCheck* Find(const std::string& name) const {
    for (const TensorCheck& t : tensors) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }
  std::string ToString() const {
    std::ostringstream os;
    for (const TensorCheck& t : tensors) {
      os << (t.passed ? "ok   " : "FAIL ") << t.name
         << " max_rel_err=" << t.max_rel_error << " checked=" << t.checked
         << " excluded=" << t.excluded;
      if (!t.passed) {
        os << " analytic=" << t.worst_analytic
           << " numeric=" << t.worst_numeric;
      }
      os << '\n';
    }
    return os.str();
  }
};

template <typename Scalar>
struct CheckTarget {
  std::string name;
  Matrix<Scalar>* value;    // perturbed in place, restored afterwards
  Matrix<Scalar> analytic;  // gradient to verify
};

inline double RelativeError(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) /
         std::max(std::abs(analytic) + std::abs(numeric), floor);
}

// `loss` must recompute the objective from the current tensor values.
// `kinks`, when set, returns the kink signature of the most recent loss()
// evaluation; coordinates whose +/- perturbation changes it are excluded.
template <typename Scalar>
GradCheckReport FiniteDifferenceCheck(
    std::vector<CheckTarget<Scalar>> targets,
    const std::function<double()>& loss,
    const std::function<KinkSignature()>& kinks,
    const GradCheckOptions& options = {}) {
  GradCheckReport report;
  Rng rng(MixSeed(options.seed, 0x6763));
  loss();
  const KinkSignature base = kinks ? kinks() : KinkSignature{};
  const auto h = static_cast<Scalar>(options.step);
  for (CheckTarget<Scalar>& target : targets) {
    Matrix<Scalar>& v = *target.value;
    if (target.analytic.rows() != v.rows() || target.analytic.cols() != v.cols()) {
      throw DomainError("analytic gradient shape mismatch for " + target.name);
    }
    std::vector<Eigen::Index> coords(static_cast<size_t>(v.size()));
    std::iota(coords.begin(), coords.end(), Eigen::Index{0});
    if (static_cast<int>(coords.size()) > options.max_coords) {
      rng.Shuffle(&coords);
      coords.resize(options.max_coords);
      std::sort(coords.begin(), coords.end());
    }
    TensorCheck check;
    check.name = target.name;
    for (Eigen::Index idx : coords) {
      Scalar& x = v.data()[idx];
      const Scalar saved = x;
      x = saved + h;
      const double lp = loss();
      const bool kink_p = kinks && kinks() != base;
      x = saved - h;
      const double lm = loss();
      const bool kink_m = kinks && kinks() != base;
      x = saved;
      if (kink_p || kink_m) {
        ++check.excluded;
        continue;
      }
      const double numeric = (lp - lm) / (2.0 * static_cast<double>(h));
      const double err =
          RelativeError(static_cast<double>(target.analytic.data()[idx]),
                        numeric, options.denominator_floor);
      if (err > check.max_rel_error) {
        check.max_rel_error = err;
        check.worst_analytic = static_cast<double>(target.analytic.data()[idx]);
        check.worst_numeric = numeric;
      }
      ++check.checked;
    }
    check.passed = check.max_rel_error < options.tolerance;
    report.tensors.push_back(std::move(check));
  }
  loss();  // leave caches consistent with the restored values
  return report;
}

// Checks every parameter of `graph` plus its input, using the scalar
// objective sum(R .* graph(input)) for a fixed random projection R.
template <typename Scalar>
GradCheckReport CheckSequential(Sequential<Scalar>* graph,
                                const Matrix<Scalar>& input,
                                const GradCheckOptions& options = {}) {
  Matrix<Scalar> x = input;
  const Shape out = graph->OutputShape({x.rows(), x.cols()});
  Rng rng(MixSeed(options.seed, 0x5052));
  Matrix<Scalar> proj(out.rows, out.cols);
  for (Eigen::Index i = 0; i < proj.size(); ++i) {
    proj.data()[i] = static_cast<Scalar>(rng.Uniform(-1.0, 1.0));
  }
  std::vector<Parameter<Scalar>*> params = graph->Params();
  for (Parameter<Scalar>* p : params) p->ZeroGrad();
  graph->Forward(x);
  const Matrix<Scalar> grad_input = graph->Backward(proj, true);

  std::vector<CheckTarget<Scalar>> targets;
  for (Parameter<Scalar>* p : params) {
    targets.push_back({p->name, &p->value, p->grad});
  }
  targets.push_back({"input", &x, grad_input});
  auto loss = [&]() -> double {
    return static_cast<double>(graph->Forward(x).cwiseProduct(proj).sum());
  };
  auto kinks = [&]() {
    KinkSignature sig;
    graph->AppendKinks(&sig);
    return sig;
  };
  return FiniteDifferenceCheck<Scalar>(std::move(targets), loss, kinks,
                                       options);
}

}  // namespace nn
}  // namespace spkfuse

#endif  // SPKFUSE_NN_GRADCHECK_H_
