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


#include "spkfuse/models.h"

#include <algorithm>
#include <string>

namespace spkfuse {
namespace {

void RequirePositive(long v, const std::string& what) {
  if (v <= 0) throw DomainError(what + " must be positive");
}

void RequireSlope(double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) {
    throw DomainError("leaky slope must lie in [0, 1)");
  }
}

}  // namespace

const char* ArchitectureName(Architecture arch) {
  switch (arch) {
    case Architecture::kSincNetOnly: return "sincnet";
    case Architecture::kXVectorOnly: return "xvector";
    case Architecture::kFusion: return "fusion";
  }
  return "?";
}

Architecture ParseArchitecture(const std::string& name) {
  if (name == "sincnet") return Architecture::kSincNetOnly;
  if (name == "xvector") return Architecture::kXVectorOnly;
  if (name == "fusion") return Architecture::kFusion;
  throw DomainError("unknown architecture '" + name +
                    "' (expected one of: sincnet, xvector, fusion)");
}

const char* FeatureNormName(FeatureNorm norm) {
  switch (norm) {
    case FeatureNorm::kNone: return "none";
    case FeatureNorm::kMean: return "cmn";
    case FeatureNorm::kMeanVariance: return "mvn";
  }
  return "?";
}

FeatureNorm ParseFeatureNorm(const std::string& name) {
  if (name == "none") return FeatureNorm::kNone;
  if (name == "cmn") return FeatureNorm::kMean;
  if (name == "mvn") return FeatureNorm::kMeanVariance;
  throw DomainError("unknown feature normalization '" + name +
                    "' (expected one of: none, cmn, mvn)");
}

FeatureMatrix ComputeFeatures(const WaveformBuffer& wav,
                              const FeatureConfig& config) {
  FeatureMatrix f = MelFilterbankFeatures(wav, config.frame, config.n_mels);
  switch (config.norm) {
    case FeatureNorm::kNone:
      break;
    case FeatureNorm::kMean:
      f.values.rowwise() -= f.values.colwise().mean();
      break;
    case FeatureNorm::kMeanVariance:
      f = MeanVarianceNormalize(f);
      break;
  }
  return f;
}

void XVectorConfig::Validate() const {
  RequirePositive(feature_dim, "x-vector feature_dim");
  RequirePositive(n_classes, "n_classes");
  RequireSlope(relu_slope);
  if (frame_contexts.empty() || frame_contexts.size() != frame_dims.size()) {
    throw DomainError("x-vector needs one context per frame layer");
  }
  for (const auto& ctx : frame_contexts) {
    if (ctx.empty()) throw DomainError("x-vector context is empty");
    for (size_t i = 1; i < ctx.size(); ++i) {
      if (ctx[i] <= ctx[i - 1]) {
        throw DomainError("x-vector context offsets must increase");
      }
    }
  }
  for (int d : frame_dims) RequirePositive(d, "x-vector frame dim");
  if (segment_dims.empty()) throw DomainError("x-vector needs segment layers");
  for (int d : segment_dims) RequirePositive(d, "x-vector segment dim");
}

int XVectorConfig::FrameInputDim(size_t i) const {
  const int prev = i == 0 ? feature_dim : frame_dims[i - 1];
  return prev * static_cast<int>(frame_contexts[i].size());
}

int XVectorConfig::MinFrames() const {
  int span = 0;
  for (const auto& ctx : frame_contexts) span += ctx.back() - ctx.front();
  return span + 1;
}

void SincNetConfig::Validate() const {
  RequirePositive(n_filters, "n_filters");
  if (kernel_len < 3 || kernel_len % 2 == 0) {
    throw DomainError("sinc kernel length must be odd and >= 3");
  }
  RequirePositive(sample_rate_hz, "sample_rate_hz");
  if (conv_channels.size() != conv_widths.size() ||
      pool_widths.size() != conv_channels.size() + 1) {
    throw DomainError(
        "SincNet needs one width per conv layer and one pool per stage");
  }
  for (int c : conv_channels) RequirePositive(c, "conv channels");
  for (int w : conv_widths) RequirePositive(w, "conv width");
  for (int p : pool_widths) RequirePositive(p, "pool width");
  RequirePositive(dense_dim, "SincNet dense dim");
  RequireSlope(leaky_slope);
}

int SincNetConfig::MinChunkLength() const {
  int need = 1;
  for (size_t i = conv_widths.size(); i-- > 0;) {
    need = need * pool_widths[i + 1] + conv_widths[i] - 1;
  }
  return need * pool_widths[0] + kernel_len - 1;
}

std::vector<int> SincNetConfig::StageLengths(int chunk_len) const {
  Validate();
  auto fail = [&](const std::string& stage, int len) {
    throw DomainError("SincNet chunk of " + std::to_string(chunk_len) +
                      " samples leaves " + std::to_string(len) +
                      " frames at " + stage + "; minimum chunk length is " +
                      std::to_string(MinChunkLength()) + " samples");
  };
  std::vector<int> out;
  int len = chunk_len - kernel_len + 1;
  if (len < 1) fail("sinc convolution", len);
  out.push_back(len);
  len /= pool_widths[0];
  if (len < 1) fail("pool 1", len);
  out.push_back(len);
  for (size_t i = 0; i < conv_widths.size(); ++i) {
    len = len - conv_widths[i] + 1;
    if (len < 1) fail("conv " + std::to_string(i + 1), len);
    out.push_back(len);
    len /= pool_widths[i + 1];
    if (len < 1) fail("pool " + std::to_string(i + 2), len);
    out.push_back(len);
  }
  return out;
}

int SincNetConfig::FlattenDim() const {
  const int channels = conv_channels.empty() ? n_filters : conv_channels.back();
  return StageLengths().back() * channels;
}

void FusionConfig::Validate() const {
  sincnet.Validate();
  if (xvector_dim < 0) throw DomainError("xvector_dim must be >= 0");
  if (fc_dims.empty()) throw DomainError("classifier needs hidden layers");
  for (int d : fc_dims) RequirePositive(d, "classifier fc dim");
  RequirePositive(n_classes, "n_classes");
  RequireSlope(leaky_slope);
}

void ModelConfig::Validate() const {
  RequirePositive(n_classes, "n_classes");
  RequirePositive(features.n_mels, "n_mels");
  features.frame.Validate();
  if (OwnsXVectorNet()) {
    XVector().Validate();
    if (xvector.feature_dim != features.n_mels) {
      throw DomainError("x-vector feature_dim must equal n_mels");
    }
  }
  if (external_xvector_dim < 0) {
    throw DomainError("external_xvector_dim must be >= 0");
  }
  if (HasChunkClassifier()) {
    Fusion().Validate();
    sincnet.StageLengths();
  }
}

XVectorConfig ModelConfig::XVector() const {
  XVectorConfig c = xvector;
  c.n_classes = n_classes;
  return c;
}

FusionConfig ModelConfig::Fusion() const {
  FusionConfig c;
  c.sincnet = sincnet;
  c.fc_dims = fc_dims;
  c.n_classes = n_classes;
  c.xvector_frozen = xvector_frozen;
  c.leaky_slope = leaky_slope;
  if (arch == Architecture::kFusion) {
    c.xvector_dim = external_xvector_dim > 0 ? external_xvector_dim
                                             : xvector.EmbeddingDim();
  } else {
    c.xvector_dim = 0;
  }
  return c;
}

}  // namespace spkfuse
