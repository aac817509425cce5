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


// The three architectures: SincNet branch + dense classifier, x-vector TDNN,
// and their fusion (SincNet dense features concatenated with an x-vector
// embedding, followed by FC1..FC3 and a softmax output).

#ifndef SPKFUSE_MODELS_H_
#define SPKFUSE_MODELS_H_

#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "spkfuse/common.h"
#include "spkfuse/dsp.h"
#include "spkfuse/evaluation.h"
#include "spkfuse/nn/layers.h"
#include "spkfuse/nn/loss.h"
#include "spkfuse/nn/sequential.h"
#include "spkfuse/rng.h"
#include "spkfuse/sinc_filterbank.h"

namespace spkfuse {

enum class Architecture { kSincNetOnly, kXVectorOnly, kFusion };

const char* ArchitectureName(Architecture arch);
// Accepts "sincnet", "xvector", "fusion"; DomainError lists the options.
Architecture ParseArchitecture(const std::string& name);

enum class FeatureNorm { kNone, kMean, kMeanVariance };
const char* FeatureNormName(FeatureNorm norm);
FeatureNorm ParseFeatureNorm(const std::string& name);

struct FeatureConfig {
  int n_mels = 24;
  FrameSpec frame;
  FeatureNorm norm = FeatureNorm::kMean;
};

// Log-mel features followed by the configured per-utterance normalization.
FeatureMatrix ComputeFeatures(const WaveformBuffer& wav,
                              const FeatureConfig& config);

struct XVectorConfig {
  int feature_dim = 24;
  std::vector<std::vector<int>> frame_contexts = {
      {-2, -1, 0, 1, 2}, {-2, 0, 2}, {-3, 0, 3}, {0}, {0}};
  std::vector<int> frame_dims = {512, 512, 512, 512, 1500};
  std::vector<int> segment_dims = {512, 512};
  int n_classes = 2;
  double relu_slope = 0.0;

  void Validate() const;
  // Input width of frame layer i (feature or previous width times context).
  int FrameInputDim(size_t i) const;
  int PooledDim() const { return 2 * frame_dims.back(); }
  int EmbeddingDim() const { return segment_dims.front(); }
  // 1 + total context span of all splice layers.
  int MinFrames() const;
};

struct SincNetConfig {
  int n_filters = 80;
  int kernel_len = 251;
  int sample_rate_hz = 16000;
  std::vector<int> conv_channels = {60, 60};
  std::vector<int> conv_widths = {5, 5};
  std::vector<int> pool_widths = {3, 3, 3};  // sinc stage, then each conv
  int dense_dim = 512;
  int chunk_len_samples = 3200;
  double leaky_slope = 0.2;

  void Validate() const;
  // Output length after each (conv, pool) stage for a chunk of `chunk_len`
  // samples: sinc, pool, conv, pool, ... Throws DomainError naming the
  // failing stage and MinChunkLength().
  std::vector<int> StageLengths(int chunk_len) const;
  std::vector<int> StageLengths() const { return StageLengths(chunk_len_samples); }
  int MinChunkLength() const;
  int FlattenDim() const;
};

struct FusionConfig {
  SincNetConfig sincnet;
  int xvector_dim = 512;  // 0 for the SincNet-only classifier
  std::vector<int> fc_dims = {512, 512, 256};
  int n_classes = 2;
  bool xvector_frozen = true;
  double leaky_slope = 0.2;

  void Validate() const;
  int Fc1InputDim() const { return sincnet.dense_dim + xvector_dim; }
};

struct ModelConfig {
  Architecture arch = Architecture::kFusion;
  int n_classes = 2;
  uint64_t seed = 1;
  FeatureConfig features;
  XVectorConfig xvector;
  SincNetConfig sincnet;
  std::vector<int> fc_dims = {512, 512, 256};
  double leaky_slope = 0.2;
  bool xvector_frozen = true;
  // Fusion only: when > 0 the embedding port is fed from imported embeddings
  // of this dimension and the model owns no x-vector network.
  int external_xvector_dim = 0;

  void Validate() const;
  XVectorConfig XVector() const;  // with n_classes filled in
  FusionConfig Fusion() const;
  bool OwnsXVectorNet() const {
    return arch == Architecture::kXVectorOnly ||
           (arch == Architecture::kFusion && external_xvector_dim == 0);
  }
  bool HasChunkClassifier() const {
    return arch != Architecture::kXVectorOnly;
  }
};

// One row of the layer geometry: per-frame input x output sizes.
struct LayerGeometry {
  std::string name;
  std::string context;
  long in = 0;
  long out = 0;
  bool pooled = false;  // input is a T-frame sequence reduced to one vector

  // "120x512", or "1500Tx3000" for the pooling row.
  std::string ToString() const {
    return std::to_string(in) + (pooled ? "Tx" : "x") + std::to_string(out);
  }
};

template <typename Scalar>
class XVectorNet {
 public:
  XVectorNet(const XVectorConfig& config, uint64_t seed,
             const std::string& prefix = "xvector")
      : config_(config) {
    config_.Validate();
    Rng rng(MixSeed(seed, 0x7876));
    const auto slope = static_cast<Scalar>(config_.relu_slope);
    for (size_t i = 0; i < config_.frame_dims.size(); ++i) {
      const std::string n = prefix + ".frame" + std::to_string(i + 1);
      frames_.template Emplace<nn::TdnnSplice<Scalar>>(n + ".splice",
                                                       config_.frame_contexts[i]);
      auto* dense = frames_.template Emplace<nn::Dense<Scalar>>(
          n, config_.FrameInputDim(i), config_.frame_dims[i]);
      dense->Init(&rng);
      frames_.template Emplace<nn::LeakyRelu<Scalar>>(n + ".relu", slope);
    }
    // A single surviving frame is valid input (std collapses to sqrt(eps)).
    pool_.template Emplace<nn::StatsPooling<Scalar>>(prefix + ".stats_pool", 1);
    segment6_layer_ = segment6_.template Emplace<nn::Dense<Scalar>>(
        prefix + ".segment6", config_.PooledDim(), config_.segment_dims[0]);
    segment6_layer_->Init(&rng);
    head_.template Emplace<nn::LeakyRelu<Scalar>>(prefix + ".segment6.relu",
                                                  slope);
    int width = config_.segment_dims[0];
    for (size_t i = 1; i < config_.segment_dims.size(); ++i) {
      const std::string n = prefix + ".segment" + std::to_string(i + 6);
      head_.template Emplace<nn::Dense<Scalar>>(n, width,
                                                config_.segment_dims[i])
          ->Init(&rng);
      head_.template Emplace<nn::LeakyRelu<Scalar>>(n + ".relu", slope);
      width = config_.segment_dims[i];
    }
    head_.template Emplace<nn::Dense<Scalar>>(prefix + ".output", width,
                                              config_.n_classes)
        ->Init(&rng);
  }

  const XVectorConfig& config() const { return config_; }
  int MinFrames() const { return config_.MinFrames(); }

  void CheckInput(const Matrix<Scalar>& features) const {
    if (features.cols() != config_.feature_dim) {
      throw DomainError("x-vector input has " +
                        std::to_string(features.cols()) +
                        " feature dims, expected " +
                        std::to_string(config_.feature_dim));
    }
    if (features.rows() < MinFrames()) {
      throw DomainError("x-vector input needs at least " +
                        std::to_string(MinFrames()) + " frames, got " +
                        std::to_string(features.rows()));
    }
  }

  // Output of the last frame-level layer, (T - context) x frame_dims.back().
  Matrix<Scalar> FrameActivations(const Matrix<Scalar>& features) {
    CheckInput(features);
    return frames_.Forward(features);
  }

  // Pooling, segment layers and softmax logits from frame activations.
  Matrix<Scalar> ForwardFromFrameActivations(const Matrix<Scalar>& frame_out) {
    return head_.Forward(segment6_.Forward(pool_.Forward(frame_out)));
  }

  Matrix<Scalar> Forward(const Matrix<Scalar>& features) {
    return ForwardFromFrameActivations(FrameActivations(features));
  }

  Matrix<Scalar> Posteriors(const Matrix<Scalar>& features) {
    return nn::Softmax(Forward(features));
  }

  // Segment-6 affine output before its nonlinearity.
  RowVector<Scalar> Embed(const Matrix<Scalar>& features) {
    return segment6_.Forward(pool_.Forward(FrameActivations(features))).row(0);
  }

  void Backward(const Matrix<Scalar>& grad_logits) {
    BackwardFromEmbedding(head_.Backward(grad_logits));
  }

  // Accumulates frame/segment-6 gradients given d(loss)/d(embedding).
  void BackwardFromEmbedding(const Matrix<Scalar>& grad_embedding) {
    frames_.Backward(pool_.Backward(segment6_.Backward(grad_embedding)),
                     false);
  }

  std::vector<nn::Parameter<Scalar>*> EmbeddingParams() {
    auto p = frames_.Params();
    for (auto* q : segment6_.Params()) p.push_back(q);
    return p;
  }

  std::vector<nn::Parameter<Scalar>*> HeadParams() { return head_.Params(); }

  std::vector<nn::Parameter<Scalar>*> Params() {
    auto p = EmbeddingParams();
    for (auto* q : head_.Params()) p.push_back(q);
    return p;
  }

  std::vector<LayerGeometry> Geometry() const {
    std::vector<LayerGeometry> rows;
    for (size_t i = 0; i < config_.frame_dims.size(); ++i) {
      rows.push_back({"frame" + std::to_string(i + 1),
                      ContextString(config_.frame_contexts[i]),
                      config_.FrameInputDim(i), config_.frame_dims[i], false});
    }
    rows.push_back({"stats_pooling", "[0, T)", config_.frame_dims.back(),
                    config_.PooledDim(), true});
    long width = config_.PooledDim();
    for (size_t i = 0; i < config_.segment_dims.size(); ++i) {
      rows.push_back({"segment" + std::to_string(i + 6), "{0}", width,
                      config_.segment_dims[i], false});
      width = config_.segment_dims[i];
    }
    rows.push_back({"softmax", "{0}", width, config_.n_classes, false});
    return rows;
  }

  nn::Sequential<Scalar>& frames() { return frames_; }
  nn::Sequential<Scalar>& head() { return head_; }
  nn::Dense<Scalar>& segment6() { return *segment6_layer_; }

 private:
  static std::string ContextString(const std::vector<int>& offsets) {
    std::string s = "{";
    for (size_t i = 0; i < offsets.size(); ++i) {
      if (i > 0) s += ", ";
      s += std::to_string(offsets[i]);
    }
    return s + "}";
  }

  XVectorConfig config_;
  nn::Sequential<Scalar> frames_;
  nn::Sequential<Scalar> pool_;
  nn::Sequential<Scalar> segment6_;
  nn::Sequential<Scalar> head_;
  nn::Dense<Scalar>* segment6_layer_ = nullptr;
};

// Raw-waveform branch: sinc filters, then conv blocks, then a dense layer.
template <typename Scalar>
class SincNetBranch {
 public:
  SincNetBranch(const SincNetConfig& config, uint64_t seed,
                const std::string& prefix = "sincnet")
      : config_(config) {
    const std::vector<int> lengths = config_.StageLengths();  // validates
    Rng rng(MixSeed(seed, 0x736e));
    const auto slope = static_cast<Scalar>(config_.leaky_slope);
    sinc_ = net_.template Emplace<nn::SincConv<Scalar>>(
        prefix + ".sinc",
        InitMelScale<Scalar>(config_.n_filters, config_.sample_rate_hz,
                             config_.kernel_len));
    net_.template Emplace<nn::LayerNorm<Scalar>>(
        prefix + ".sinc.norm", config_.n_filters, nn::NormAxis::kColumn);
    net_.template Emplace<nn::LeakyRelu<Scalar>>(prefix + ".sinc.act", slope);
    net_.template Emplace<nn::MaxPool1d<Scalar>>(prefix + ".sinc.pool",
                                                 config_.pool_widths[0]);
    int channels = config_.n_filters;
    for (size_t i = 0; i < config_.conv_channels.size(); ++i) {
      const std::string n = prefix + ".conv" + std::to_string(i + 1);
      net_.template Emplace<nn::Conv1d<Scalar>>(n, channels,
                                                config_.conv_channels[i],
                                                config_.conv_widths[i])
          ->Init(&rng);
      channels = config_.conv_channels[i];
      net_.template Emplace<nn::LayerNorm<Scalar>>(n + ".norm", channels,
                                                   nn::NormAxis::kColumn);
      net_.template Emplace<nn::LeakyRelu<Scalar>>(n + ".act", slope);
      net_.template Emplace<nn::MaxPool1d<Scalar>>(n + ".pool",
                                                   config_.pool_widths[i + 1]);
    }
    net_.template Emplace<nn::Flatten<Scalar>>(prefix + ".flatten");
    net_.template Emplace<nn::Dense<Scalar>>(prefix + ".dense",
                                             config_.FlattenDim(),
                                             config_.dense_dim)
        ->Init(&rng);
    net_.template Emplace<nn::LeakyRelu<Scalar>>(prefix + ".dense.act", slope);
  }

  const SincNetConfig& config() const { return config_; }
  nn::SincConv<Scalar>& sinc() { return *sinc_; }
  nn::Sequential<Scalar>& net() { return net_; }

  Matrix<Scalar> Forward(const RowVector<Scalar>& chunk) {
    if (chunk.size() != config_.chunk_len_samples) {
      throw DomainError("SincNet chunk must have " +
                        std::to_string(config_.chunk_len_samples) +
                        " samples, got " + std::to_string(chunk.size()));
    }
    return net_.Forward(chunk);
  }

  // Returns d(loss)/d(chunk) when requested.
  Matrix<Scalar> Backward(const Matrix<Scalar>& grad_out,
                          bool need_input_grad = false) {
    return net_.Backward(grad_out, need_input_grad);
  }

  std::vector<nn::Parameter<Scalar>*> Params() { return net_.Params(); }

 private:
  SincNetConfig config_;
  nn::Sequential<Scalar> net_;
  nn::SincConv<Scalar>* sinc_ = nullptr;
};

// SincNet branch, optional x-vector port, FC1..FC3 and the softmax output.
template <typename Scalar>
class ChunkClassifier {
 public:
  ChunkClassifier(const FusionConfig& config, uint64_t seed)
      : config_(config), sincnet_(config.sincnet, seed) {
    config_.Validate();
    Rng rng(MixSeed(seed, 0x6663));
    const auto slope = static_cast<Scalar>(config_.leaky_slope);
    int width = config_.Fc1InputDim();
    for (size_t i = 0; i < config_.fc_dims.size(); ++i) {
      const std::string n = "classifier.fc" + std::to_string(i + 1);
      hidden_.template Emplace<nn::Dense<Scalar>>(n, width, config_.fc_dims[i])
          ->Init(&rng);
      hidden_.template Emplace<nn::LeakyRelu<Scalar>>(n + ".act", slope);
      width = config_.fc_dims[i];
    }
    output_ = std::make_unique<nn::Dense<Scalar>>("classifier.output", width,
                                                  config_.n_classes);
    output_->Init(&rng);
  }

  const FusionConfig& config() const { return config_; }
  SincNetBranch<Scalar>& sincnet() { return sincnet_; }
  nn::Sequential<Scalar>& hidden() { return hidden_; }
  nn::Dense<Scalar>& output() { return *output_; }

  // Logits for one chunk. `xvec` must have xvector_dim entries (ignored
  // when the classifier has no x-vector port).
  Matrix<Scalar> Forward(const RowVector<Scalar>& chunk,
                         const RowVector<Scalar>& xvec) {
    const Matrix<Scalar> s = sincnet_.Forward(chunk);
    Matrix<Scalar> joined(1, config_.Fc1InputDim());
    joined.leftCols(s.cols()) = s;
    if (config_.xvector_dim > 0) {
      if (xvec.size() != config_.xvector_dim) {
        throw DomainError("x-vector port expects " +
                          std::to_string(config_.xvector_dim) +
                          " dims, got " + std::to_string(xvec.size()));
      }
      joined.rightCols(config_.xvector_dim) = xvec;
    }
    last_hidden_ = hidden_.Forward(joined);
    return output_->Forward(last_hidden_);
  }

  Matrix<Scalar> Forward(const RowVector<Scalar>& chunk) {
    return Forward(chunk, RowVector<Scalar>());
  }

  // FC3 activations of the most recent forward pass.
  const Matrix<Scalar>& LastHidden() const { return last_hidden_; }

  // Accumulates gradients; returns d(loss)/d(x-vector port) unless the port
  // is absent or frozen (then empty).
  RowVector<Scalar> Backward(const Matrix<Scalar>& grad_logits,
                             bool need_chunk_grad = false) {
    const Matrix<Scalar> g_joined =
        hidden_.Backward(output_->Backward(grad_logits, true), true);
    const Eigen::Index ds = config_.sincnet.dense_dim;
    last_chunk_grad_ = sincnet_.Backward(g_joined.leftCols(ds), need_chunk_grad);
    if (config_.xvector_dim == 0 || config_.xvector_frozen) return {};
    return g_joined.rightCols(config_.xvector_dim).row(0);
  }

  const Matrix<Scalar>& LastChunkGrad() const { return last_chunk_grad_; }

  std::vector<nn::Parameter<Scalar>*> Params() {
    auto p = sincnet_.Params();
    for (auto* q : hidden_.Params()) p.push_back(q);
    for (auto* q : output_->Params()) p.push_back(q);
    return p;
  }

 private:
  FusionConfig config_;
  SincNetBranch<Scalar> sincnet_;
  nn::Sequential<Scalar> hidden_;
  std::unique_ptr<nn::Dense<Scalar>> output_;
  Matrix<Scalar> last_hidden_;
  Matrix<Scalar> last_chunk_grad_;
};

// One utterance prepared for a model: raw samples, features, and (for fusion
// with imported embeddings) the external x-vector.
template <typename Scalar>
struct UtteranceInput {
  RowVector<Scalar> samples;
  Matrix<Scalar> features;
  RowVector<Scalar> external_xvector;
};

template <typename Scalar>
class SpeakerModel {
 public:
  explicit SpeakerModel(const ModelConfig& config) : config_(config) {
    config_.Validate();
    if (config_.OwnsXVectorNet()) {
      xvector_ = std::make_unique<XVectorNet<Scalar>>(config_.XVector(),
                                                      config_.seed);
    }
    if (config_.HasChunkClassifier()) {
      classifier_ = std::make_unique<ChunkClassifier<Scalar>>(
          config_.Fusion(), MixSeed(config_.seed, 0x6368));
    }
  }

  const ModelConfig& config() const { return config_; }
  Architecture arch() const { return config_.arch; }
  bool HasXVectorNet() const { return xvector_ != nullptr; }
  bool HasChunkClassifier() const { return classifier_ != nullptr; }
  bool HasSinc() const { return classifier_ != nullptr; }

  XVectorNet<Scalar>& xvector() {
    if (!xvector_) throw StateError("model has no x-vector network");
    return *xvector_;
  }
  ChunkClassifier<Scalar>& classifier() {
    if (!classifier_) throw StateError("model has no SincNet branch");
    return *classifier_;
  }

  std::vector<nn::Parameter<Scalar>*> Params() {
    std::vector<nn::Parameter<Scalar>*> p;
    if (xvector_) p = xvector_->Params();
    if (classifier_) {
      for (auto* q : classifier_->Params()) p.push_back(q);
    }
    return p;
  }

  // Parameters the optimizer may update. A frozen x-vector network inside a
  // fusion model is excluded entirely.
  std::vector<nn::Parameter<Scalar>*> TrainableParams() {
    if (config_.arch == Architecture::kXVectorOnly) return xvector_->Params();
    std::vector<nn::Parameter<Scalar>*> p = classifier_->Params();
    if (xvector_ && !config_.xvector_frozen) {
      for (auto* q : xvector_->EmbeddingParams()) p.push_back(q);
    }
    return p;
  }

  // Embedding port value for a fusion model (empty otherwise).
  RowVector<Scalar> PortEmbedding(const UtteranceInput<Scalar>& utt) {
    if (config_.arch != Architecture::kFusion) return {};
    if (xvector_) return xvector_->Embed(utt.features);
    if (utt.external_xvector.size() != config_.external_xvector_dim) {
      throw DomainError("missing or mis-sized external x-vector");
    }
    return utt.external_xvector;
  }

  // Non-overlapping chunks of the configured length (trailing samples are
  // dropped). Throws DomainError if the utterance is shorter than one chunk.
  std::vector<RowVector<Scalar>> Chunks(const RowVector<Scalar>& samples) const {
    const int len = config_.sincnet.chunk_len_samples;
    if (samples.size() < len) {
      throw DomainError("utterance of " + std::to_string(samples.size()) +
                        " samples is shorter than one chunk (" +
                        std::to_string(len) + ")");
    }
    std::vector<RowVector<Scalar>> out;
    for (Eigen::Index start = 0; start + len <= samples.size(); start += len) {
      out.push_back(samples.segment(start, len));
    }
    return out;
  }

  // Fixed-dimension utterance embedding: segment-6 output for the x-vector
  // model, mean FC3 activation over chunks for the chunk classifiers.
  Eigen::RowVectorXd UtteranceEmbedding(const UtteranceInput<Scalar>& utt) {
    if (config_.arch == Architecture::kXVectorOnly) {
      return xvector_->Embed(utt.features).template cast<double>();
    }
    const RowVector<Scalar> port = PortEmbedding(utt);
    Eigen::RowVectorXd sum;
    const auto chunks = Chunks(utt.samples);
    for (const RowVector<Scalar>& c : chunks) {
      classifier_->Forward(c, port);
      const Eigen::RowVectorXd h =
          classifier_->LastHidden().row(0).template cast<double>();
      if (sum.size() == 0) {
        sum = h;
      } else {
        sum += h;
      }
    }
    return sum / static_cast<double>(chunks.size());
  }

  // Chunk-averaged posteriors (x-vector model: posterior of the whole
  // utterance).
  PosteriorDecision UtteranceDecision(const UtteranceInput<Scalar>& utt) {
    std::vector<Eigen::RowVectorXd> posts;
    if (config_.arch == Architecture::kXVectorOnly) {
      posts.push_back(
          xvector_->Posteriors(utt.features).row(0).template cast<double>());
    } else {
      const RowVector<Scalar> port = PortEmbedding(utt);
      for (const RowVector<Scalar>& c : Chunks(utt.samples)) {
        posts.push_back(nn::Softmax(classifier_->Forward(c, port))
                            .row(0)
                            .template cast<double>());
      }
    }
    return AggregatePosteriors(posts);
  }

 private:
  ModelConfig config_;
  std::unique_ptr<XVectorNet<Scalar>> xvector_;
  std::unique_ptr<ChunkClassifier<Scalar>> classifier_;
};

}  // namespace spkfuse

#endif  // SPKFUSE_MODELS_H_
