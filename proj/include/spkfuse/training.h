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


// Chunk sampling, the epoch loop, per-epoch EER history and checkpoints.
// Training runs in single precision so that checkpoints (float32 records)
// capture the full state exactly.

#ifndef SPKFUSE_TRAINING_H_
#define SPKFUSE_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spkfuse/audio_io.h"
#include "spkfuse/evaluation.h"
#include "spkfuse/models.h"
#include "spkfuse/nn/optimizer.h"
#include "spkfuse/rng.h"

namespace spkfuse {

using TrainScalar = float;

struct TrainConfig {
  int epochs = 10;
  int batch_size = 16;
  double learning_rate = 1e-3;
  uint64_t seed = 1;
  int chunks_per_utterance = 4;
  int xvector_chunk_frames = 100;
  int eval_every = 1;  // 0 disables per-epoch evaluation

  void Validate() const;
};

// Everything a run needs: model, training schedule and data sources.
struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  // Fusion: checkpoint of a trained x-vector model that feeds the port.
  std::string xvector_checkpoint;
  // Fusion: imported embeddings feeding the port instead of a network.
  std::string xvector_embeddings;
  // Optional checkpoint whose "sincnet." parameters initialize the branch.
  std::string sincnet_warm_start;

  void Validate() const;

  // Sets one `key=value`; throws ValidationError for unknown keys or bad
  // values.
  void Set(const std::string& key, const std::string& value);
  std::string Get(const std::string& key) const;
  static const std::vector<std::string>& Keys();

  // Canonical "key = value" lines in Keys() order.
  std::string ToText() const;
  // Parses "key = value" lines ('#' comments and blank lines allowed) on
  // top of the current values.
  void ApplyText(const std::string& text, const std::string& source);
};

ExperimentConfig ReadExperimentConfig(const std::filesystem::path& path);

struct HistoryRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double frame_error = 0.0;
  std::optional<double> eer;
};

struct TrainHistory {
  std::vector<HistoryRecord> records;

  void Append(const HistoryRecord& r);
  // "epoch,train_loss,frame_error,eer" then one row per epoch (eer blank
  // when not evaluated).
  std::string ToCsv() const;
  static TrainHistory FromCsv(const std::string& csv);
};

void WriteHistoryCsv(const TrainHistory& history,
                     const std::filesystem::path& path);
TrainHistory ReadHistoryCsv(const std::filesystem::path& path);

// One prepared utterance: samples, features, dense label.
struct PreparedUtterance {
  std::string utterance_id;
  int label = -1;
  UtteranceInput<TrainScalar> input;
};

struct PreparedSet {
  std::vector<std::string> speakers;  // label -> speaker id
  std::vector<PreparedUtterance> utterances;
};

// Loads audio and computes features. Labels follow `speakers` when given
// (utterances of other speakers get -1), else the manifest's sorted order.
// When `external` is non-null, each utterance's external x-vector is looked
// up there.
PreparedSet PrepareUtterances(const DatasetManifest& manifest,
                              const FeatureConfig& features,
                              const std::vector<std::string>* speakers = nullptr,
                              const EmbeddingStore* external = nullptr);

struct ChunkRef {
  int utterance = 0;  // index into the sampled collection
  int offset = 0;     // samples (or frames for the x-vector model)
  int label = 0;
};

// `per_utterance` uniformly placed windows of `chunk_len` units from every
// item of length >= chunk_len, shuffled. Shorter items are skipped and
// reported through `warnings`; if every item is skipped, throws
// ValidationError.
std::vector<ChunkRef> SampleChunks(std::span<const int> lengths,
                                   std::span<const int> labels, int chunk_len,
                                   int per_utterance, Rng* rng,
                                   std::vector<std::string>* warnings = nullptr);
std::vector<ChunkRef> SampleChunks(std::span<const int> lengths,
                                   std::span<const int> labels, int chunk_len,
                                   int per_utterance, uint64_t seed,
                                   std::vector<std::string>* warnings = nullptr);

struct EpochStats {
  double loss = 0.0;
  double frame_error = 0.0;
  int examples = 0;
};

// Evaluation data: test utterances plus the trial list.
struct EvalSet {
  PreparedSet utterances;
  TrialList trials;
};

EvalSet PrepareEvalSet(const DatasetManifest& test, const TrialList& trials,
                       const FeatureConfig& features,
                       const EmbeddingStore* external = nullptr);

// Cosine-scored EER of utterance embeddings over the trial list.
EerResult EvaluateEer(SpeakerModel<TrainScalar>* model, const EvalSet& eval);

// Embedding for every utterance of `set`.
EmbeddingStore ExtractEmbeddings(SpeakerModel<TrainScalar>* model,
                                 const PreparedSet& set);

class Trainer {
 public:
  // Builds a fresh model. n_classes is taken from `train_set`.
  Trainer(const ExperimentConfig& config, const PreparedSet& train_set);

  const ExperimentConfig& config() const { return config_; }
  SpeakerModel<TrainScalar>& model() { return *model_; }
  nn::Adam<TrainScalar>& optimizer() { return adam_; }
  const TrainHistory& history() const { return history_; }
  int epoch() const { return epoch_; }
  Rng& rng() { return rng_; }
  const std::vector<std::string>& speakers() const { return speakers_; }

  // Changes the total epoch budget of a resumed run.
  void set_epochs(int epochs);

  // Replaces the model's x-vector parameters (fusion) from a trained
  // x-vector checkpoint.
  void LoadXVectorFrom(const std::filesystem::path& checkpoint);
  // Copies "sincnet." parameters from a checkpoint.
  void WarmStartSincNet(const std::filesystem::path& checkpoint);

  // One pass over freshly sampled chunks: forward/backward per example,
  // one optimizer step per batch. Throws NumericalError naming the batch on
  // a non-finite loss.
  EpochStats TrainEpoch(const PreparedSet& train_set);

  // TrainEpoch, optional evaluation, history append.
  HistoryRecord RunEpoch(const PreparedSet& train_set, const EvalSet* eval);

  // Runs until config().train.epochs epochs are complete. `on_epoch` is
  // called after every epoch (e.g. to checkpoint).
  void Run(const PreparedSet& train_set, const EvalSet* eval,
           const std::function<void(const Trainer&)>& on_epoch = {});

  void SaveCheckpoint(std::ostream& os) const;
  void SaveCheckpoint(const std::filesystem::path& path) const;
  // Restores a trainer from a checkpoint. Throws VersionError on a version
  // mismatch and FormatError on truncation or inconsistency; nothing is
  // returned unless the whole file is valid.
  static Trainer LoadCheckpoint(std::istream& is);
  static Trainer LoadCheckpoint(const std::filesystem::path& path);

 private:
  Trainer(const ExperimentConfig& config, std::vector<std::string> speakers);

  std::vector<nn::Parameter<TrainScalar>*> AllParams() const;
  void PrepareTrainingSet(const PreparedSet& train_set);

  ExperimentConfig config_;
  std::vector<std::string> speakers_;
  std::unique_ptr<SpeakerModel<TrainScalar>> model_;
  nn::Adam<TrainScalar> adam_;
  Rng rng_;
  int epoch_ = 0;
  TrainHistory history_;
  // Frozen fusion: per-utterance port embeddings, computed once.
  std::vector<RowVector<TrainScalar>> port_cache_;
  const PreparedSet* port_cache_source_ = nullptr;
};

inline constexpr const char* kCheckpointMagic = "spkfuse-checkpoint";
inline constexpr int kCheckpointVersion = 1;

// Parameter name -> value, read from any checkpoint without building a
// model.
std::map<std::string, Matrix<TrainScalar>> ReadCheckpointParams(
    const std::filesystem::path& path);

}  // namespace spkfuse

#endif  // SPKFUSE_TRAINING_H_
