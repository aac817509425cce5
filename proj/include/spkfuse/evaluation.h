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


// Trial scoring, equal error rate, DET sweep, and embedding files.

#ifndef SPKFUSE_EVALUATION_H_
#define SPKFUSE_EVALUATION_H_

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spkfuse/audio_io.h"
#include "spkfuse/common.h"

namespace spkfuse {

struct Embedding {
  std::string utterance_id;
  Eigen::RowVectorXd vector;
};

// Embeddings of constant dimension, looked up by utterance id.
class EmbeddingStore {
 public:
  // Throws ValidationError on a dimension mismatch, non-finite value, or
  // duplicate id.
  void Add(Embedding e);
  const Embedding* Find(const std::string& utterance_id) const;
  const Embedding& Get(const std::string& utterance_id) const;  // LookupError
  const std::vector<Embedding>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  int Dim() const { return dim_; }

 private:
  std::vector<Embedding> entries_;
  std::map<std::string, size_t> index_;
  int dim_ = -1;
};

// One record per line: utterance_id followed by the values ("%.9g").
void WriteEmbeddingsText(const EmbeddingStore& store,
                         const std::filesystem::path& path);
// Header line "n dim", then per record the utterance id on its own line
// followed by dim little-endian float32 values.
void WriteEmbeddingsBinary(const EmbeddingStore& store,
                           const std::filesystem::path& path);
// Detects the format from the first line. Throws ValidationError (naming the
// offending line/record) on ragged dimensions or non-finite values.
EmbeddingStore ReadEmbeddings(const std::filesystem::path& path);

// <a, b> / (|a| |b|). Throws DomainError on a zero vector or dim mismatch.
double CosineScore(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b);

struct ScoredTrial {
  Trial trial;
  double score = 0.0;
};

struct ScoreSet {
  std::vector<ScoredTrial> scores;

  std::vector<double> SameScores() const;
  std::vector<double> DifferentScores() const;
};

// Cosine score per trial, in input order. Missing embeddings raise
// LookupError naming the utterance.
ScoreSet ScoreTrials(const EmbeddingStore& embeddings, const TrialList& trials);

// enroll_id<TAB>test_id<TAB>label<TAB>score
void WriteScores(const ScoreSet& scores, const std::filesystem::path& path);
ScoreSet ReadScores(const std::filesystem::path& path);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

struct DetPoint {
  double threshold;
  double far;  // fraction of different-speaker trials with score >= threshold
  double frr;  // fraction of same-speaker trials with score < threshold
};

using DetCurve = std::vector<DetPoint>;

// Sweep over: the minimum score (everything accepted), the midpoints between
// consecutive distinct scores, and the next representable value above the
// maximum (everything rejected). Throws DomainError if a class is empty or a
// score is non-finite.
DetCurve DetPoints(std::span<const double> same, std::span<const double> diff);
DetCurve DetPoints(const ScoreSet& scores);

// EER at the FAR/FRR crossing of the sweep, linearly interpolated between the
// two adjacent sweep points when they do not meet exactly.
EerResult ComputeEer(std::span<const double> same,
                     std::span<const double> diff);
EerResult ComputeEer(const ScoreSet& scores);

// CSV "threshold,far,frr".
void WriteDetCsv(const DetCurve& curve, const std::filesystem::path& path);

struct PosteriorDecision {
  int predicted = -1;
  Eigen::RowVectorXd mean_posterior;
};

// Averages per-chunk posteriors; argmax with the lowest index on ties.
PosteriorDecision AggregatePosteriors(
    std::span<const Eigen::RowVectorXd> chunk_posteriors);

}  // namespace spkfuse

#endif  // SPKFUSE_EVALUATION_H_
