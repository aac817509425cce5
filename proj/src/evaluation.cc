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


#include "spkfuse/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "spkfuse/binary_io.h"

namespace spkfuse {

namespace fs = std::filesystem;

void EmbeddingStore::Add(Embedding e) {
  if (e.utterance_id.empty()) throw ValidationError("embedding with empty id");
  if (e.vector.size() == 0) {
    throw ValidationError("empty embedding for " + e.utterance_id);
  }
  if (dim_ >= 0 && e.vector.size() != dim_) {
    throw ValidationError("embedding " + e.utterance_id + " has dimension " +
                          std::to_string(e.vector.size()) + ", expected " +
                          std::to_string(dim_));
  }
  if (!e.vector.allFinite()) {
    throw ValidationError("non-finite value in embedding " + e.utterance_id);
  }
  if (index_.count(e.utterance_id) != 0) {
    throw ValidationError("duplicate embedding id " + e.utterance_id);
  }
  dim_ = static_cast<int>(e.vector.size());
  index_[e.utterance_id] = entries_.size();
  entries_.push_back(std::move(e));
}

const Embedding* EmbeddingStore::Find(const std::string& id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

const Embedding& EmbeddingStore::Get(const std::string& id) const {
  const Embedding* e = Find(id);
  if (e == nullptr) throw LookupError("no embedding for utterance " + id);
  return *e;
}

void WriteEmbeddingsText(const EmbeddingStore& store, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[32];
  for (const Embedding& e : store.entries()) {
    out << e.utterance_id;
    for (Eigen::Index i = 0; i < e.vector.size(); ++i) {
      std::snprintf(buf, sizeof(buf), " %.9g",
                    static_cast<double>(static_cast<float>(e.vector[i])));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void WriteEmbeddingsBinary(const EmbeddingStore& store, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << store.size() << ' ' << std::max(store.Dim(), 0) << '\n';
  for (const Embedding& e : store.entries()) {
    out << e.utterance_id << '\n';
    WriteFloat32Block(out, e.vector);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

EmbeddingStore ReadEmbeddingsBinary(std::istream& in, long n, long dim,
                                    const std::string& where) {
  EmbeddingStore store;
  for (long r = 0; r < n; ++r) {
    std::string id;
    if (!std::getline(in, id) || id.empty()) {
      throw FormatError(where + ": truncated at record " + std::to_string(r));
    }
    Matrix<double> v(1, dim);
    ReadFloat32Block(in, &v, where + " record " + std::to_string(r));
    try {
      store.Add({id, v.row(0)});
    } catch (const ValidationError& e) {
      throw ValidationError(where + " record " + std::to_string(r) + ": " +
                            e.what());
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(where + ": trailing bytes after " + std::to_string(n) +
                      " records");
  }
  return store;
}

}  // namespace

EmbeddingStore ReadEmbeddings(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string first;
  if (!std::getline(in, first)) return {};
  long n = 0, dim = 0;
  char extra = 0;
  if (std::sscanf(first.c_str(), "%ld %ld %c", &n, &dim, &extra) == 2) {
    if (n < 0 || dim < 0) throw FormatError(path.string() + ": bad header");
    return ReadEmbeddingsBinary(in, n, dim, path.string());
  }
  EmbeddingStore store;
  std::string line = first;
  int line_no = 1;
  do {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] != '#') {
      std::istringstream is(line);
      std::string id;
      is >> id;
      std::vector<double> values;
      std::string tok;
      while (is >> tok) {
        char* end = nullptr;
        // Values are float32; parse as such so text and binary agree.
        const double v = std::strtof(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') {
          throw FormatError(path.string() + ":" + std::to_string(line_no) +
                            ": not a number: " + tok);
        }
        values.push_back(v);
      }
      try {
        store.Add({id, Eigen::Map<const Eigen::RowVectorXd>(
                           values.data(),
                           static_cast<Eigen::Index>(values.size()))});
      } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                              ": " + e.what());
      }
    }
    ++line_no;
  } while (std::getline(in, line));
  return store;
}

double CosineScore(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  if (a.size() != b.size()) throw DomainError("embedding dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    throw DomainError("cosine score of an all-zero embedding");
  }
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

std::vector<double> ScoreSet::SameScores() const {
  std::vector<double> out;
  for (const ScoredTrial& s : scores) {
    if (s.trial.label == TrialLabel::kSame) out.push_back(s.score);
  }
  return out;
}

std::vector<double> ScoreSet::DifferentScores() const {
  std::vector<double> out;
  for (const ScoredTrial& s : scores) {
    if (s.trial.label == TrialLabel::kDifferent) out.push_back(s.score);
  }
  return out;
}

ScoreSet ScoreTrials(const EmbeddingStore& embeddings,
                     const TrialList& trials) {
  ScoreSet out;
  out.scores.reserve(trials.trials.size());
  for (const Trial& t : trials.trials) {
    const Embedding& a = embeddings.Get(t.enroll_id);
    const Embedding& b = embeddings.Get(t.test_id);
    out.scores.push_back({t, CosineScore(a.vector, b.vector)});
  }
  return out;
}

void WriteScores(const ScoreSet& scores, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[40];
  for (const ScoredTrial& s : scores.scores) {
    std::snprintf(buf, sizeof(buf), "%.17g", s.score);
    out << s.trial.enroll_id << '\t' << s.trial.test_id << '\t'
        << (s.trial.label == TrialLabel::kSame ? "same" : "different") << '\t'
        << buf << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

ScoreSet ReadScores(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  ScoreSet out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string enroll, test, label;
    double score = 0.0;
    if (!(is >> enroll >> test >> label >> score) ||
        (label != "same" && label != "different")) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": malformed score line");
    }
    out.scores.push_back(
        {{enroll, test,
          label == "same" ? TrialLabel::kSame : TrialLabel::kDifferent},
         score});
  }
  return out;
}

namespace {

void CheckScores(std::span<const double> same, std::span<const double> diff) {
  if (same.empty() || diff.empty()) {
    throw DomainError(
        "EER needs both same-speaker and different-speaker trials");
  }
  for (auto s : {same, diff}) {
    for (double v : s) {
      if (!std::isfinite(v)) throw DomainError("non-finite score");
    }
  }
}

}  // namespace

DetCurve DetPoints(std::span<const double> same,
                   std::span<const double> diff) {
  CheckScores(same, diff);
  std::vector<double> s(same.begin(), same.end());
  std::vector<double> d(diff.begin(), diff.end());
  std::sort(s.begin(), s.end());
  std::sort(d.begin(), d.end());
  std::vector<double> all;
  all.reserve(s.size() + d.size());
  std::merge(s.begin(), s.end(), d.begin(), d.end(), std::back_inserter(all));
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> thresholds;
  thresholds.reserve(all.size() + 1);
  thresholds.push_back(all.front());
  for (size_t i = 0; i + 1 < all.size(); ++i) {
    thresholds.push_back(0.5 * (all[i] + all[i + 1]));
  }
  thresholds.push_back(
      std::nextafter(all.back(), std::numeric_limits<double>::infinity()));

  // Two-pointer sweep: counts of scores strictly below each threshold.
  DetCurve curve;
  curve.reserve(thresholds.size());
  size_t below_same = 0, below_diff = 0;
  const double ns = static_cast<double>(s.size());
  const double nd = static_cast<double>(d.size());
  for (double t : thresholds) {
    while (below_same < s.size() && s[below_same] < t) ++below_same;
    while (below_diff < d.size() && d[below_diff] < t) ++below_diff;
    curve.push_back({t, static_cast<double>(d.size() - below_diff) / nd,
                     static_cast<double>(below_same) / ns});
  }
  return curve;
}

DetCurve DetPoints(const ScoreSet& scores) {
  const std::vector<double> same = scores.SameScores();
  const std::vector<double> diff = scores.DifferentScores();
  return DetPoints(same, diff);
}

EerResult ComputeEer(std::span<const double> same,
                     std::span<const double> diff) {
  const DetCurve curve = DetPoints(same, diff);
  // FAR starts at 1 >= FRR = 0 and ends at 0 < FRR = 1.
  for (size_t i = 0; i < curve.size(); ++i) {
    const DetPoint& p = curve[i];
    if (p.frr == p.far) return {p.far, p.threshold};
    if (p.frr > p.far) {
      const DetPoint& q = curve[i - 1];  // i > 0 since curve[0].frr == 0
      const double dq = q.far - q.frr;   // > 0
      const double dp = p.far - p.frr;   // < 0
      const double alpha = dq / (dq - dp);
      return {q.far + alpha * (p.far - q.far),
              q.threshold + alpha * (p.threshold - q.threshold)};
    }
  }
  return {curve.back().far, curve.back().threshold};  // unreachable
}

EerResult ComputeEer(const ScoreSet& scores) {
  const std::vector<double> same = scores.SameScores();
  const std::vector<double> diff = scores.DifferentScores();
  return ComputeEer(same, diff);
}

void WriteDetCsv(const DetCurve& curve, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "threshold,far,frr\n";
  char buf[96];
  for (const DetPoint& p : curve) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.threshold, p.far,
                  p.frr);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path.string());
}

PosteriorDecision AggregatePosteriors(
    std::span<const Eigen::RowVectorXd> chunk_posteriors) {
  if (chunk_posteriors.empty()) throw DomainError("no chunk posteriors");
  PosteriorDecision out;
  out.mean_posterior = Eigen::RowVectorXd::Zero(chunk_posteriors[0].size());
  for (const Eigen::RowVectorXd& p : chunk_posteriors) {
    if (p.size() != out.mean_posterior.size()) {
      throw DomainError("posterior dimension mismatch");
    }
    out.mean_posterior += p;
  }
  out.mean_posterior /= static_cast<double>(chunk_posteriors.size());
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < out.mean_posterior.size(); ++i) {
    if (out.mean_posterior[i] > out.mean_posterior[best]) best = i;
  }
  out.predicted = static_cast<int>(best);
  return out;
}

}  // namespace spkfuse
