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


#include "spkfuse/training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "spkfuse/nn/loss.h"
#include "spkfuse/nn/param_io.h"

namespace spkfuse {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

long ParseLong(const std::string& key, const std::string& v) {
  size_t pos = 0;
  long out = 0;
  try {
    out = std::stol(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) {
    throw ValidationError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

int ParseInt(const std::string& key, const std::string& v) {
  return static_cast<int>(ParseLong(key, v));
}

double ParseDouble(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size() || !std::isfinite(out)) {
    throw ValidationError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> SplitOn(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(Trim(cur));
  return out;
}

std::vector<int> ParseIntList(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const std::string& tok : SplitOn(v, ',')) {
    out.push_back(ParseInt(key, tok));
  }
  if (out.empty()) throw ValidationError(key + ": empty list");
  return out;
}

std::string JoinInts(const std::vector<int>& v, char sep = ',') {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

struct KeyDef {
  std::string name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig*, const std::string&)> set;
};

#define SPKFUSE_INT_KEY(key, field)                                        \
  KeyDef {                                                                 \
    key, [](const ExperimentConfig& c) { return std::to_string(c.field); }, \
        [](ExperimentConfig* c, const std::string& v) {                    \
          c->field = ParseInt(key, v);                                     \
        }                                                                  \
  }
#define SPKFUSE_DOUBLE_KEY(key, field)                                   \
  KeyDef {                                                               \
    key, [](const ExperimentConfig& c) { return FormatDouble(c.field); }, \
        [](ExperimentConfig* c, const std::string& v) {                  \
          c->field = ParseDouble(key, v);                                \
        }                                                                \
  }
#define SPKFUSE_LIST_KEY(key, field)                                  \
  KeyDef {                                                            \
    key, [](const ExperimentConfig& c) { return JoinInts(c.field); }, \
        [](ExperimentConfig* c, const std::string& v) {               \
          c->field = ParseIntList(key, v);                            \
        }                                                             \
  }
#define SPKFUSE_STRING_KEY(key, field)                                   \
  KeyDef {                                                               \
    key, [](const ExperimentConfig& c) { return c.field; },              \
        [](ExperimentConfig* c, const std::string& v) { c->field = v; } \
  }

const std::vector<KeyDef>& KeyTable() {
  static const std::vector<KeyDef> table = {
      {"model.arch",
       [](const ExperimentConfig& c) {
         return std::string(ArchitectureName(c.model.arch));
       },
       [](ExperimentConfig* c, const std::string& v) {
         try {
           c->model.arch = ParseArchitecture(v);
         } catch (const DomainError& e) {
           throw ValidationError(std::string("model.arch: ") + e.what());
         }
       }},
      {"model.seed",
       [](const ExperimentConfig& c) { return std::to_string(c.model.seed); },
       [](ExperimentConfig* c, const std::string& v) {
         c->model.seed = static_cast<uint64_t>(ParseLong("model.seed", v));
       }},
      SPKFUSE_INT_KEY("model.n_classes", model.n_classes),
      SPKFUSE_DOUBLE_KEY("model.leaky_slope", model.leaky_slope),
      {"features.n_mels",
       [](const ExperimentConfig& c) {
         return std::to_string(c.model.features.n_mels);
       },
       // The x-vector input width always follows the feature width.
       [](ExperimentConfig* c, const std::string& v) {
         c->model.features.n_mels = ParseInt("features.n_mels", v);
         c->model.xvector.feature_dim = c->model.features.n_mels;
       }},
      SPKFUSE_INT_KEY("features.frame_length",
                      model.features.frame.frame_length_samples),
      SPKFUSE_INT_KEY("features.hop_length", model.features.frame.hop_samples),
      SPKFUSE_INT_KEY("features.n_fft", model.features.frame.n_fft),
      {"features.norm",
       [](const ExperimentConfig& c) {
         return std::string(FeatureNormName(c.model.features.norm));
       },
       [](ExperimentConfig* c, const std::string& v) {
         try {
           c->model.features.norm = ParseFeatureNorm(v);
         } catch (const DomainError& e) {
           throw ValidationError(std::string("features.norm: ") + e.what());
         }
       }},
      {"xvector.contexts",
       [](const ExperimentConfig& c) {
         std::string s;
         for (size_t i = 0; i < c.model.xvector.frame_contexts.size(); ++i) {
           if (i > 0) s += ';';
           s += JoinInts(c.model.xvector.frame_contexts[i]);
         }
         return s;
       },
       [](ExperimentConfig* c, const std::string& v) {
         std::vector<std::vector<int>> ctx;
         for (const std::string& part : SplitOn(v, ';')) {
           ctx.push_back(ParseIntList("xvector.contexts", part));
         }
         c->model.xvector.frame_contexts = ctx;
       }},
      SPKFUSE_LIST_KEY("xvector.frame_dims", model.xvector.frame_dims),
      SPKFUSE_LIST_KEY("xvector.segment_dims", model.xvector.segment_dims),
      SPKFUSE_DOUBLE_KEY("xvector.relu_slope", model.xvector.relu_slope),
      SPKFUSE_INT_KEY("sincnet.n_filters", model.sincnet.n_filters),
      SPKFUSE_INT_KEY("sincnet.kernel_len", model.sincnet.kernel_len),
      SPKFUSE_INT_KEY("sincnet.sample_rate_hz", model.sincnet.sample_rate_hz),
      SPKFUSE_LIST_KEY("sincnet.conv_channels", model.sincnet.conv_channels),
      SPKFUSE_LIST_KEY("sincnet.conv_widths", model.sincnet.conv_widths),
      SPKFUSE_LIST_KEY("sincnet.pool_widths", model.sincnet.pool_widths),
      SPKFUSE_INT_KEY("sincnet.dense_dim", model.sincnet.dense_dim),
      SPKFUSE_INT_KEY("sincnet.chunk_len_samples",
                      model.sincnet.chunk_len_samples),
      SPKFUSE_STRING_KEY("sincnet.warm_start", sincnet_warm_start),
      SPKFUSE_LIST_KEY("classifier.fc_dims", model.fc_dims),
      {"fusion.xvector_frozen",
       [](const ExperimentConfig& c) {
         return std::string(c.model.xvector_frozen ? "true" : "false");
       },
       [](ExperimentConfig* c, const std::string& v) {
         c->model.xvector_frozen = ParseBool("fusion.xvector_frozen", v);
       }},
      SPKFUSE_INT_KEY("fusion.external_xvector_dim",
                      model.external_xvector_dim),
      SPKFUSE_STRING_KEY("fusion.xvector_checkpoint", xvector_checkpoint),
      SPKFUSE_STRING_KEY("fusion.xvector_embeddings", xvector_embeddings),
      SPKFUSE_INT_KEY("train.epochs", train.epochs),
      SPKFUSE_INT_KEY("train.batch_size", train.batch_size),
      SPKFUSE_DOUBLE_KEY("train.learning_rate", train.learning_rate),
      {"train.seed",
       [](const ExperimentConfig& c) { return std::to_string(c.train.seed); },
       [](ExperimentConfig* c, const std::string& v) {
         c->train.seed = static_cast<uint64_t>(ParseLong("train.seed", v));
       }},
      SPKFUSE_INT_KEY("train.chunks_per_utterance",
                      train.chunks_per_utterance),
      SPKFUSE_INT_KEY("train.xvector_chunk_frames", train.xvector_chunk_frames),
      SPKFUSE_INT_KEY("train.eval_every", train.eval_every),
  };
  return table;
}

#undef SPKFUSE_INT_KEY
#undef SPKFUSE_DOUBLE_KEY
#undef SPKFUSE_LIST_KEY
#undef SPKFUSE_STRING_KEY

const KeyDef& FindKey(const std::string& key) {
  for (const KeyDef& k : KeyTable()) {
    if (k.name == key) return k;
  }
  throw ValidationError("unknown config key '" + key + "'");
}

bool AllFinite(const Matrix<TrainScalar>& m) { return m.allFinite(); }

RowVector<TrainScalar> ToRow(const std::vector<double>& v) {
  RowVector<TrainScalar> r(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) {
    r(static_cast<Eigen::Index>(i)) = static_cast<TrainScalar>(v[i]);
  }
  return r;
}

std::string ReadLine(std::istream& is, const char* what) {
  std::string line;
  if (!std::getline(is, line)) {
    throw FormatError(std::string("truncated checkpoint: missing ") + what);
  }
  return line;
}

// "<tag> <count>" header line.
long ReadCount(std::istream& is, const std::string& tag) {
  const std::string line = ReadLine(is, tag.c_str());
  std::istringstream ls(line);
  std::string t;
  long n = -1;
  if (!(ls >> t >> n) || t != tag || n < 0) {
    throw FormatError("checkpoint: expected '" + tag + " <n>', got '" + line +
                      "'");
  }
  return n;
}

}  // namespace

void TrainConfig::Validate() const {
  if (epochs < 1 || batch_size < 1 || chunks_per_utterance < 1 ||
      xvector_chunk_frames < 1) {
    throw ValidationError("training counts must be >= 1");
  }
  if (!(learning_rate > 0.0)) {
    throw ValidationError("learning rate must be positive");
  }
  if (eval_every < 0) throw ValidationError("eval_every must be >= 0");
}

void ExperimentConfig::Validate() const {
  train.Validate();
  try {
    model.Validate();
  } catch (const DomainError& e) {
    throw ValidationError(std::string("invalid model config: ") + e.what());
  }
  if (model.arch == Architecture::kXVectorOnly &&
      train.xvector_chunk_frames < model.xvector.MinFrames()) {
    throw ValidationError("train.xvector_chunk_frames must be at least " +
                          std::to_string(model.xvector.MinFrames()));
  }
  if (!xvector_embeddings.empty() && model.external_xvector_dim == 0) {
    throw ValidationError(
        "fusion.xvector_embeddings requires fusion.external_xvector_dim");
  }
  if (model.arch == Architecture::kFusion && model.external_xvector_dim > 0 &&
      xvector_embeddings.empty()) {
    throw ValidationError(
        "fusion.external_xvector_dim requires fusion.xvector_embeddings");
  }
  if (!xvector_checkpoint.empty() && model.arch != Architecture::kFusion) {
    throw ValidationError("fusion.xvector_checkpoint only applies to fusion");
  }
}

void ExperimentConfig::Set(const std::string& key, const std::string& value) {
  FindKey(key).set(this, Trim(value));
}

std::string ExperimentConfig::Get(const std::string& key) const {
  return FindKey(key).get(*this);
}

const std::vector<std::string>& ExperimentConfig::Keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const KeyDef& d : KeyTable()) k.push_back(d.name);
    return k;
  }();
  return keys;
}

std::string ExperimentConfig::ToText() const {
  std::string s;
  for (const KeyDef& d : KeyTable()) s += d.name + " = " + d.get(*this) + "\n";
  return s;
}

void ExperimentConfig::ApplyText(const std::string& text,
                                 const std::string& source) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(source + ":" + std::to_string(lineno) +
                            ": expected key = value");
    }
    try {
      Set(Trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(lineno) + ": " +
                            e.what());
    }
  }
}

ExperimentConfig ReadExperimentConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c;
  c.ApplyText(ss.str(), path.string());
  return c;
}

void TrainHistory::Append(const HistoryRecord& r) {
  if (!records.empty() && r.epoch <= records.back().epoch) {
    throw StateError("history epochs must strictly increase");
  }
  records.push_back(r);
}

std::string TrainHistory::ToCsv() const {
  std::string s = "epoch,train_loss,frame_error,eer\n";
  char buf[128];
  for (const HistoryRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,", r.epoch, r.train_loss,
                  r.frame_error);
    s += buf;
    if (r.eer) {
      std::snprintf(buf, sizeof(buf), "%.9g", *r.eer);
      s += buf;
    }
    s += '\n';
  }
  return s;
}

TrainHistory TrainHistory::FromCsv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  if (!std::getline(is, line) || Trim(line) != "epoch,train_loss,frame_error,eer") {
    throw FormatError("history: missing header");
  }
  TrainHistory h;
  while (std::getline(is, line)) {
    if (Trim(line).empty()) continue;
    const std::vector<std::string> f = SplitOn(line, ',');
    if (f.size() < 3 || f.size() > 4) {
      throw FormatError("history: malformed row '" + line + "'");
    }
    HistoryRecord r;
    try {
      r.epoch = ParseInt("epoch", f[0]);
      r.train_loss = ParseDouble("train_loss", f[1]);
      r.frame_error = ParseDouble("frame_error", f[2]);
      if (f.size() == 4 && !f[3].empty()) r.eer = ParseDouble("eer", f[3]);
    } catch (const ValidationError& e) {
      throw FormatError(std::string("history: ") + e.what());
    }
    h.Append(r);
  }
  return h;
}

void WriteHistoryCsv(const TrainHistory& history,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << history.ToCsv();
  if (!out) throw IoError("write failed: " + path.string());
}

TrainHistory ReadHistoryCsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return TrainHistory::FromCsv(ss.str());
}

PreparedSet PrepareUtterances(const DatasetManifest& manifest,
                              const FeatureConfig& features,
                              const std::vector<std::string>* speakers,
                              const EmbeddingStore* external) {
  PreparedSet set;
  set.speakers = speakers ? *speakers : manifest.Speakers();
  std::map<std::string, int> index;
  for (size_t i = 0; i < set.speakers.size(); ++i) {
    index[set.speakers[i]] = static_cast<int>(i);
  }
  for (const ManifestEntry& e : manifest.entries) {
    WaveformBuffer wav = ReadWav(manifest.AudioPath(e));
    wav.utterance_id = e.utterance_id;
    PreparedUtterance u;
    u.utterance_id = e.utterance_id;
    const auto it = index.find(e.speaker_id);
    u.label = it == index.end() ? -1 : it->second;
    u.input.samples = ToRow(wav.samples);
    u.input.features =
        ComputeFeatures(wav, features).values.cast<TrainScalar>();
    if (external) {
      u.input.external_xvector =
          external->Get(e.utterance_id).vector.cast<TrainScalar>();
    }
    set.utterances.push_back(std::move(u));
  }
  return set;
}

std::vector<ChunkRef> SampleChunks(std::span<const int> lengths,
                                   std::span<const int> labels, int chunk_len,
                                   int per_utterance, Rng* rng,
                                   std::vector<std::string>* warnings) {
  if (lengths.size() != labels.size()) {
    throw DomainError("lengths and labels differ in size");
  }
  if (chunk_len < 1 || per_utterance < 1) {
    throw DomainError("chunk length and per-utterance count must be >= 1");
  }
  std::vector<ChunkRef> out;
  for (size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < chunk_len) {
      if (warnings) {
        warnings->push_back("skipping item " + std::to_string(i) + ": length " +
                            std::to_string(lengths[i]) + " < chunk length " +
                            std::to_string(chunk_len));
      }
      continue;
    }
    const auto span = static_cast<uint64_t>(lengths[i] - chunk_len + 1);
    for (int k = 0; k < per_utterance; ++k) {
      out.push_back({static_cast<int>(i),
                     static_cast<int>(rng->UniformInt(span)), labels[i]});
    }
  }
  if (out.empty()) {
    throw ValidationError("empty training set: every utterance is shorter "
                          "than the chunk length " +
                          std::to_string(chunk_len));
  }
  rng->Shuffle(&out);
  return out;
}

std::vector<ChunkRef> SampleChunks(std::span<const int> lengths,
                                   std::span<const int> labels, int chunk_len,
                                   int per_utterance, uint64_t seed,
                                   std::vector<std::string>* warnings) {
  Rng rng(MixSeed(seed, 0x6368));
  return SampleChunks(lengths, labels, chunk_len, per_utterance, &rng,
                      warnings);
}

EvalSet PrepareEvalSet(const DatasetManifest& test, const TrialList& trials,
                       const FeatureConfig& features,
                       const EmbeddingStore* external) {
  trials.Validate(&test);
  return {PrepareUtterances(test, features, nullptr, external), trials};
}

EmbeddingStore ExtractEmbeddings(SpeakerModel<TrainScalar>* model,
                                 const PreparedSet& set) {
  EmbeddingStore store;
  for (const PreparedUtterance& u : set.utterances) {
    store.Add({u.utterance_id, model->UtteranceEmbedding(u.input)});
  }
  return store;
}

EerResult EvaluateEer(SpeakerModel<TrainScalar>* model, const EvalSet& eval) {
  return ComputeEer(ScoreTrials(ExtractEmbeddings(model, eval.utterances),
                                eval.trials));
}

Trainer::Trainer(const ExperimentConfig& config,
                 std::vector<std::string> speakers)
    : config_(config),
      speakers_(std::move(speakers)),
      adam_(nn::AdamOptions{config.train.learning_rate}),
      rng_(MixSeed(config.train.seed, 0x747261696e)) {
  config_.model.n_classes = static_cast<int>(speakers_.size());
  config_.Validate();
  model_ = std::make_unique<SpeakerModel<TrainScalar>>(config_.model);
}

Trainer::Trainer(const ExperimentConfig& config, const PreparedSet& train_set)
    : Trainer(config, train_set.speakers) {
  if (speakers_.size() < 2) {
    throw ValidationError("training needs at least two speakers");
  }
  if (!config_.xvector_checkpoint.empty()) {
    LoadXVectorFrom(config_.xvector_checkpoint);
  }
  if (!config_.sincnet_warm_start.empty()) {
    WarmStartSincNet(config_.sincnet_warm_start);
  }
}

void Trainer::set_epochs(int epochs) {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  config_.train.epochs = epochs;
}

std::vector<nn::Parameter<TrainScalar>*> Trainer::AllParams() const {
  return model_->Params();
}

namespace {

// Copies every parameter of `dst` whose name starts with `prefix` from
// `src`; all of them must be present with matching shapes.
void CopyParams(const std::map<std::string, Matrix<TrainScalar>>& src,
                const std::vector<nn::Parameter<TrainScalar>*>& dst,
                const std::string& prefix, const std::string& origin) {
  int copied = 0;
  for (nn::Parameter<TrainScalar>* p : dst) {
    if (p->name.rfind(prefix, 0) != 0) continue;
    const auto it = src.find(p->name);
    if (it == src.end()) {
      throw ValidationError(origin + " has no parameter " + p->name);
    }
    if (it->second.rows() != p->value.rows() ||
        it->second.cols() != p->value.cols()) {
      throw ValidationError(origin + ": shape mismatch for " + p->name);
    }
    ++copied;
  }
  if (copied == 0) {
    throw ValidationError(origin + " provides no '" + prefix + "' parameters");
  }
  for (nn::Parameter<TrainScalar>* p : dst) {
    if (p->name.rfind(prefix, 0) == 0) p->value = src.at(p->name);
  }
}

}  // namespace

void Trainer::LoadXVectorFrom(const std::filesystem::path& checkpoint) {
  if (!model_->HasXVectorNet() || config_.model.arch != Architecture::kFusion) {
    throw ValidationError("only a fusion model takes an x-vector checkpoint");
  }
  const auto params = ReadCheckpointParams(checkpoint);
  // Only the embedding part is used; the x-vector head is never evaluated
  // inside the fusion model.
  std::vector<nn::Parameter<TrainScalar>*> dst =
      model_->xvector().EmbeddingParams();
  CopyParams(params, dst, "xvector.", checkpoint.string());
  port_cache_source_ = nullptr;
}

void Trainer::WarmStartSincNet(const std::filesystem::path& checkpoint) {
  if (!model_->HasSinc()) {
    throw ValidationError("sincnet.warm_start needs a model with a sinc layer");
  }
  CopyParams(ReadCheckpointParams(checkpoint),
             model_->classifier().sincnet().Params(), "sincnet.",
             checkpoint.string());
}

void Trainer::PrepareTrainingSet(const PreparedSet& train_set) {
  const bool needs_cache = config_.model.arch == Architecture::kFusion &&
                           (config_.model.xvector_frozen ||
                            !model_->HasXVectorNet());
  if (!needs_cache) {
    port_cache_.clear();
    port_cache_source_ = nullptr;
    return;
  }
  if (port_cache_source_ == &train_set &&
      port_cache_.size() == train_set.utterances.size()) {
    return;
  }
  port_cache_.clear();
  for (const PreparedUtterance& u : train_set.utterances) {
    port_cache_.push_back(model_->PortEmbedding(u.input));
  }
  port_cache_source_ = &train_set;
}

EpochStats Trainer::TrainEpoch(const PreparedSet& train_set) {
  const ModelConfig& mc = config_.model;
  const bool xvec_arch = mc.arch == Architecture::kXVectorOnly;
  std::vector<int> lengths, labels;
  for (const PreparedUtterance& u : train_set.utterances) {
    lengths.push_back(static_cast<int>(xvec_arch ? u.input.features.rows()
                                                 : u.input.samples.size()));
    labels.push_back(u.label);
    if (u.label < 0 || u.label >= mc.n_classes) {
      throw ValidationError("utterance " + u.utterance_id +
                            " has no training label");
    }
  }
  const int chunk_len = xvec_arch ? config_.train.xvector_chunk_frames
                                  : mc.sincnet.chunk_len_samples;
  std::vector<std::string> warnings;
  const std::vector<ChunkRef> chunks =
      SampleChunks(lengths, labels, chunk_len,
                   config_.train.chunks_per_utterance, &rng_, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  PrepareTrainingSet(train_set);

  const std::vector<nn::Parameter<TrainScalar>*> params =
      model_->TrainableParams();
  const bool joint_xvector = mc.arch == Architecture::kFusion &&
                             model_->HasXVectorNet() && !mc.xvector_frozen;
  std::vector<nn::Parameter<TrainScalar>*> zeroed = params;
  if (mc.arch == Architecture::kFusion && model_->HasXVectorNet()) {
    // Frozen x-vector gradients are never applied but still zeroed so that
    // nothing accumulates across epochs.
    for (auto* p : model_->xvector().Params()) zeroed.push_back(p);
  }

  EpochStats stats;
  double loss_sum = 0.0;
  int errors = 0;
  const size_t batch = static_cast<size_t>(config_.train.batch_size);
  for (size_t start = 0, b = 0; start < chunks.size(); start += batch, ++b) {
    const size_t end = std::min(chunks.size(), start + batch);
    const auto scale = static_cast<TrainScalar>(1.0 / double(end - start));
    for (auto* p : zeroed) p->ZeroGrad();
    double batch_loss = 0.0;
    for (size_t i = start; i < end; ++i) {
      const ChunkRef& c = chunks[i];
      const UtteranceInput<TrainScalar>& in =
          train_set.utterances[c.utterance].input;
      const int target[1] = {c.label};
      Matrix<TrainScalar> logits;
      if (xvec_arch) {
        logits = model_->xvector().Forward(
            in.features.middleRows(c.offset, chunk_len));
      } else {
        RowVector<TrainScalar> port;
        if (mc.arch == Architecture::kFusion) {
          port = joint_xvector ? model_->xvector().Embed(in.features)
                               : port_cache_[c.utterance];
        }
        logits = model_->classifier().Forward(
            in.samples.segment(c.offset, chunk_len), port);
      }
      nn::LossAndGrad<TrainScalar> lg =
          nn::SoftmaxCrossEntropy<TrainScalar>(logits, target);
      if (!std::isfinite(static_cast<double>(lg.loss)) || !AllFinite(logits)) {
        throw NumericalError("non-finite loss in batch " + std::to_string(b) +
                             " of epoch " + std::to_string(epoch_ + 1));
      }
      batch_loss += lg.loss;
      Eigen::Index arg = 0;
      logits.row(0).maxCoeff(&arg);
      if (arg != c.label) ++errors;
      lg.grad *= scale;
      if (xvec_arch) {
        model_->xvector().Backward(lg.grad);
      } else {
        const RowVector<TrainScalar> g_port =
            model_->classifier().Backward(lg.grad);
        if (joint_xvector) model_->xvector().BackwardFromEmbedding(g_port);
      }
    }
    loss_sum += batch_loss;
    adam_.Step(params);
  }
  stats.examples = static_cast<int>(chunks.size());
  stats.loss = loss_sum / stats.examples;
  stats.frame_error = static_cast<double>(errors) / stats.examples;
  return stats;
}

HistoryRecord Trainer::RunEpoch(const PreparedSet& train_set,
                                const EvalSet* eval) {
  const EpochStats s = TrainEpoch(train_set);
  ++epoch_;
  HistoryRecord r;
  r.epoch = epoch_;
  r.train_loss = s.loss;
  r.frame_error = s.frame_error;
  const int every = config_.train.eval_every;
  if (eval && every > 0 &&
      (epoch_ % every == 0 || epoch_ == config_.train.epochs)) {
    r.eer = EvaluateEer(model_.get(), *eval).eer;
  }
  history_.Append(r);
  return r;
}

void Trainer::Run(const PreparedSet& train_set, const EvalSet* eval,
                  const std::function<void(const Trainer&)>& on_epoch) {
  while (epoch_ < config_.train.epochs) {
    RunEpoch(train_set, eval);
    if (on_epoch) on_epoch(*this);
  }
}

void Trainer::SaveCheckpoint(std::ostream& os) const {
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  const std::string cfg = config_.ToText();
  os << "config " << std::count(cfg.begin(), cfg.end(), '\n') << '\n' << cfg;
  os << "speakers " << speakers_.size() << '\n';
  for (const std::string& s : speakers_) os << s << '\n';
  os << "epoch " << epoch_ << '\n';
  os << "rng " << rng_.State() << '\n';
  os << "adam_step " << adam_.step() << '\n';
  const std::string hist = history_.ToCsv();
  os << "history " << history_.records.size() << '\n' << hist;
  const auto params = AllParams();
  long n_records = static_cast<long>(params.size());
  for (const auto& kv : adam_.moments()) {
    (void)kv;
    n_records += 2;
  }
  os << "records " << n_records << '\n';
  for (const auto* p : params) nn::WriteParamRecord(os, p->name, p->value);
  for (const auto& [name, m] : adam_.moments()) {
    nn::WriteParamRecord(os, "adam.m." + name, m.first);
    nn::WriteParamRecord(os, "adam.v." + name, m.second);
  }
  os << "end\n";
}

void Trainer::SaveCheckpoint(const std::filesystem::path& path) const {
  std::ostringstream buf;
  SaveCheckpoint(buf);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << buf.str();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

struct CheckpointContents {
  ExperimentConfig config;
  std::vector<std::string> speakers;
  int epoch = 0;
  std::string rng_state;
  int64_t adam_step = 0;
  TrainHistory history;
  std::vector<nn::ParamRecord<TrainScalar>> records;
};

CheckpointContents ParseCheckpoint(std::istream& is) {
  CheckpointContents c;
  {
    const std::string line = ReadLine(is, "version line");
    std::istringstream ls(line);
    std::string magic;
    int version = -1;
    if (!(ls >> magic) || magic != kCheckpointMagic) {
      throw FormatError("not a spkfuse checkpoint");
    }
    if (!(ls >> version) || version != kCheckpointVersion) {
      throw VersionError("incompatible checkpoint version in '" + line +
                         "' (this build reads version " +
                         std::to_string(kCheckpointVersion) + ")");
    }
  }
  const long n_cfg = ReadCount(is, "config");
  std::string cfg;
  for (long i = 0; i < n_cfg; ++i) cfg += ReadLine(is, "config") + "\n";
  try {
    c.config.ApplyText(cfg, "checkpoint config");
  } catch (const ValidationError& e) {
    throw FormatError(e.what());
  }
  const long n_spk = ReadCount(is, "speakers");
  for (long i = 0; i < n_spk; ++i) c.speakers.push_back(ReadLine(is, "speaker"));
  c.epoch = static_cast<int>(ReadCount(is, "epoch"));
  {
    const std::string line = ReadLine(is, "rng state");
    if (line.rfind("rng ", 0) != 0) throw FormatError("checkpoint: bad rng line");
    c.rng_state = line.substr(4);
  }
  c.adam_step = ReadCount(is, "adam_step");
  const long n_hist = ReadCount(is, "history");
  std::string hist = ReadLine(is, "history") + "\n";
  for (long i = 0; i < n_hist; ++i) hist += ReadLine(is, "history") + "\n";
  c.history = TrainHistory::FromCsv(hist);
  if (static_cast<long>(c.history.records.size()) != n_hist) {
    throw FormatError("checkpoint: history length mismatch");
  }
  const long n_rec = ReadCount(is, "records");
  for (long i = 0; i < n_rec; ++i) {
    c.records.push_back(nn::ReadParamRecord<TrainScalar>(is));
  }
  if (ReadLine(is, "end marker") != "end") {
    throw FormatError("checkpoint: missing end marker");
  }
  char extra;
  if (is.get(extra)) throw FormatError("checkpoint: trailing data");
  return c;
}

}  // namespace

Trainer Trainer::LoadCheckpoint(std::istream& is) {
  CheckpointContents c = ParseCheckpoint(is);
  std::map<std::string, const Matrix<TrainScalar>*> by_name;
  for (const auto& r : c.records) {
    if (!by_name.emplace(r.name, &r.value).second) {
      throw FormatError("checkpoint: duplicate record " + r.name);
    }
  }
  Trainer t(c.config, c.speakers);
  if (t.config_.model.n_classes != c.config.model.n_classes) {
    throw FormatError("checkpoint: speaker list does not match n_classes");
  }
  size_t used = 0;
  for (nn::Parameter<TrainScalar>* p : t.AllParams()) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) {
      throw FormatError("checkpoint: missing parameter " + p->name);
    }
    if (it->second->rows() != p->value.rows() ||
        it->second->cols() != p->value.cols()) {
      throw FormatError("checkpoint: shape mismatch for " + p->name);
    }
    p->value = *it->second;
    ++used;
  }
  for (const auto& r : c.records) {
    if (r.name.rfind("adam.m.", 0) != 0) continue;
    const std::string name = r.name.substr(7);
    const auto v = by_name.find("adam.v." + name);
    if (v == by_name.end()) {
      throw FormatError("checkpoint: missing adam.v." + name);
    }
    t.adam_.moments()[name] = {r.value, *v->second};
    used += 2;
  }
  if (used != c.records.size()) {
    throw FormatError("checkpoint: unexpected records");
  }
  t.adam_.set_step(c.adam_step);
  try {
    t.rng_.SetState(c.rng_state);
  } catch (const std::exception&) {
    throw FormatError("checkpoint: bad rng state");
  }
  t.epoch_ = c.epoch;
  t.history_ = std::move(c.history);
  return t;
}

Trainer Trainer::LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return LoadCheckpoint(in);
}

std::map<std::string, Matrix<TrainScalar>> ReadCheckpointParams(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  CheckpointContents c = ParseCheckpoint(in);
  std::map<std::string, Matrix<TrainScalar>> out;
  for (auto& r : c.records) {
    if (r.name.rfind("adam.", 0) == 0) continue;
    out.emplace(r.name, std::move(r.value));
  }
  return out;
}

}  // namespace spkfuse
