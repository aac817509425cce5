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


#include "spkfuse/cli.h"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "spkfuse/audio_io.h"
#include "spkfuse/evaluation.h"
#include "spkfuse/training.h"

namespace spkfuse {
namespace cli {
namespace {

namespace fs = std::filesystem;

// Raised for bad flags or config keys; maps to the usage exit code.
class UsageError : public Error {
 public:
  using Error::Error;
};

constexpr const char* kFormatsHelp = R"(File formats:
  manifest      utterance_id<TAB>speaker_id<TAB>path, path relative to the
                manifest's directory; '#' lines are comments.
  trials        enroll_id<TAB>test_id<TAB>same|different
  wav           RIFF/WAVE, 16-bit signed little-endian PCM, mono.
  config        'key = value' lines, '#' comments; unknown keys are errors.
                --set key=value overrides the file.
  embeddings    text: utterance_id then dim decimal floats, space separated,
                one record per line.
                binary: ASCII header line "n dim\n", then per record the
                utterance id and "\n" followed by dim little-endian float32.
  scores        enroll_id<TAB>test_id<TAB>same|different<TAB>score
  det csv       header "threshold,far,frr", fractions, one row per threshold.
  history.csv   header "epoch,train_loss,frame_error,eer"; eer is blank on
                epochs without evaluation.
  checkpoint    line "spkfuse-checkpoint 1"; "config N" + N config lines;
                "speakers N" + N ids; "epoch E"; "rng STATE"; "adam_step S";
                "history N" + CSV header + N rows; "records N" + N records
                ("name rows cols\n" + rows*cols little-endian float32,
                row-major); "end".
Exit codes: 0 success, 1 usage, 2 data or validation error, 3 numerical
failure (non-finite loss).)";

// Exclusive marker file in an output directory, removed on destruction.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".spkfuse.lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      throw IoError("output directory " + dir.string() +
                    " is locked by another run (" + path_.string() + ")");
    }
    ::close(fd);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::optional<EmbeddingStore> MaybeReadEmbeddings(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return ReadEmbeddings(path);
}

int CountSamePairs(const DatasetManifest& m) {
  std::map<std::string, int> per;
  for (const ManifestEntry& e : m.entries) ++per[e.speaker_id];
  int n = 0;
  for (const auto& [spk, k] : per) n += k * (k - 1) / 2;
  return n;
}

int CountDiffPairs(const DatasetManifest& m) {
  const long total = static_cast<long>(m.entries.size());
  return static_cast<int>(total * (total - 1) / 2) - CountSamePairs(m);
}

struct SynthArgs {
  std::string out;
  int speakers = 20;
  int utts = 10;
  double duration = 2.0;
  uint64_t seed = 1;
  double variability = 1.0;
  int test_per_speaker = 4;
  int same_trials = -1;
  int diff_trials = -1;
};

int CmdSynth(const SynthArgs& a, std::ostream& out) {
  SyntheticCorpusOptions opt;
  opt.n_speakers = a.speakers;
  opt.utterances_per_speaker = a.utts;
  opt.duration_s = a.duration;
  opt.seed = a.seed;
  opt.variability = a.variability;
  if (a.test_per_speaker > 0 && a.utts - a.test_per_speaker < 2) {
    throw UsageError("--test-per-speaker must leave at least 2 dev "
                     "utterances per speaker");
  }
  const fs::path dir(a.out);
  EnsureDir(dir);
  const DatasetManifest all = GenerateSyntheticCorpus(opt, dir);
  out << "speakers " << all.Speakers().size() << "\n"
      << "utterances " << all.entries.size() << "\n";
  if (a.test_per_speaker <= 0) return kExitOk;
  auto [dev, test] = SplitBySpeaker(all, a.test_per_speaker);
  test.split = Split::kTest;
  WriteManifest(dev, dir / "dev.tsv");
  WriteManifest(test, dir / "test.tsv");
  const int n_same = a.same_trials >= 0 ? a.same_trials : CountSamePairs(test);
  const int n_diff = a.diff_trials >= 0
                         ? a.diff_trials
                         : std::min(4 * n_same, CountDiffPairs(test));
  const TrialList trials = MakeTrials(test, n_same, n_diff, a.seed);
  WriteTrials(trials, dir / "trials.tsv");
  out << "dev utterances " << dev.entries.size() << "\n"
      << "test utterances " << test.entries.size() << "\n"
      << "trials " << trials.trials.size() << " (same " << n_same
      << ", different " << n_diff << ")\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string arch;
  int epochs = 0;
  std::string train_manifest;
  std::string test_manifest;
  std::string trials;
  std::string out;
  bool resume = false;
};

ExperimentConfig BuildConfig(const std::string& config_path,
                             const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) {
        throw UsageError("config file not found: " + config_path);
      }
      cfg = ReadExperimentConfig(config_path);
    }
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw UsageError("--set expects key=value, got '" + kv + "'");
      }
      cfg.Set(kv.substr(0, eq), kv.substr(eq + 1));
    }
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

int CmdTrain(const TrainArgs& a, std::ostream& out) {
  ExperimentConfig cfg = BuildConfig(a.config, a.overrides);
  if (!a.arch.empty()) cfg.model.arch = ParseArchitecture(a.arch);
  if (a.epochs > 0) cfg.train.epochs = a.epochs;

  const fs::path dir(a.out);
  EnsureDir(dir);
  DirLock lock(dir);
  const fs::path ckpt = dir / "checkpoint.ckpt";
  const fs::path history = dir / "history.csv";

  DatasetManifest dev = ReadManifest(a.train_manifest, Split::kDev);
  dev.Validate();
  std::optional<Trainer> trainer;
  if (a.resume && fs::exists(ckpt)) {
    trainer.emplace(Trainer::LoadCheckpoint(ckpt));
    if (a.epochs > 0) trainer->set_epochs(a.epochs);
    out << "resuming " << ckpt.string() << " at epoch " << trainer->epoch()
        << "\n";
  }
  const ExperimentConfig& effective = trainer ? trainer->config() : cfg;
  if (!trainer) {
    try {
      effective.Validate();
    } catch (const ValidationError& e) {
      throw UsageError(e.what());
    }
  }
  const std::optional<EmbeddingStore> external =
      MaybeReadEmbeddings(effective.xvector_embeddings);
  const EmbeddingStore* ext = external ? &*external : nullptr;
  const PreparedSet train_set =
      PrepareUtterances(dev, effective.model.features,
                        trainer ? &trainer->speakers() : nullptr, ext);
  if (!trainer) trainer.emplace(cfg, train_set);

  std::optional<EvalSet> eval;
  if (!a.test_manifest.empty() || !a.trials.empty()) {
    if (a.test_manifest.empty() || a.trials.empty()) {
      throw UsageError("--test-manifest and --trials must be given together");
    }
    const DatasetManifest test = ReadManifest(a.test_manifest, Split::kTest);
    test.Validate();
    eval.emplace(PrepareEvalSet(test, ReadTrials(a.trials),
                                effective.model.features, ext));
  }
  WriteText(dir / "config.txt", trainer->config().ToText());
  out << "training " << ArchitectureName(trainer->config().model.arch)
      << " on " << train_set.utterances.size() << " utterances of "
      << trainer->speakers().size() << " speakers\n";
  trainer->Run(train_set, eval ? &*eval : nullptr, [&](const Trainer& t) {
    const HistoryRecord& r = t.history().records.back();
    char line[160];
    std::snprintf(line, sizeof(line),
                  "epoch %d loss %.4f frame_error %.4f", r.epoch,
                  r.train_loss, r.frame_error);
    out << line;
    if (r.eer) {
      std::snprintf(line, sizeof(line), " eer %.2f%%", 100.0 * *r.eer);
      out << line;
    }
    out << "\n";
    t.SaveCheckpoint(ckpt);
    WriteHistoryCsv(t.history(), history);
  });
  // A resumed run that was already complete still leaves both files.
  trainer->SaveCheckpoint(ckpt);
  WriteHistoryCsv(trainer->history(), history);
  return kExitOk;
}

struct EmbedArgs {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  std::string format = "text";
  std::string xvector_embeddings;
};

void WriteEmbeddings(const EmbeddingStore& store, const std::string& path,
                     const std::string& format) {
  if (format == "binary") {
    WriteEmbeddingsBinary(store, path);
  } else {
    WriteEmbeddingsText(store, path);
  }
}

int CmdEmbed(const EmbedArgs& a, std::ostream& out) {
  if (!fs::exists(a.checkpoint)) {
    throw IoError("checkpoint not found: " + a.checkpoint);
  }
  Trainer t = Trainer::LoadCheckpoint(fs::path(a.checkpoint));
  const DatasetManifest m = ReadManifest(a.manifest, Split::kTest);
  const std::string ext_path = a.xvector_embeddings.empty()
                                   ? t.config().xvector_embeddings
                                   : a.xvector_embeddings;
  const std::optional<EmbeddingStore> ext = MaybeReadEmbeddings(ext_path);
  const PreparedSet set = PrepareUtterances(m, t.config().model.features,
                                            nullptr, ext ? &*ext : nullptr);
  const EmbeddingStore store = ExtractEmbeddings(&t.model(), set);
  WriteEmbeddings(store, a.out, a.format);
  out << "wrote " << store.size() << " embeddings of dim " << store.Dim()
      << " to " << a.out << "\n";
  return kExitOk;
}

int CmdImport(const std::string& in, const std::string& out_path,
              const std::string& format, std::ostream& out) {
  const EmbeddingStore store = ReadEmbeddings(in);
  out << "imported " << store.size() << " embeddings of dim " << store.Dim()
      << "\n";
  if (!out_path.empty()) WriteEmbeddings(store, out_path, format);
  return kExitOk;
}

int CmdScore(const std::string& emb, const std::string& trials,
             const std::string& out_path, std::ostream& out) {
  const EmbeddingStore store = ReadEmbeddings(emb);
  const TrialList list = ReadTrials(trials);
  list.Validate();
  const ScoreSet scores = ScoreTrials(store, list);
  WriteScores(scores, out_path);
  out << "scored " << scores.scores.size() << " trials\n";
  return kExitOk;
}

int CmdEer(const std::string& scores_path, const std::string& det,
           std::ostream& out) {
  const ScoreSet scores = ReadScores(scores_path);
  const EerResult r = ComputeEer(scores);
  if (!det.empty()) WriteDetCsv(DetPoints(scores), det);
  char line[64];
  std::snprintf(line, sizeof(line), "EER %.2f%%\n", 100.0 * r.eer);
  out << line;
  return kExitOk;
}

int CmdInspect(const std::string& checkpoint, const std::string& response,
               int n_fft, std::ostream& out) {
  if (!fs::exists(checkpoint)) {
    throw IoError("checkpoint not found: " + checkpoint);
  }
  Trainer t = Trainer::LoadCheckpoint(fs::path(checkpoint));
  if (!t.model().HasSinc()) {
    throw ValidationError("no sinc layer in " + checkpoint + " (" +
                          ArchitectureName(t.config().model.arch) + " model)");
  }
  auto& sinc = t.model().classifier().sincnet().sinc();
  const auto& bank = sinc.bank();
  const double sr = t.config().model.sincnet.sample_rate_hz;
  const SincParams<TrainScalar> p = sinc.CurrentParams();
  out << "filter_index\tf1_hz\tf2_hz\n";
  char line[96];
  for (int i = 0; i < p.NumFilters(); ++i) {
    const Cutoffs<double> c = ConstrainCutoffs<double>(p.raw_low[i],
                                                       p.raw_band[i]);
    std::snprintf(line, sizeof(line), "%d\t%.2f\t%.2f\n", i, c.low * sr,
                  c.high * sr);
    out << line;
  }
  if (!response.empty()) {
    const Matrix<double> mag = bank.FrequencyResponse(n_fft);
    std::ofstream csv(response, std::ios::binary);
    if (!csv) throw IoError("cannot write " + response);
    csv << "filter_index,frequency_hz,magnitude\n";
    for (Eigen::Index i = 0; i < mag.rows(); ++i) {
      for (Eigen::Index k = 0; k < mag.cols(); ++k) {
        std::snprintf(line, sizeof(line), "%ld,%.4f,%.9g\n",
                      static_cast<long>(i), k * sr / n_fft, mag(i, k));
        csv << line;
      }
    }
    if (!csv) throw IoError("write failed: " + response);
  }
  return kExitOk;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"spkfuse: SincNet / x-vector speaker embedding toolkit",
               "spkfuse"};
  app.footer(kFormatsHelp);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic corpus");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--speakers", synth.speakers, "Number of speakers")
      ->check(CLI::PositiveNumber);
  s->add_option("--utts", synth.utts, "Utterances per speaker")
      ->check(CLI::PositiveNumber);
  s->add_option("--duration", synth.duration, "Utterance length in seconds")
      ->check(CLI::PositiveNumber);
  s->add_option("--seed", synth.seed, "Random seed");
  s->add_option("--variability", synth.variability,
                "Within-speaker variation scale")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--test-per-speaker", synth.test_per_speaker,
                "Utterances per speaker held out for testing (0: no split)")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--same-trials", synth.same_trials,
                "Same-speaker trials (default: all pairs)");
  s->add_option("--diff-trials", synth.diff_trials,
                "Different-speaker trials (default: 4x same)");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--config", train.config, "Config file");
  t->add_option("--set", train.overrides, "Config override key=value");
  t->add_option("--arch", train.arch, "Architecture")
      ->check(CLI::IsMember({"sincnet", "xvector", "fusion"}));
  t->add_option("--epochs", train.epochs, "Total epochs")
      ->check(CLI::PositiveNumber);
  t->add_option("--train-manifest", train.train_manifest, "Dev manifest")
      ->required();
  t->add_option("--test-manifest", train.test_manifest,
                "Test manifest for per-epoch EER");
  t->add_option("--trials", train.trials, "Trial list for per-epoch EER");
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_flag("--resume", train.resume,
              "Continue from the checkpoint in --out if present");

  EmbedArgs embed;
  auto* e = app.add_subcommand("embed", "Extract utterance embeddings");
  e->add_option("--checkpoint", embed.checkpoint, "Model checkpoint")
      ->required();
  e->add_option("--manifest", embed.manifest, "Utterances to embed")
      ->required();
  e->add_option("--out", embed.out, "Embedding file")->required();
  e->add_option("--format", embed.format, "text or binary")
      ->check(CLI::IsMember({"text", "binary"}));
  e->add_option("--xvector-embeddings", embed.xvector_embeddings,
                "External x-vectors for a fusion model");

  std::string imp_in, imp_out, imp_format = "text";
  auto* im = app.add_subcommand("import-embeddings",
                                "Validate (and convert) an embedding file");
  im->add_option("--in", imp_in, "Embedding file (text or binary)")
      ->required();
  im->add_option("--out", imp_out, "Optional re-encoded copy");
  im->add_option("--format", imp_format, "text or binary")
      ->check(CLI::IsMember({"text", "binary"}));

  std::string sc_emb, sc_trials, sc_out;
  auto* sc = app.add_subcommand("score", "Cosine-score a trial list");
  sc->add_option("--embeddings", sc_emb, "Embedding file")->required();
  sc->add_option("--trials", sc_trials, "Trial list")->required();
  sc->add_option("--out", sc_out, "Score file")->required();

  std::string eer_scores, eer_det;
  auto* er = app.add_subcommand("eer", "Equal error rate of a score file");
  er->add_option("--scores", eer_scores, "Score file")->required();
  er->add_option("--det", eer_det, "DET curve CSV output");

  std::string in_ckpt, in_resp;
  int in_nfft = 512;
  auto* in = app.add_subcommand("inspect-filters",
                                "Print learned sinc band edges");
  in->add_option("--checkpoint", in_ckpt, "Model checkpoint")->required();
  in->add_option("--response", in_resp, "Frequency response CSV output");
  in->add_option("--n-fft", in_nfft, "FFT size for the response")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*s) return CmdSynth(synth, out);
    if (*t) return CmdTrain(train, out);
    if (*e) return CmdEmbed(embed, out);
    if (*im) return CmdImport(imp_in, imp_out, imp_format, out);
    if (*sc) return CmdScore(sc_emb, sc_trials, sc_out, out);
    if (*er) return CmdEer(eer_scores, eer_det, out);
    if (*in) return CmdInspect(in_ckpt, in_resp, in_nfft, out);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& ex) {
    err << "numerical failure: " << ex.what() << "\n";
    return kExitNumerical;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int Run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return Run(args, out, err);
}

}  // namespace cli
}  // namespace spkfuse
