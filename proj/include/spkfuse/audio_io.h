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


// Waveform files, dataset manifests, trial lists, and the synthetic
// multi-speaker corpus used for desk-scale experiments.

#ifndef SPKFUSE_AUDIO_IO_H_
#define SPKFUSE_AUDIO_IO_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace spkfuse {

struct WaveformBuffer {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate_hz = 16000;
  std::string utterance_id;

  // Throws DomainError if empty, non-finite, out of range, or rate <= 0.
  void Validate() const;
  double DurationSeconds() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

// 16-bit mono PCM RIFF/WAVE only. Samples are mapped to [-1, 1) by division
// by 32768. Throws FormatError on a malformed container and
// UnsupportedFormatError on anything other than mono 16-bit PCM.
WaveformBuffer ReadWav(const std::filesystem::path& path);

// Writes 16-bit mono PCM. Values are rounded to the nearest step of 1/32768
// and clipped to [-32768, 32767]. Throws IoError if the file can't be written.
void WriteWav(const WaveformBuffer& buffer, const std::filesystem::path& path);

// In-memory variants used by the file functions (and by tests).
std::vector<uint8_t> EncodeWav(const WaveformBuffer& buffer);
WaveformBuffer DecodeWav(const std::vector<uint8_t>& bytes);

enum class Split { kDev, kTest };

const char* SplitName(Split split);

struct ManifestEntry {
  std::string utterance_id;
  std::string speaker_id;
  std::string audio_path;  // relative to DatasetManifest::root
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  Split split = Split::kDev;
  std::filesystem::path root;  // directory relative paths resolve against

  // Checks unique utterance ids and, for the dev split, at least two
  // utterances per speaker. Throws ValidationError.
  void Validate() const;

  // Sorted unique speaker ids.
  std::vector<std::string> Speakers() const;
  // speaker id -> dense class index assigned by sorted order.
  std::map<std::string, int> SpeakerIndex() const;
  std::filesystem::path AudioPath(const ManifestEntry& entry) const;
  const ManifestEntry* Find(const std::string& utterance_id) const;
};

// Line format: utterance_id<TAB>speaker_id<TAB>relative_path; lines starting
// with '#' and blank lines are ignored.
DatasetManifest ReadManifest(const std::filesystem::path& path,
                             Split split = Split::kDev);
void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

// Moves the last `test_per_speaker` utterances (in manifest order) of every
// speaker into a test manifest; the rest form the dev manifest.
std::pair<DatasetManifest, DatasetManifest> SplitBySpeaker(
    const DatasetManifest& manifest, int test_per_speaker);

enum class TrialLabel { kSame, kDifferent };

struct Trial {
  std::string enroll_id;
  std::string test_id;
  TrialLabel label = TrialLabel::kSame;
};

struct TrialList {
  std::vector<Trial> trials;

  int CountLabel(TrialLabel label) const;
  // No self-pairs; every id present in `manifest` when given.
  void Validate(const DatasetManifest* manifest = nullptr) const;
};

// Line format: enroll_id<TAB>test_id<TAB>{same|different}.
TrialList ReadTrials(const std::filesystem::path& path);
void WriteTrials(const TrialList& trials, const std::filesystem::path& path);

// Samples exactly n_same same-speaker and n_diff different-speaker unordered
// pairs without replacement. Throws CapacityError when the manifest cannot
// supply that many distinct pairs.
TrialList MakeTrials(const DatasetManifest& manifest, int n_same, int n_diff,
                     uint64_t seed);

struct SyntheticCorpusOptions {
  int n_speakers = 20;
  int utterances_per_speaker = 10;
  double duration_s = 2.0;
  int sample_rate_hz = 16000;
  uint64_t seed = 1;
  // Scales within-speaker variation (pitch register, channel coloration);
  // 0 gives every utterance of a speaker the same voice and channel.
  double variability = 1.0;
};

// Per-speaker voice. Utterances draw vowels from a shared table; the
// speaker scales their formants and shapes the glottal source.
struct SyntheticSpeaker {
  double f0_hz = 0.0;            // median fundamental
  double tract_scale = 1.0;      // formant frequency multiplier
  double bandwidth_scale = 1.0;  // formant bandwidth multiplier
  double glottal_rolloff = 1.0;  // harmonic h has amplitude h^-rolloff
};

// Deterministic function of (seed, speaker index).
SyntheticSpeaker MakeSyntheticSpeaker(uint64_t seed, int speaker_index);

// Renders one utterance of `speaker` (deterministic in all arguments): a
// random syllable sequence with per-utterance pitch, loudness dynamics,
// channel coloration and noise level.
WaveformBuffer SynthesizeUtterance(const SyntheticSpeaker& speaker,
                                   uint64_t seed, int speaker_index,
                                   int utterance_index, double duration_s,
                                   int sample_rate_hz,
                                   double variability = 1.0);

// Writes wav/<speaker>/<utterance>.wav files and manifest.tsv under out_dir
// and returns the manifest (dev split, root = out_dir).
DatasetManifest GenerateSyntheticCorpus(const SyntheticCorpusOptions& options,
                                        const std::filesystem::path& out_dir);

}  // namespace spkfuse

#endif  // SPKFUSE_AUDIO_IO_H_
