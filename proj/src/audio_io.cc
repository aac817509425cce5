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


#include "spkfuse/audio_io.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>

#include "spkfuse/common.h"
#include "spkfuse/rng.h"

namespace spkfuse {

namespace fs = std::filesystem;

void WaveformBuffer::Validate() const {
  if (samples.empty()) throw DomainError("waveform has no samples");
  if (sample_rate_hz <= 0) throw DomainError("sample rate must be positive");
  for (double s : samples) {
    if (!std::isfinite(s) || s < -1.0 || s > 1.0) {
      throw DomainError("waveform sample outside [-1, 1]: " +
                        std::to_string(s));
    }
  }
}

namespace {

void PutU16(std::vector<uint8_t>* out, uint16_t v) {
  out->push_back(static_cast<uint8_t>(v & 0xFF));
  out->push_back(static_cast<uint8_t>(v >> 8));
}

void PutU32(std::vector<uint8_t>* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void PutTag(std::vector<uint8_t>* out, const char* tag) {
  out->insert(out->end(), tag, tag + 4);
}

uint16_t GetU16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint32_t GetU32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

int16_t Quantize(double x) {
  const double scaled = std::nearbyint(x * 32768.0);
  return static_cast<int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::string StripCr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

bool IsSkippable(const std::string& line) {
  return line.empty() || line[0] == '#';
}

}  // namespace

std::vector<uint8_t> EncodeWav(const WaveformBuffer& buffer) {
  if (buffer.sample_rate_hz <= 0) throw DomainError("sample rate must be positive");
  const uint32_t data_bytes = static_cast<uint32_t>(buffer.samples.size() * 2);
  std::vector<uint8_t> out;
  out.reserve(44 + data_bytes);
  PutTag(&out, "RIFF");
  PutU32(&out, 36 + data_bytes);
  PutTag(&out, "WAVE");
  PutTag(&out, "fmt ");
  PutU32(&out, 16);
  PutU16(&out, 1);  // PCM
  PutU16(&out, 1);  // mono
  PutU32(&out, static_cast<uint32_t>(buffer.sample_rate_hz));
  PutU32(&out, static_cast<uint32_t>(buffer.sample_rate_hz) * 2);
  PutU16(&out, 2);
  PutU16(&out, 16);
  PutTag(&out, "data");
  PutU32(&out, data_bytes);
  for (double s : buffer.samples) {
    PutU16(&out, static_cast<uint16_t>(Quantize(s)));
  }
  return out;
}

WaveformBuffer DecodeWav(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  uint16_t channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* hdr = bytes.data() + pos;
    const uint32_t size = GetU32(hdr + 4);
    const size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) {
        throw FormatError("truncated fmt chunk");
      }
      const uint16_t format = GetU16(bytes.data() + body);
      channels = GetU16(bytes.data() + body + 2);
      rate = GetU32(bytes.data() + body + 4);
      bits = GetU16(bytes.data() + body + 14);
      if (format != 1) {
        throw UnsupportedFormatError("unsupported WAV format code " +
                                     std::to_string(format) +
                                     " (only PCM is supported)");
      }
      if (channels != 1) {
        throw UnsupportedFormatError("unsupported channel count " +
                                     std::to_string(channels) +
                                     " (mono only)");
      }
      if (bits != 16) {
        throw UnsupportedFormatError("unsupported bit depth " +
                                     std::to_string(bits) + " (16-bit only)");
      }
      if (rate == 0) throw FormatError("sample rate of zero");
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk");
      if (body + size > bytes.size()) throw FormatError("truncated data chunk");
      if (size % 2 != 0) throw FormatError("odd data chunk length for 16-bit");
      WaveformBuffer buffer;
      buffer.sample_rate_hz = static_cast<int>(rate);
      buffer.samples.resize(size / 2);
      for (size_t i = 0; i < buffer.samples.size(); ++i) {
        const auto v = static_cast<int16_t>(GetU16(bytes.data() + body + 2 * i));
        buffer.samples[i] = v / 32768.0;
      }
      if (buffer.samples.empty()) throw FormatError("empty data chunk");
      return buffer;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

WaveformBuffer ReadWav(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  WaveformBuffer buffer;
  try {
    buffer = DecodeWav(bytes);
  } catch (const FormatError& e) {
    // Keep the concrete type; prepend the path.
    if (dynamic_cast<const UnsupportedFormatError*>(&e) != nullptr) {
      throw UnsupportedFormatError(path.string() + ": " + e.what());
    }
    throw FormatError(path.string() + ": " + e.what());
  }
  buffer.utterance_id = path.stem().string();
  return buffer;
}

void WriteWav(const WaveformBuffer& buffer, const fs::path& path) {
  const std::vector<uint8_t> bytes = EncodeWav(buffer);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

const char* SplitName(Split split) {
  return split == Split::kDev ? "dev" : "test";
}

void DatasetManifest::Validate() const {
  std::set<std::string> seen;
  std::map<std::string, int> per_speaker;
  for (const ManifestEntry& e : entries) {
    if (e.utterance_id.empty() || e.speaker_id.empty()) {
      throw ValidationError("manifest entry with empty id");
    }
    if (!seen.insert(e.utterance_id).second) {
      throw ValidationError("duplicate utterance id " + e.utterance_id);
    }
    ++per_speaker[e.speaker_id];
  }
  if (split == Split::kDev) {
    for (const auto& [spk, n] : per_speaker) {
      if (n < 2) {
        throw ValidationError("speaker " + spk +
                              " has fewer than 2 dev utterances");
      }
    }
  }
}

std::vector<std::string> DatasetManifest::Speakers() const {
  std::set<std::string> s;
  for (const ManifestEntry& e : entries) s.insert(e.speaker_id);
  return {s.begin(), s.end()};
}

std::map<std::string, int> DatasetManifest::SpeakerIndex() const {
  std::map<std::string, int> index;
  int next = 0;
  for (const std::string& spk : Speakers()) index[spk] = next++;
  return index;
}

fs::path DatasetManifest::AudioPath(const ManifestEntry& entry) const {
  const fs::path p(entry.audio_path);
  return p.is_absolute() ? p : root / p;
}

const ManifestEntry* DatasetManifest::Find(const std::string& id) const {
  for (const ManifestEntry& e : entries) {
    if (e.utterance_id == id) return &e;
  }
  return nullptr;
}

DatasetManifest ReadManifest(const fs::path& path, Split split) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  DatasetManifest manifest;
  manifest.split = split;
  manifest.root = path.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = StripCr(line);
    if (IsSkippable(line)) continue;
    const std::vector<std::string> f = SplitTabs(line);
    if (f.size() != 3) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 3 tab-separated fields");
    }
    manifest.entries.push_back({f[0], f[1], f[2]});
  }
  manifest.Validate();
  return manifest;
}

void WriteManifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << "# utterance_id\tspeaker_id\trelative_path (split: "
      << SplitName(manifest.split) << ")\n";
  for (const ManifestEntry& e : manifest.entries) {
    out << e.utterance_id << '\t' << e.speaker_id << '\t' << e.audio_path
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::pair<DatasetManifest, DatasetManifest> SplitBySpeaker(
    const DatasetManifest& manifest, int test_per_speaker) {
  if (test_per_speaker < 0) throw DomainError("negative test count");
  std::map<std::string, int> total;
  for (const ManifestEntry& e : manifest.entries) ++total[e.speaker_id];
  DatasetManifest dev, test;
  dev.split = Split::kDev;
  test.split = Split::kTest;
  dev.root = test.root = manifest.root;
  std::map<std::string, int> seen;
  for (const ManifestEntry& e : manifest.entries) {
    const int k = seen[e.speaker_id]++;
    if (k >= total[e.speaker_id] - test_per_speaker) {
      test.entries.push_back(e);
    } else {
      dev.entries.push_back(e);
    }
  }
  return {dev, test};
}

int TrialList::CountLabel(TrialLabel label) const {
  return static_cast<int>(std::count_if(
      trials.begin(), trials.end(),
      [label](const Trial& t) { return t.label == label; }));
}

void TrialList::Validate(const DatasetManifest* manifest) const {
  for (const Trial& t : trials) {
    if (t.enroll_id == t.test_id) {
      throw ValidationError("trial pairs utterance " + t.enroll_id +
                            " with itself");
    }
    if (manifest != nullptr) {
      for (const std::string* id : {&t.enroll_id, &t.test_id}) {
        if (manifest->Find(*id) == nullptr) {
          throw LookupError("trial utterance not in manifest: " + *id);
        }
      }
    }
  }
}

TrialList ReadTrials(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trial list " + path.string());
  TrialList list;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = StripCr(line);
    if (IsSkippable(line)) continue;
    const std::vector<std::string> f = SplitTabs(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 3) {
      throw FormatError(where + ": expected 3 tab-separated fields");
    }
    Trial t{f[0], f[1], TrialLabel::kSame};
    if (f[2] == "same") {
      t.label = TrialLabel::kSame;
    } else if (f[2] == "different") {
      t.label = TrialLabel::kDifferent;
    } else {
      throw FormatError(where + ": label must be 'same' or 'different'");
    }
    list.trials.push_back(std::move(t));
  }
  list.Validate();
  return list;
}

void WriteTrials(const TrialList& list, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write trial list " + path.string());
  for (const Trial& t : list.trials) {
    out << t.enroll_id << '\t' << t.test_id << '\t'
        << (t.label == TrialLabel::kSame ? "same" : "different") << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

TrialList MakeTrials(const DatasetManifest& manifest, int n_same, int n_diff,
                     uint64_t seed) {
  if (n_same < 0 || n_diff < 0) throw DomainError("negative trial count");
  const auto& e = manifest.entries;
  if (manifest.Speakers().size() < 2) {
    throw CapacityError("need at least 2 speakers to make trials");
  }
  std::vector<std::pair<int, int>> same, diff;
  for (size_t i = 0; i < e.size(); ++i) {
    for (size_t j = i + 1; j < e.size(); ++j) {
      auto& bucket = e[i].speaker_id == e[j].speaker_id ? same : diff;
      bucket.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  if (static_cast<size_t>(n_same) > same.size()) {
    throw CapacityError("requested " + std::to_string(n_same) +
                        " same-speaker trials but only " +
                        std::to_string(same.size()) + " pairs exist");
  }
  if (static_cast<size_t>(n_diff) > diff.size()) {
    throw CapacityError("requested " + std::to_string(n_diff) +
                        " different-speaker trials but only " +
                        std::to_string(diff.size()) + " pairs exist");
  }
  Rng rng(MixSeed(seed, 0x7472));
  rng.Shuffle(&same);
  rng.Shuffle(&diff);
  TrialList list;
  for (int k = 0; k < n_same; ++k) {
    list.trials.push_back({e[same[k].first].utterance_id,
                           e[same[k].second].utterance_id, TrialLabel::kSame});
  }
  for (int k = 0; k < n_diff; ++k) {
    list.trials.push_back({e[diff[k].first].utterance_id,
                           e[diff[k].second].utterance_id,
                           TrialLabel::kDifferent});
  }
  return list;
}

SyntheticSpeaker MakeSyntheticSpeaker(uint64_t seed, int speaker_index) {
  Rng rng(MixSeed(seed, static_cast<uint64_t>(speaker_index)));
  SyntheticSpeaker spk;
  spk.f0_hz = 90.0 * std::exp(rng.Uniform() * std::log(240.0 / 90.0));
  spk.tract_scale = rng.Uniform(0.75, 1.4);
  spk.bandwidth_scale = rng.Uniform(0.8, 1.3);
  spk.glottal_rolloff = rng.Uniform(0.8, 1.6);
  return spk;
}

namespace {

// Average adult formants (F1, F2, F3) of ten vowels, Hz.
constexpr double kVowels[10][3] = {
    {270, 2290, 3010}, {390, 1990, 2550}, {530, 1840, 2480},
    {660, 1720, 2410}, {730, 1090, 2440}, {570, 840, 2410},
    {440, 1020, 2240}, {300, 870, 2240},  {640, 1190, 2390},
    {490, 1350, 1690}};
constexpr double kBaseBandwidth[3] = {90.0, 120.0, 170.0};

// Magnitude envelope of three resonances at frequency f.
double FormantGain(const double* formants, const double* bandwidths,
                   double f) {
  double g = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = (f - formants[k]) / (0.5 * bandwidths[k]);
    g += 1.0 / std::sqrt(1.0 + d * d);
  }
  return g;
}

struct Syllable {
  double start_s;
  double length_s;
  int vowel;
  double loudness;
};

}  // namespace

WaveformBuffer SynthesizeUtterance(const SyntheticSpeaker& spk, uint64_t seed,
                                   int speaker_index, int utterance_index,
                                   double duration_s, int sample_rate_hz,
                                   double variability) {
  if (!(variability >= 0.0)) throw DomainError("variability must be >= 0");
  const double two_pi = 2.0 * std::numbers::pi;
  const auto n = static_cast<size_t>(std::llround(duration_s * sample_rate_hz));
  if (n == 0) throw DomainError("utterance duration rounds to zero samples");
  const double max_hz = std::min(4000.0, 0.45 * sample_rate_hz);

  Rng rng(MixSeed(MixSeed(seed, static_cast<uint64_t>(speaker_index)),
                  0x5500000000ull + static_cast<uint64_t>(utterance_index)));
  // Syllables: a vowel each, separated by short pauses.
  std::vector<Syllable> syl;
  for (double t = rng.Uniform(0.0, 0.1); t < duration_s;) {
    Syllable s{t, rng.Uniform(0.12, 0.3),
               static_cast<int>(rng.UniformInt(10)), rng.Uniform(0.4, 1.0)};
    syl.push_back(s);
    t += s.length_s + rng.Uniform(0.02, 0.12);
  }
  // Pitch: per-utterance register, declination and a slow contour.
  const double f0_base =
      spk.f0_hz * std::exp(variability * 0.1 * rng.Uniform(-1, 1));
  const double declination = rng.Uniform(-0.15, 0.05);
  const double contour_hz = rng.Uniform(0.5, 2.0);
  const double contour_depth = rng.Uniform(0.02, 0.1);
  const double contour_phase = rng.Uniform(0.0, two_pi);
  // Channel: spectral tilt plus one peaking resonance.
  const double tilt_db_per_octave = variability * 3.0 * rng.Uniform(-1, 1);
  const double eq_hz = rng.Uniform(400.0, 3500.0);
  const double eq_gain =
      std::pow(10.0, variability * 4.5 * rng.Uniform(-1, 1) / 20.0);
  const double eq_width = rng.Uniform(0.3, 0.8);  // octaves
  const double snr_db = rng.Uniform(10.0, 30.0);
  const double peak = rng.Uniform(0.3, 0.9);

  auto channel_gain = [&](double f) {
    const double oct = std::log2(f / 1000.0);
    const double d = std::log2(f / eq_hz) / eq_width;
    return std::pow(10.0, tilt_db_per_octave * oct / 20.0) *
           (1.0 + (eq_gain - 1.0) * std::exp(-0.5 * d * d));
  };

  double bw[3];
  for (int k = 0; k < 3; ++k) bw[k] = kBaseBandwidth[k] * spk.bandwidth_scale;
  std::vector<double> harmonic_phase(64);
  for (double& p : harmonic_phase) p = rng.Uniform(0.0, two_pi);

  std::vector<double> source(64);
  for (int h = 1; h < 64; ++h) source[h] = std::pow(h, -spk.glottal_rolloff);

  // Harmonic amplitudes change slowly; they are refreshed every 5 ms.
  const size_t block = std::max<size_t>(1, sample_rate_hz / 200);
  std::vector<double> amp(64, 0.0);
  std::vector<double> x(n, 0.0);
  double f0_phase = 0.0;  // integral of the instantaneous f0, in cycles
  size_t cur = 0, amp_syllable = SIZE_MAX;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate_hz;
    const double f0 =
        f0_base * (1.0 + declination * t / duration_s) *
        (1.0 + contour_depth * std::sin(two_pi * contour_hz * t +
                                        contour_phase));
    f0_phase += f0 / sample_rate_hz;
    while (cur + 1 < syl.size() && t >= syl[cur + 1].start_s) ++cur;
    const Syllable& s = syl[cur];
    const double u = (t - s.start_s) / s.length_s;
    if (u < 0.0 || u >= 1.0) continue;
    if (i % block == 0 || cur != amp_syllable) {
      amp_syllable = cur;
      // Formants glide from the previous vowel over the first 30%.
      const Syllable& prev = cur > 0 ? syl[cur - 1] : s;
      const double mix = std::min(1.0, u / 0.3);
      double fm[3];
      for (int k = 0; k < 3; ++k) {
        fm[k] = spk.tract_scale * ((1.0 - mix) * kVowels[prev.vowel][k] +
                                   mix * kVowels[s.vowel][k]);
      }
      for (int h = 1; h < 64; ++h) {
        const double fh = h * f0;
        amp[h] = fh < max_hz
                     ? source[h] * FormantGain(fm, bw, fh) * channel_gain(fh)
                     : 0.0;
      }
    }
    const double env = s.loudness * std::sin(std::numbers::pi * u);
    double v = 0.0;
    for (int h = 1; h < 64 && amp[h] != 0.0; ++h) {
      v += amp[h] * std::sin(two_pi * h * f0_phase + harmonic_phase[h]);
    }
    x[i] = env * v;
  }
  double power = 0.0;
  for (double v : x) power += v * v;
  power /= static_cast<double>(n);
  const double noise_std = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  double max_abs = 0.0;
  for (double& v : x) {
    v += noise_std * rng.Normal();
    max_abs = std::max(max_abs, std::abs(v));
  }
  WaveformBuffer buffer;
  buffer.sample_rate_hz = sample_rate_hz;
  buffer.samples = std::move(x);
  if (max_abs > 0.0) {
    for (double& v : buffer.samples) v *= peak / max_abs;
  }
  return buffer;
}

DatasetManifest GenerateSyntheticCorpus(const SyntheticCorpusOptions& opt,
                                        const fs::path& out_dir) {
  if (opt.n_speakers < 1 || opt.utterances_per_speaker < 1) {
    throw DomainError("speaker and utterance counts must be >= 1");
  }
  if (!(opt.duration_s > 0.0) || opt.sample_rate_hz <= 0) {
    throw DomainError("duration and sample rate must be positive");
  }
  std::error_code ec;
  fs::create_directories(out_dir / "wav", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.split = Split::kDev;
  manifest.root = out_dir;
  char spk_id[32], utt_id[48];
  for (int s = 0; s < opt.n_speakers; ++s) {
    std::snprintf(spk_id, sizeof(spk_id), "spk%03d", s);
    fs::create_directories(out_dir / "wav" / spk_id, ec);
    if (ec) throw IoError("cannot create speaker directory: " + ec.message());
    const SyntheticSpeaker speaker = MakeSyntheticSpeaker(opt.seed, s);
    for (int u = 0; u < opt.utterances_per_speaker; ++u) {
      std::snprintf(utt_id, sizeof(utt_id), "%s_utt%03d", spk_id, u);
      WaveformBuffer wav = SynthesizeUtterance(
          speaker, opt.seed, s, u, opt.duration_s, opt.sample_rate_hz,
          opt.variability);
      wav.utterance_id = utt_id;
      const std::string rel =
          (fs::path("wav") / spk_id / (std::string(utt_id) + ".wav"))
              .generic_string();
      WriteWav(wav, out_dir / rel);
      manifest.entries.push_back({utt_id, spk_id, rel});
    }
  }
  WriteManifest(manifest, out_dir / "manifest.tsv");
  return manifest;
}

}  // namespace spkfuse
