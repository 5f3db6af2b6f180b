// Copyright 2026 The MPKM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mpkm/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mpkm::audio {

namespace {

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)] = {};
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

double sinc(double t) {
  if (t == 0.0) return 1.0;
  const double pt = std::numbers::pi * t;
  return std::sin(pt) / pt;
}

}  // namespace

Wav read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  char tag[4];
  in.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error(path.string() + ": not a RIFF file");
  read_le<std::uint32_t>(in);  // riff size
  in.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error(path.string() + ": not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<std::int16_t> pcm;
  bool have_fmt = false, have_data = false;
  while (in && !(have_fmt && have_data)) {
    in.read(tag, 4);
    const std::uint32_t chunk_size = read_le<std::uint32_t>(in);
    if (!in) break;
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);  // byte rate
      read_le<std::uint16_t>(in);  // block align
      bits = read_le<std::uint16_t>(in);
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      pcm.resize(chunk_size / 2);
      for (auto& s : pcm) s = static_cast<std::int16_t>(
          read_le<std::uint16_t>(in));
      have_data = true;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data)
    throw std::runtime_error(path.string() + ": missing fmt or data chunk");
  if (format != 1 || bits != 16)
    throw std::runtime_error(path.string() + ": only PCM16 is supported");
  if (channels == 0) throw std::runtime_error(path.string() + ": no channels");

  Wav wav;
  wav.rate = static_cast<double>(rate);
  const std::size_t frames = pcm.size() / channels;
  wav.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c)
      acc += static_cast<double>(pcm[f * channels + c]);
    wav.samples[f] = acc / channels * kPcmScale;
  }
  return wav;
}

void write_wav(const std::filesystem::path& path, std::span<const double> x,
               double rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(x.size() * 2);
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, 1);  // PCM
  write_le<std::uint16_t>(out, 1);  // mono
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rate));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rate) * 2);
  write_le<std::uint16_t>(out, 2);
  write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);
  for (double v : x) {
    const double scaled = std::round(v / kPcmScale);
    const double clamped = std::clamp(scaled, -32768.0, 32767.0);
    write_le<std::uint16_t>(
        out, static_cast<std::uint16_t>(static_cast<std::int16_t>(clamped)));
  }
}

std::vector<double> resample(std::span<const double> x, double src_rate,
                             double dst_rate) {
  if (src_rate <= 0.0 || dst_rate <= 0.0)
    throw std::invalid_argument("resample: non-positive rate");
  if (src_rate == dst_rate) return {x.begin(), x.end()};

  const double step = src_rate / dst_rate;
  const double cutoff = std::min(1.0, dst_rate / src_rate) * 0.45;
  const int half_width = 16;
  const std::size_t out_len =
      static_cast<std::size_t>(std::floor(x.size() / step));
  std::vector<double> out(out_len);
  for (std::size_t n = 0; n < out_len; ++n) {
    const double t = n * step;
    const long k0 = static_cast<long>(std::ceil(t)) - half_width;
    double acc = 0.0;
    for (long k = k0; k < k0 + 2 * half_width; ++k) {
      if (k < 0 || k >= static_cast<long>(x.size())) continue;
      const double d = (k - t);
      const double w =
          0.54 + 0.46 * std::cos(std::numbers::pi * d / half_width);
      acc += x[k] * 2.0 * cutoff * sinc(2.0 * cutoff * d) * w;
    }
    out[n] = acc;
  }
  return out;
}

std::pair<std::size_t, std::size_t> trim_silence_bounds(
    std::span<const double> x, double rate, double threshold_fraction,
    double window_seconds) {
  const std::size_t win =
      std::max<std::size_t>(1, static_cast<std::size_t>(rate * window_seconds));
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::fabs(v));
  if (peak == 0.0) return {0, 0};
  const double threshold = threshold_fraction * peak;

  const std::size_t num_windows = (x.size() + win - 1) / win;
  std::size_t first = num_windows, last = 0;
  for (std::size_t w = 0; w < num_windows; ++w) {
    const std::size_t begin = w * win;
    const std::size_t end = std::min(x.size(), begin + win);
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += x[i] * x[i];
    const double rms = std::sqrt(acc / static_cast<double>(end - begin));
    if (rms >= threshold) {
      first = std::min(first, w);
      last = w;
    }
  }
  if (first == num_windows) return {0, 0};
  return {first * win, std::min(x.size(), (last + 1) * win)};
}

IngestReport ingest(const std::filesystem::path& root,
                    const std::string& positive_class,
                    const IngestOptions& options) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root))
    throw std::runtime_error("ingest: " + root.string() + " is not a directory");

  std::vector<std::string> class_names;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) class_names.push_back(entry.path().filename());
  std::sort(class_names.begin(), class_names.end());
  if (std::find(class_names.begin(), class_names.end(), positive_class) ==
      class_names.end())
    throw std::runtime_error("ingest: positive class '" + positive_class +
                             "' not found under " + root.string());

  IngestReport report;
  const std::size_t clip_len =
      static_cast<std::size_t>(kTargetRate * kClipSeconds);

  // Per class, all usable one-second segments.
  std::map<std::string, std::vector<train::LabeledClip>> segments;
  for (const auto& cls : class_names) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root / cls))
      if (entry.is_regular_file() && entry.path().extension() == ".wav")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      Wav wav;
      try {
        wav = read_wav(file);
      } catch (const std::exception& e) {
        report.warnings.push_back(std::string("skipped: ") + e.what());
        continue;
      }
      ++report.files_read;
      std::vector<double> x = wav.rate == kTargetRate
                                  ? std::move(wav.samples)
                                  : resample(wav.samples, wav.rate, kTargetRate);
      const auto [lo, hi] =
          trim_silence_bounds(x, kTargetRate, options.silence_threshold);
      std::size_t idx = 0;
      for (std::size_t start = lo; start + clip_len <= hi;
           start += clip_len, ++idx) {
        train::LabeledClip clip;
        clip.samples.assign(x.begin() + start, x.begin() + start + clip_len);
        double peak = 0.0;
        for (double v : clip.samples) peak = std::max(peak, std::fabs(v));
        if (peak <= 0.0) continue;
        if (options.normalize) {
          const double gain = kNormalizedPeak / peak;
          for (double& v : clip.samples) v *= gain;
        }
        clip.label = cls == positive_class ? +1 : -1;
        clip.id = file.stem().string() + "#" + std::to_string(idx);
        segments[cls].push_back(std::move(clip));
        ++report.segments_total;
      }
    }
    if (segments[cls].empty())
      report.warnings.push_back("class '" + cls + "' produced no segments");
  }
  if (segments[positive_class].empty())
    throw std::runtime_error("ingest: positive class '" + positive_class +
                             "' has no usable segments");

  // Balance: positives versus an equal-size seeded sample of the pooled rest.
  std::mt19937_64 rng(options.seed);
  std::vector<train::LabeledClip> pos = std::move(segments[positive_class]);
  std::vector<train::LabeledClip> neg;
  for (auto& [cls, clips] : segments) {
    if (cls == positive_class) continue;
    for (auto& c : clips) neg.push_back(std::move(c));
  }
  if (neg.empty())
    throw std::runtime_error("ingest: no negative-class segments");
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  const std::size_t n = std::min(pos.size(), neg.size());
  pos.resize(n);
  neg.resize(n);

  std::size_t test_n;
  if (options.train_count > 0 && options.test_count > 0) {
    const std::size_t want = static_cast<std::size_t>(options.train_count) +
                             static_cast<std::size_t>(options.test_count);
    if (want < n) {
      pos.resize(want);
      neg.resize(want);
    }
    test_n = std::min<std::size_t>(options.test_count, pos.size());
  } else {
    test_n = static_cast<std::size_t>(
        std::lround(static_cast<double>(n) * options.test_fraction));
  }
  for (std::size_t i = 0; i < pos.size(); ++i) {
    pos[i].is_test = i < test_n;
    neg[i].is_test = i < test_n;
  }
  report.dataset.clips.reserve(2 * pos.size());
  for (auto& c : pos) report.dataset.clips.push_back(std::move(c));
  for (auto& c : neg) report.dataset.clips.push_back(std::move(c));
  return report;
}

}  // namespace mpkm::audio
