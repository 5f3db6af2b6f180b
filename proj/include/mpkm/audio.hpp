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

#ifndef MPKM_AUDIO_HPP_
#define MPKM_AUDIO_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mpkm/trainer.hpp"

// WAV ingestion for the classification pipeline: decode PCM16, mix down to
// mono, resample to the pipeline rate, trim silence, cut into fixed-length
// clips, balance the positive class against the pooled rest, and split
// train/test under a fixed seed. Samples are scaled so PCM full scale maps
// to +-32, matching the fixed-point datapath range.

namespace mpkm::audio {

inline constexpr double kTargetRate = 16000.0;
inline constexpr double kClipSeconds = 1.0;
// PCM16 full scale +-32768 maps to +-32.0.
inline constexpr double kPcmScale = 1.0 / 1024.0;
// Clip segments are peak-normalized to this level (just under full scale).
inline constexpr double kNormalizedPeak = 30.0;

struct Wav {
  std::vector<double> samples;  // mono
  double rate = 0.0;
};

// PCM16 RIFF/WAVE only; multi-channel input is averaged to mono. Throws
// std::runtime_error on malformed or unsupported files.
Wav read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, std::span<const double> x,
               double rate);

// Windowed-sinc rational resampler.
std::vector<double> resample(std::span<const double> x, double src_rate,
                             double dst_rate);

// [first, last) sample range that survives the silence trim: leading and
// trailing 20 ms windows whose RMS is below `threshold_fraction` of the clip
// peak are dropped.
std::pair<std::size_t, std::size_t> trim_silence_bounds(
    std::span<const double> x, double rate, double threshold_fraction = 0.02,
    double window_seconds = 0.020);

struct IngestOptions {
  std::uint64_t seed = 1;
  double test_fraction = 0.2;
  bool normalize = true;
  double silence_threshold = 0.02;
  // When positive, override the fraction split with explicit per-split
  // positive-class counts (negatives are matched 1:1).
  int train_count = 0;
  int test_count = 0;
};

struct IngestReport {
  train::LabeledDataset dataset;
  std::vector<std::string> warnings;
  std::size_t files_read = 0;
  std::size_t segments_total = 0;
};

// root contains one subdirectory per class with WAV files inside.
// `positive_class` names the subdirectory labeled +1; every other class is
// pooled at -1 and subsampled to balance. Throws when the positive class is
// missing or empty.
IngestReport ingest(const std::filesystem::path& root,
                    const std::string& positive_class,
                    const IngestOptions& options);

}  // namespace mpkm::audio

#endif  // MPKM_AUDIO_HPP_
