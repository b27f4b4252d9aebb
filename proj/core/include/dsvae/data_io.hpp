// Copyright 2026  The dsvae Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dsvae/dsp.hpp"
#include "dsvae/tensor.hpp"

namespace dsvae::io {

namespace fs = std::filesystem;

// ---- WAV -----------------------------------------------------------------

/// Reads RIFF/WAVE, PCM 16-bit mono. Samples are scaled by 1/32768.
/// Other encodings raise UnsupportedError; malformed files FormatError.
dsp::Waveform load_wav(const fs::path& path);
dsp::Waveform parse_wav(std::span<const std::uint8_t> bytes);

/// Canonical 44-byte-header PCM16 mono file.
void write_wav(const fs::path& path, std::span<const std::int16_t> samples,
               std::uint32_t sample_rate);
std::vector<std::uint8_t> encode_wav(std::span<const std::int16_t> samples,
                                     std::uint32_t sample_rate);

/// round(x * 32767), clamped to the int16 range.
std::int16_t quantize_pcm16(double x);

// ---- Manifests -------------------------------------------------------------

enum class Label { kBonafide = 0, kSynthetic = 1 };
enum class Split { kTrain, kDev, kEval };

std::string to_string(Label l);
std::string to_string(Split s);
Split split_from_string(const std::string& s);

inline constexpr const char* kBonafideId = "bonafide";

struct ManifestRecord {
  std::string path;      // as written in the manifest
  fs::path resolved;     // absolute or relative to the working directory
  Label label = Label::kBonafide;
  std::string synthesizer_id = kBonafideId;
  Split split = Split::kTrain;

  int y() const { return label == Label::kSynthetic ? 1 : 0; }
};

/// CSV with header `path,label,synthesizer_id,split`. Relative paths are
/// resolved against the manifest's directory.
std::vector<ManifestRecord> parse_manifest(const fs::path& path);
std::vector<ManifestRecord> parse_manifest_text(const std::string& text,
                                                const fs::path& base_dir);

std::string format_manifest(std::span<const ManifestRecord> records);

std::vector<ManifestRecord> filter_split(std::span<const ManifestRecord> records,
                                         Split split);

// ---- PGM -------------------------------------------------------------------

struct PgmScaling {
  enum class Mode { kMinMax, kFixed } mode = Mode::kMinMax;
  double lo = 0.0;
  double hi = 1.0;

  static PgmScaling minmax() { return {}; }
  static PgmScaling fixed(double lo, double hi) { return {Mode::kFixed, lo, hi}; }
};

/// Pixel values for a [rows, cols] matrix in matrix order: value v maps to
/// round-half-even(255 (v - lo) / (hi - lo)), clamped to [0, 255]. Under
/// minmax a constant matrix maps to all zeros.
std::vector<std::uint8_t> pgm_pixels(const ad::Tensor& matrix,
                                     const PgmScaling& scaling);

/// Binary P5 image, maxval 255. Matrix row 0 (lowest mel bin) is written
/// as the bottom image row, so high bins appear at the top.
std::vector<std::uint8_t> encode_pgm(const ad::Tensor& matrix,
                                     const PgmScaling& scaling);
void export_pgm(const ad::Tensor& matrix, const fs::path& path,
                const PgmScaling& scaling);

struct PgmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  unsigned maxval = 0;
  std::vector<std::uint8_t> pixels;  // file order, top row first
};
PgmImage parse_pgm(std::span<const std::uint8_t> bytes);

// ---- Files -----------------------------------------------------------------

std::vector<std::uint8_t> read_file(const fs::path& path);
void write_file(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace dsvae::io
