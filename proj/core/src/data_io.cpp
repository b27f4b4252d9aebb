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

#include "dsvae/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dsvae/error.hpp"

namespace dsvae::io {
namespace {

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t off) {
  return std::uint32_t(b[off]) | (std::uint32_t(b[off + 1]) << 8) |
         (std::uint32_t(b[off + 2]) << 16) | (std::uint32_t(b[off + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::string tag(std::span<const std::uint8_t> b, std::size_t off) {
  return std::string(reinterpret_cast<const char*>(b.data() + off), 4);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

dsp::Waveform parse_wav(std::span<const std::uint8_t> b) {
  if (b.size() < 12) throw FormatError("file too short for a RIFF header", b.size());
  if (tag(b, 0) != "RIFF") throw FormatError("missing 'RIFF' chunk id", 0);
  if (tag(b, 8) != "WAVE") throw FormatError("RIFF form type is not 'WAVE'", 8);

  bool have_fmt = false;
  std::uint32_t rate = 0;
  std::size_t off = 12;
  while (off + 8 <= b.size()) {
    const std::string id = tag(b, off);
    const std::uint32_t size = read_u32(b, off + 4);
    const std::size_t body = off + 8;
    if (body + size > b.size()) {
      throw FormatError("chunk '" + id + "' declares " + std::to_string(size) +
                            " bytes but the file ends first",
                        b.size());
    }
    if (id == "fmt ") {
      if (size < 16) throw FormatError("'fmt ' chunk shorter than 16 bytes", body);
      const std::uint16_t format = read_u16(b, body);
      const std::uint16_t channels = read_u16(b, body + 2);
      rate = read_u32(b, body + 4);
      const std::uint16_t bits = read_u16(b, body + 14);
      if (format != 1) {
        throw UnsupportedError("'fmt ' chunk: unsupported encoding tag " +
                               std::to_string(format) + " (only PCM = 1)");
      }
      if (bits != 16) {
        throw UnsupportedError("'fmt ' chunk: unsupported encoding " +
                               std::to_string(bits) +
                               "-bit PCM (only 16-bit)");
      }
      if (channels != 1) {
        throw UnsupportedError("'fmt ' chunk: " + std::to_string(channels) +
                               " channels; only mono is supported");
      }
      if (rate == 0) throw FormatError("'fmt ' chunk: zero sample rate", body + 4);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("'data' chunk before 'fmt ' chunk", off);
      if (size % 2 != 0) {
        throw FormatError("'data' chunk size is not a whole number of samples",
                          off + 4);
      }
      dsp::Waveform w;
      w.sample_rate = rate;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(b, body + 2 * i));
        w.samples[i] = static_cast<float>(v) / 32768.0f;
      }
      return w;
    }
    off = body + size + (size & 1);
  }
  throw FormatError(have_fmt ? "no 'data' chunk" : "no 'fmt ' chunk", off);
}

dsp::Waveform load_wav(const fs::path& path) {
  return parse_wav(read_file(path));
}

std::int16_t quantize_pcm16(double x) {
  const double v = std::round(x * 32767.0);
  return static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
}

std::vector<std::uint8_t> encode_wav(std::span<const std::int16_t> samples,
                                     std::uint32_t sample_rate) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  for (char c : std::string("RIFF")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, 36 + data_bytes);
  for (char c : std::string("WAVEfmt ")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, sample_rate);
  put_u32(out, sample_rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  for (char c : std::string("data")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, data_bytes);
  for (std::int16_t s : samples) put_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

void write_wav(const fs::path& path, std::span<const std::int16_t> samples,
               std::uint32_t sample_rate) {
  write_file(path, encode_wav(samples, sample_rate));
}

std::string to_string(Label l) {
  return l == Label::kBonafide ? "bonafide" : "synthetic";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kEval: return "eval";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "eval") return Split::kEval;
  throw InputError("unknown split '" + s + "' (expected train, dev or eval)");
}

std::vector<ManifestRecord> parse_manifest_text(const std::string& text,
                                                const fs::path& base_dir) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<ManifestRecord> out;
  auto strip_cr = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };
  if (!std::getline(in, line)) throw ParseError("empty manifest, no header", 1);
  ++line_no;
  strip_cr(line);
  if (split_csv_line(line) !=
      std::vector<std::string>{"path", "label", "synthesizer_id", "split"}) {
    throw ParseError("header must be 'path,label,synthesizer_id,split'", line_no);
  }
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) {
      throw ParseError("expected 4 columns, found " + std::to_string(f.size()),
                       line_no);
    }
    ManifestRecord r;
    r.path = f[0];
    if (r.path.empty()) throw ParseError("empty path", line_no);
    const fs::path p(r.path);
    r.resolved = p.is_absolute() ? p : base_dir / p;
    if (f[1] == "bonafide") {
      r.label = Label::kBonafide;
    } else if (f[1] == "synthetic") {
      r.label = Label::kSynthetic;
    } else {
      throw ParseError("unknown label '" + f[1] +
                           "' (expected bonafide or synthetic)",
                       line_no);
    }
    r.synthesizer_id = f[2];
    if (r.label == Label::kBonafide && r.synthesizer_id != kBonafideId) {
      throw ParseError("bona fide rows must use synthesizer_id 'bonafide'",
                       line_no);
    }
    if (r.label == Label::kSynthetic &&
        (r.synthesizer_id.empty() || r.synthesizer_id == kBonafideId)) {
      throw ParseError("synthetic rows need a generator id", line_no);
    }
    try {
      r.split = split_from_string(f[3]);
    } catch (const InputError& e) {
      throw ParseError(e.what(), line_no);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ManifestRecord> parse_manifest(const fs::path& path) {
  return parse_manifest_text(read_text(path), path.parent_path());
}

std::string format_manifest(std::span<const ManifestRecord> records) {
  std::string s = "path,label,synthesizer_id,split\n";
  for (const auto& r : records) {
    s += r.path + "," + to_string(r.label) + "," + r.synthesizer_id + "," +
         to_string(r.split) + "\n";
  }
  return s;
}

std::vector<ManifestRecord> filter_split(std::span<const ManifestRecord> records,
                                         Split split) {
  std::vector<ManifestRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [split](const ManifestRecord& r) { return r.split == split; });
  return out;
}

std::vector<std::uint8_t> pgm_pixels(const ad::Tensor& m,
                                     const PgmScaling& scaling) {
  if (m.rank() != 2) {
    throw DimensionError("pgm: expected a matrix, got " + ad::shape_str(m.shape()));
  }
  const auto v = m.data();
  if (std::any_of(v.begin(), v.end(), [](float x) { return !std::isfinite(x); })) {
    throw ContractError("pgm: matrix has non-finite values");
  }
  double lo = scaling.lo, hi = scaling.hi;
  if (scaling.mode == PgmScaling::Mode::kFixed) {
    if (!(hi != lo)) throw ContractError("pgm: fixed scaling needs lo != hi");
  } else {
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    lo = *mn;
    hi = *mx;
  }
  std::vector<std::uint8_t> px(v.size(), 0);
  if (hi == lo) return px;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double s = std::nearbyint(255.0 * (double(v[i]) - lo) / (hi - lo));
    px[i] = static_cast<std::uint8_t>(std::clamp(s, 0.0, 255.0));
  }
  return px;
}

std::vector<std::uint8_t> encode_pgm(const ad::Tensor& m,
                                     const PgmScaling& scaling) {
  const auto px = pgm_pixels(m, scaling);
  const std::size_t rows = m.extent(0), cols = m.extent(1);
  const std::string head =
      "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  for (std::size_t r = rows; r-- > 0;) {
    out.insert(out.end(), px.begin() + r * cols, px.begin() + (r + 1) * cols);
  }
  return out;
}

void export_pgm(const ad::Tensor& matrix, const fs::path& path,
                const PgmScaling& scaling) {
  write_file(path, encode_pgm(matrix, scaling));
}

PgmImage parse_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t += char(bytes[pos++]);
    if (t.empty()) throw FormatError("truncated PGM header", pos);
    return t;
  };
  if (token() != "P5") throw FormatError("not a binary PGM (P5)", 0);
  PgmImage img;
  try {
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    img.maxval = static_cast<unsigned>(std::stoul(token()));
  } catch (const std::logic_error&) {
    throw FormatError("bad PGM header field", pos);
  }
  ++pos;  // single whitespace after maxval
  if (bytes.size() - std::min(pos, bytes.size()) != img.width * img.height) {
    throw FormatError("PGM pixel data size mismatch", pos);
  }
  img.pixels.assign(bytes.begin() + pos, bytes.end());
  return img;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), {});
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                             text.size()));
}

std::string read_text(const fs::path& path) {
  const auto b = read_file(path);
  return std::string(b.begin(), b.end());
}

}  // namespace dsvae::io
