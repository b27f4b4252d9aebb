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

#include "dsvae/toy_corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <system_error>

#include "dsvae/data_io.hpp"
#include "dsvae/error.hpp"
#include "json.hpp"

namespace dsvae::toy {
namespace {

using nlohmann::json;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> convolve_same(const std::vector<double>& x,
                                  const std::vector<double>& h) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(h.size());
  const std::ptrdiff_t half = m / 2;
  std::vector<double> y(x.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = 0; k < m; ++k) {
      const std::ptrdiff_t j = i + half - k;
      if (j >= 0 && j < n) acc += h[k] * x[j];
    }
    y[i] = acc;
  }
  return y;
}

void repeat_segments(std::vector<double>& x, std::size_t seg) {
  for (std::size_t start = seg; start < x.size(); start += 2 * seg) {
    for (std::size_t i = 0; i < seg && start + i < x.size(); ++i) {
      x[start + i] = x[start - seg + i];
    }
  }
}

double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(std::max<std::size_t>(x.size(), 1)));
}

bool known_family(const std::string& id) {
  return std::find(kFamilies.begin(), kFamilies.end(), id) != kFamilies.end();
}

std::string index_str(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

}  // namespace

void ToyConfig::validate() const {
  if (train_per_class == 0 && dev_per_class == 0 && eval_per_class == 0) {
    throw InputError("toy config produces no clips");
  }
  if (!(clip_seconds > 0.0) || sample_rate == 0) {
    throw InputError("toy config needs positive clip_seconds and sample_rate");
  }
  if (known_families.empty()) {
    throw InputError("toy config needs at least one known synthetic family");
  }
  std::set<std::string> seen;
  for (const auto* list : {&known_families, &unknown_families}) {
    for (const auto& f : *list) {
      if (!known_family(f)) throw InputError("unknown toy family '" + f + "'");
      if (!seen.insert(f).second) {
        throw InputError("toy family '" + f + "' listed twice");
      }
    }
  }
  if (!(imbalance_ratio > 0.0) || !std::isfinite(imbalance_ratio)) {
    throw InputError("imbalance_ratio must be positive");
  }
  if (samples_per_clip() < 400) throw InputError("toy clips are too short");
}

std::size_t ToyConfig::samples_per_clip() const {
  return static_cast<std::size_t>(std::llround(clip_seconds * sample_rate));
}

ToyConfig parse_toy_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("toy config is not valid JSON: ") + e.what(), 0);
  }
  if (!j.is_object()) throw ParseError("toy config must be a JSON object", 0);
  ToyConfig c;
  const std::set<std::string> keys{
      "train_per_class", "dev_per_class",    "eval_per_class",
      "clip_seconds",    "sample_rate",      "known_families",
      "unknown_families", "imbalance_ratio", "seed"};
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw ParseError("unknown toy config key '" + k + "'", 0);
  }
  auto opt = [&j](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      field = j[key].get<std::decay_t<decltype(field)>>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("toy config key '") + key + "': " + e.what(), 0);
    }
  };
  opt("train_per_class", c.train_per_class);
  opt("dev_per_class", c.dev_per_class);
  opt("eval_per_class", c.eval_per_class);
  opt("clip_seconds", c.clip_seconds);
  opt("sample_rate", c.sample_rate);
  opt("known_families", c.known_families);
  opt("unknown_families", c.unknown_families);
  opt("imbalance_ratio", c.imbalance_ratio);
  opt("seed", c.seed);
  c.validate();
  return c;
}

ToyConfig load_toy_config(const std::filesystem::path& path) {
  return parse_toy_config(io::read_text(path));
}

std::string format_toy_config(const ToyConfig& c) {
  json j = {{"train_per_class", c.train_per_class},
            {"dev_per_class", c.dev_per_class},
            {"eval_per_class", c.eval_per_class},
            {"clip_seconds", c.clip_seconds},
            {"sample_rate", c.sample_rate},
            {"known_families", c.known_families},
            {"unknown_families", c.unknown_families},
            {"imbalance_ratio", c.imbalance_ratio},
            {"seed", c.seed}};
  return j.dump(2) + "\n";
}

std::vector<double> bonafide_signal(Rng& rng, std::size_t n, double fs) {
  const double f0 = rng.uniform(100.0, 300.0);
  const std::size_t harmonics = 3 + rng.uniform_index(3);
  const double vib_rate = rng.uniform(4.0, 7.0);
  const double vib_depth = rng.uniform(0.005, 0.02);
  const double env_rate = rng.uniform(2.0, 5.0);
  const double env_phase = rng.uniform(0.0, kTwoPi);
  std::vector<double> amp(harmonics), phase(harmonics);
  for (std::size_t k = 0; k < harmonics; ++k) {
    amp[k] = rng.uniform(0.5, 1.0) / static_cast<double>(k + 1);
    phase[k] = rng.uniform(0.0, kTwoPi);
  }

  std::vector<double> voice(n);
  double theta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double f = f0 * (1.0 + vib_depth * std::sin(kTwoPi * vib_rate * t));
    theta += kTwoPi * f / fs;
    const double env = 0.6 + 0.4 * std::sin(kTwoPi * env_rate * t + env_phase);
    double s = 0.0;
    for (std::size_t k = 0; k < harmonics; ++k) {
      s += amp[k] * std::sin(static_cast<double>(k + 1) * theta + phase[k]);
    }
    voice[i] = env * s;
  }

  const double noise_gain = rng.uniform(0.9, 1.3) * rms(voice);
  std::vector<double> noise(n);
  double y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y = rng.normal() + 0.3 * y;
    noise[i] = y;
  }
  const double nr = rms(noise);
  for (std::size_t i = 0; i < n; ++i) voice[i] += noise_gain * noise[i] / nr;
  return voice;
}

std::vector<double> lowpass_fir(double cutoff_hz, double fs, std::size_t taps) {
  if (taps % 2 == 0 || taps < 3) throw ContractError("lowpass_fir needs odd taps >= 3");
  if (!(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0)) {
    throw ContractError("lowpass_fir cutoff must lie in (0, fs/2)");
  }
  const double fc = cutoff_hz / fs;
  const double mid = static_cast<double>(taps - 1) / 2.0;
  std::vector<double> h(taps);
  double sum = 0.0;
  for (std::size_t i = 0; i < taps; ++i) {
    const double m = static_cast<double>(i) - mid;
    const double sinc = m == 0.0 ? 2.0 * fc
                                 : std::sin(kTwoPi * fc * m) / (std::numbers::pi * m);
    const double r = static_cast<double>(i) / static_cast<double>(taps - 1);
    const double w = 0.42 - 0.5 * std::cos(kTwoPi * r) + 0.08 * std::cos(2.0 * kTwoPi * r);
    h[i] = sinc * w;
    sum += h[i];
  }
  for (double& v : h) v /= sum;
  return h;
}

std::vector<double> apply_family(const std::string& id, std::vector<double> x,
                                 double fs) {
  const auto hop = static_cast<std::size_t>(std::llround(0.010 * fs));
  if (id == "G01") return convolve_same(x, lowpass_fir(3000.0, fs, 255));
  if (id == "G02") {
    repeat_segments(x, hop);
    return x;
  }
  if (id == "G03") {
    const double a = 0.5 * rms(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += a * std::sin(kTwoPi * 6000.0 * static_cast<double>(i) / fs);
    }
    return x;
  }
  if (id == "G04") {
    x = convolve_same(x, lowpass_fir(4000.0, fs, 255));
    repeat_segments(x, 2 * hop);
    return x;
  }
  throw InputError("unknown toy family '" + id + "'");
}

std::vector<std::int16_t> render_clip(const ToyConfig& cfg,
                                      const std::string& family,
                                      std::uint64_t clip_seed) {
  Rng rng(clip_seed);
  const double fs = cfg.sample_rate;
  std::vector<double> x = bonafide_signal(rng, cfg.samples_per_clip(), fs);
  if (family != io::kBonafideId) x = apply_family(family, std::move(x), fs);
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  const double g = peak > 0.0 ? 0.7 / peak : 0.0;
  std::vector<std::int16_t> pcm(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) pcm[i] = io::quantize_pcm16(g * x[i]);
  return pcm;
}

std::filesystem::path generate_toy_dataset(const ToyConfig& cfg,
                                           const std::filesystem::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

  struct Plan {
    io::Split split;
    std::size_t per_class;
  };
  const Plan plans[] = {{io::Split::kTrain, cfg.train_per_class},
                        {io::Split::kDev, cfg.dev_per_class},
                        {io::Split::kEval, cfg.eval_per_class}};
  std::vector<io::ManifestRecord> records;
  std::uint64_t clip_index = 0;
  for (const Plan& p : plans) {
    if (p.per_class == 0) continue;
    const std::string split = io::to_string(p.split);
    std::filesystem::create_directories(out_dir / split, ec);
    if (ec) throw IoError("cannot create '" + (out_dir / split).string() + "'");
    std::vector<std::string> families = cfg.known_families;
    if (p.split == io::Split::kEval) {
      families.insert(families.end(), cfg.unknown_families.begin(),
                      cfg.unknown_families.end());
    }
    const auto n_syn = static_cast<std::size_t>(
        std::llround(static_cast<double>(p.per_class) * cfg.imbalance_ratio));
    std::vector<std::string> order(p.per_class, io::kBonafideId);
    for (std::size_t i = 0; i < n_syn; ++i) order.push_back(families[i % families.size()]);

    for (std::size_t i = 0; i < order.size(); ++i) {
      const std::string& fam = order[i];
      const std::string rel = split + "/" + split + "_" + index_str(i) + "_" + fam + ".wav";
      const auto pcm = render_clip(cfg, fam, derive_seed(cfg.seed, clip_index++));
      io::write_wav(out_dir / rel, pcm, cfg.sample_rate);
      io::ManifestRecord r;
      r.path = rel;
      r.resolved = out_dir / rel;
      r.label = fam == io::kBonafideId ? io::Label::kBonafide : io::Label::kSynthetic;
      r.synthesizer_id = fam;
      r.split = p.split;
      records.push_back(std::move(r));
    }
  }
  const auto manifest = out_dir / "manifest.csv";
  io::write_text(manifest, io::format_manifest(records));
  return manifest;
}

}  // namespace dsvae::toy
