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

// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "capture.hpp"
#include "dsvae/checkpoint.hpp"
#include "dsvae/config.hpp"
#include "dsvae/data_io.hpp"
#include "dsvae/dataset.hpp"
#include "dsvae/dsp.hpp"
#include "dsvae/error.hpp"
#include "dsvae/evaluation.hpp"
#include "dsvae/losses.hpp"
#include "dsvae/training.hpp"
#include "grad_cases.hpp"
#include "json.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;
using namespace dsvae;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kConfigDir = DSVAE_CONFIG_DIR;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

// ---- toy pipeline ----------------------------------------------------------

struct Pipeline {
  fs::path root;
  bool ok = true;
  std::string error;
  double stage1_seconds = 0.0;
  double stage2_seconds = 0.0;

  fs::path manifest() const { return root / "data" / "manifest.csv"; }
  fs::path stage1() const { return root / "stage1" / "stage1.dsva"; }
  fs::path best() const { return root / "select" / "best.dsva"; }
};

bool step(Pipeline& p, const std::string& name, const std::vector<std::string>& args) {
  if (!p.ok) return false;
  const auto r = test::run_cli(args);
  if (r.code != 0) {
    p.ok = false;
    p.error = name + " exited with " + std::to_string(r.code) + ": " + r.err;
  }
  return p.ok;
}

Pipeline run_pipeline(const fs::path& root) {
  Pipeline p;
  p.root = root;
  const std::string m = p.manifest().string();
  step(p, "gen-toy",
       {"gen-toy", "--config", (kConfigDir / "toy.json").string(), "--out",
        (root / "data").string()});
  auto t0 = Clock::now();
  step(p, "train-stage1",
       {"train-stage1", "--config", (kConfigDir / "stage1.json").string(), "--manifest", m,
        "--out", (root / "stage1").string()});
  p.stage1_seconds = seconds_since(t0);
  t0 = Clock::now();
  step(p, "train-stage2",
       {"train-stage2", "--config", (kConfigDir / "stage2_toy.json").string(), "--manifest",
        m, "--stage1-checkpoint", p.stage1().string(), "--out", (root / "stage2").string()});
  p.stage2_seconds = seconds_since(t0);

  std::vector<std::string> sel{"select-best"};
  if (p.ok) {
    std::vector<fs::path> epochs;
    for (const auto& e : fs::directory_iterator(root / "stage2"))
      if (e.path().extension() == ".dsva") epochs.push_back(e.path());
    std::sort(epochs.begin(), epochs.end());
    for (const auto& e : epochs) {
      sel.push_back("--checkpoint");
      sel.push_back(e.string());
    }
  }
  sel.insert(sel.end(), {"--manifest", m, "--out", (root / "select").string()});
  step(p, "select-best", sel);
  step(p, "eval",
       {"eval", "--checkpoint", p.best().string(), "--manifest", m, "--split", "eval",
        "--out", (root / "eval").string()});
  for (const char* which : {"fg", "fd"}) {
    step(p, std::string("export-embeddings ") + which,
         {"export-embeddings", "--checkpoint", p.best().string(), "--manifest", m, "--which",
          which, "--split", "eval", "--out", (root / (std::string("emb_") + which)).string()});
  }
  step(p, "infer",
       {"infer", "--checkpoint", p.best().string(), "--wav",
        (root / "data" / "eval" / "eval_0000_bonafide.wav").string(), "--maps",
        (root / "maps").string()});
  return p;
}

// clip_id,label,synthesizer_id,f_0,...
std::vector<eval::EmbeddingRow> read_embeddings(const fs::path& csv) {
  std::istringstream in(slurp(csv));
  std::string line;
  std::getline(in, line);
  std::vector<eval::EmbeddingRow> rows;
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    eval::EmbeddingRow r;
    std::string cell;
    std::getline(cells, r.clip_id, ',');
    std::getline(cells, cell, ',');
    r.label = cell == "synthetic" ? 1 : 0;
    std::getline(cells, r.synthesizer_id, ',');
    while (std::getline(cells, cell, ',')) r.values.push_back(std::stof(cell));
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---- criteria --------------------------------------------------------------

Outcome criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(2024);
  double worst = 0.0;
  std::string worst_name;
  std::size_t cases = 0, entries = 0;
  auto run = [&](const std::vector<std::pair<std::string, oracle::CaseFactory>>& list) {
    for (const auto& [name, make] : list) {
      for (int i = 0; i < 50; ++i) {
        const auto c = make(gen);
        const auto r = oracle::gradcheck(c.fn, c.inputs, 1e-3);
        entries += r.checked;
        if (r.max_rel_error > worst) {
          worst = r.max_rel_error;
          worst_name = name;
        }
      }
      ++cases;
    }
  };
  run(oracle::op_cases());
  run(oracle::loss_cases());
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          std::to_string(cases) + " ops/losses x 50 instances, " + std::to_string(entries) +
              " partials, max rel error " + fmt("%.3g", worst) + " (" + worst_name + "), " +
              fmt("%.1f", secs) + " s"};
}

Outcome criterion2() {
  struct Setting {
    std::vector<double> mu, lv;
  };
  const std::vector<Setting> settings{{{0, 0, 0, 0}, {0, 0, 0, 0}},
                                      {{0.5, -1.0, 0.25, 2.0}, {-0.5, 0.3, 0.0, -1.0}},
                                      {{-1.5, 0.1, 1.0, -0.3}, {0.7, -1.2, 0.4, 0.2}}};
  bool pass = true;
  std::string detail;
  for (std::size_t i = 0; i < settings.size(); ++i) {
    const auto& s = settings[i];
    oracle::DTape tape(false);
    const double closed = loss::kl_loss(tape.constant(oracle::DTensor({1, 4}, s.mu)),
                                        tape.constant(oracle::DTensor({1, 4}, s.lv)))
                              .value()
                              .item();
    const double mc = oracle::monte_carlo_kl(s.mu, s.lv, 100000, 100 + i);
    bool ok;
    if (i == 0) {
      ok = closed == 0.0 && mc == 0.0;
      detail += "zero case " + fmt("%g", closed);
    } else {
      const double rel = std::abs(closed - mc) / std::abs(mc);
      ok = rel < 0.02;
      detail += "; closed " + fmt("%.5f", closed) + " vs MC " + fmt("%.5f", mc) + " (" +
                fmt("%.2f", 100 * rel) + "%)";
    }
    pass = pass && ok;
  }
  return {pass, detail};
}

Outcome criterion3() {
  bool pass = true;
  std::string detail;
  for (double f : {0.0, 700.0, 8000.0}) {
    const double want = 2595.0 * std::log10(1.0 + f / 700.0);
    const double got = dsp::hz_to_mel(f);
    const double rel = want == 0.0 ? std::abs(got) : std::abs(got - want) / want;
    pass = pass && rel <= 1e-6;
    detail += (detail.empty() ? "" : ", ") + fmt("%g Hz", f) + " -> " + fmt("%.6f", got);
  }
  return {pass, detail};
}

Outcome criterion4(const Pipeline& p) {
  if (!p.ok) return {false, p.error};
  const auto records = io::parse_manifest(p.manifest());
  std::map<std::string, int> counts;
  std::set<std::string> train_families, eval_families;
  for (const auto& r : records) {
    counts[io::to_string(r.split)]++;
    if (r.label == io::Label::kSynthetic) {
      (r.split == io::Split::kEval ? eval_families : train_families).insert(r.synthesizer_id);
    }
  }
  std::vector<std::string> unseen;
  for (const auto& f : eval_families)
    if (!train_families.count(f)) unseen.push_back(f);
  const bool corpus_ok = counts["train"] >= 400 && counts["dev"] >= 100 &&
                         counts["eval"] >= 200 && !unseen.empty();

  const auto report = json::parse(slurp(p.root / "eval" / "report.json"));
  const double eer = report.at("eer");
  const double ba = report.at("balanced_accuracy");
  bool unseen_ok = true;
  std::string per;
  for (const auto& g : report.at("per_synthesizer")) {
    const std::string id = g.at("synthesizer_id");
    const double acc = g.at("accuracy");
    per += " " + id + "=" + fmt("%.3f", acc);
    if (std::find(unseen.begin(), unseen.end(), id) != unseen.end()) {
      unseen_ok = unseen_ok && acc >= 0.95;
    }
  }
  const bool pass = corpus_ok && eer <= 0.05 && ba >= 0.95 && unseen_ok &&
                    p.stage1_seconds <= 120.0 && p.stage2_seconds <= 300.0;
  return {pass, "clips train/dev/eval " + std::to_string(counts["train"]) + "/" +
                    std::to_string(counts["dev"]) + "/" + std::to_string(counts["eval"]) +
                    ", EER " + fmt("%.4f", eer) + ", balanced accuracy " + fmt("%.4f", ba) +
                    ", per family" + per + ", stage 1 " + fmt("%.0f", p.stage1_seconds) +
                    " s, stage 2 " + fmt("%.0f", p.stage2_seconds) + " s"};
}

Outcome criterion5(const Pipeline& p) {
  if (!p.ok) return {false, p.error};
  const double fg = eval::separation_ratio(read_embeddings(p.root / "emb_fg" / "embeddings.csv"));
  const double fd = eval::separation_ratio(read_embeddings(p.root / "emb_fd" / "embeddings.csv"));
  return {fd >= 2.0 * fg, "separation ratio F_D " + fmt("%.3f", fd) + " vs F_G " +
                              fmt("%.3f", fg) + " (x" + fmt("%.2f", fd / fg) + ")"};
}

std::vector<std::uint8_t> encoder_bytes(nn::ModelBundle& b) {
  std::vector<std::uint8_t> out;
  for (auto* p : b.parameters(nn::Subnet::kGeneralEncoder)) {
    const auto* raw = reinterpret_cast<const std::uint8_t*>(p->value.raw());
    out.insert(out.end(), raw, raw + p->value.numel() * sizeof(float));
  }
  return out;
}

struct ShortRun {
  data::Dataset train;
  data::Dataset dev;
  ckpt::Checkpoint stage1;
};

ShortRun load_short_run(const Pipeline& p) {
  ShortRun s;
  s.stage1 = ckpt::load_checkpoint(p.stage1());
  const dsp::Frontend fe(s.stage1.frontend);
  const auto records = io::parse_manifest(p.manifest());
  s.train = data::load_dataset(io::filter_split(records, io::Split::kTrain), fe);
  s.dev = data::load_dataset(io::filter_split(records, io::Split::kDev), fe);
  return s;
}

StageConfig short_stage2_config(std::size_t epochs) {
  auto cfg = load_stage_config(kConfigDir / "stage2_toy.json");
  cfg.epochs = epochs;
  return cfg;
}

Outcome criterion6(const Pipeline& p, const ShortRun& s, ckpt::Checkpoint& trained) {
  if (!p.ok) return {false, p.error};
  // The full pipeline: stage-1 E_G against the selected stage-2 checkpoint.
  auto stage1 = ckpt::load_checkpoint(p.stage1());
  auto best = ckpt::load_checkpoint(p.best());
  const bool pipeline_same = encoder_bytes(stage1.bundle) == encoder_bytes(best.bundle);

  // A short in-process run with every step's E_G gradients inspected.
  auto before = s.stage1;
  std::size_t steps = 0, nonzero = 0, other_nonzero_steps = 0;
  train::Hooks hooks;
  hooks.on_step = [&](const train::StepInfo& info) {
    ++steps;
    for (auto* prm : info.bundle.parameters(nn::Subnet::kGeneralEncoder))
      for (float g : prm->grad.data()) nonzero += g != 0.0f;
    bool any = false;
    for (auto* prm : info.bundle.parameters(nn::Subnet::kDisentangledEncoder))
      for (float g : prm->grad.data()) any = any || g != 0.0f;
    other_nonzero_steps += any;
  };
  trained = train::train_stage2(s.train, s.dev, s.stage1, short_stage2_config(2), hooks);
  const bool run_same = encoder_bytes(before.bundle) == encoder_bytes(trained.bundle);
  const bool pass = pipeline_same && run_same && nonzero == 0 && steps > 0 &&
                    other_nonzero_steps == steps;
  return {pass, std::string("E_G bytes unchanged: pipeline ") + (pipeline_same ? "yes" : "no") +
                    ", short run " + (run_same ? "yes" : "no") + "; nonzero E_G gradient entries " +
                    std::to_string(nonzero) + " over " + std::to_string(steps) +
                    " steps; E_D gradients nonzero at " + std::to_string(other_nonzero_steps) +
                    " steps"};
}

double bonafide_map_magnitude(nn::ModelBundle& b, const data::Dataset& ds) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : ds.examples) {
    if (e.label != 0) continue;
    const auto x = nn::make_batch({&e.features});
    const auto r = nn::infer(b, x);
    for (float v : r.activation.data()) sum += std::abs(v);
    n += r.activation.numel();
  }
  return sum / static_cast<double>(n);
}

Outcome criterion7(const ShortRun& s) {
  auto with = short_stage2_config(5);
  auto without = with;
  with.loss_weights.w_con = 1.0;
  without.loss_weights.w_con = 0.0;
  auto a = train::train_stage2(s.train, s.dev, s.stage1, with);
  auto b = train::train_stage2(s.train, s.dev, s.stage1, without);
  const double ma = bonafide_map_magnitude(a.bundle, s.dev);
  const double mb = bonafide_map_magnitude(b.bundle, s.dev);
  return {ma < mb, "mean bona fide |A_map| on dev after 5 epochs: w_con=1 " + fmt("%.4f", ma) +
                       ", w_con=0 " + fmt("%.4f", mb)};
}

Outcome criterion8() {
  std::mt19937_64 g(88);
  std::uniform_int_distribution<int> size(1, 50);
  std::uniform_int_distribution<int> coarse(0, 20);
  std::uniform_int_distribution<int> fine(0, 1000000);
  std::size_t exact = 0, invariant = 0;
  const int sets = 200;
  for (int t = 0; t < sets; ++t) {
    // Half the sets use a coarse grid, so ties are common.
    auto draw = [&] { return t % 2 ? double(coarse(g)) : double(fine(g)); };
    std::vector<double> b(size(g)), s(size(g));
    for (double& v : b) v = draw();
    for (double& v : s) v = draw() + (t % 3 == 0 ? 3.0 : 0.0);
    const double got = eval::compute_eer(b, s).eer;
    exact += got == oracle::brute_force_eer(b, s).eer;
    // Integer scores keep their order exactly under these maps.
    auto transformed = [](std::vector<double> v, int kind) {
      for (double& x : v)
        x = kind == 0 ? std::exp(x / 1e5) - 7.0 : kind == 1 ? 5.0 * x + 3.0 : std::cbrt(x) * 2.0;
      return v;
    };
    bool inv = true;
    for (int kind = 0; kind < 3; ++kind)
      inv = inv && eval::compute_eer(transformed(b, kind), transformed(s, kind)).eer == got;
    invariant += inv;
  }
  return {exact == sets && invariant == sets,
          std::to_string(exact) + "/" + std::to_string(sets) + " exact matches, " +
              std::to_string(invariant) + "/" + std::to_string(sets) +
              " invariant under 3 increasing maps"};
}

Outcome criterion9(const ShortRun& s, const ckpt::Checkpoint& trained, const fs::path& dir) {
  const auto path = dir / "probe.dsva";
  ckpt::save_checkpoint(trained, path);
  auto loaded = ckpt::load_checkpoint(path);
  auto original = trained;
  std::vector<data::Example> probe;
  for (std::size_t i = 0; i < 16 && i < s.dev.size(); ++i) {
    probe.push_back(s.dev.examples[i * s.dev.size() / 16]);
  }
  const auto sa = eval::score_examples(original.bundle, probe, 16);
  const auto sb = eval::score_examples(loaded.bundle, probe, 16);
  bool identical = sa.size() == 16 && sb.size() == 16;
  for (std::size_t i = 0; identical && i < sa.size(); ++i) {
    identical = std::memcmp(&sa[i].score, &sb[i].score, sizeof(double)) == 0;
  }
  const auto bytes = io::read_file(path);
  const bool bytes_same = ckpt::serialize(loaded) == bytes;

  std::size_t rejected = 0, tried = 0;
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{11}, bytes.size() / 3,
                          bytes.size() / 2, bytes.size() - 4, bytes.size() - 1}) {
    ++tried;
    const auto cut_path = dir / "truncated.dsva";
    io::write_file(cut_path, std::span(bytes).first(cut));
    ckpt::Checkpoint target = original;
    try {
      target = ckpt::load_checkpoint(cut_path);
    } catch (const FormatError&) {
      // Nothing was assigned: the target keeps its previous contents.
      rejected += ckpt::serialize(target) == bytes;
    }
  }
  return {identical && bytes_same && rejected == tried,
          std::string("16-clip probe scores ") + (identical ? "bit-identical" : "differ") +
              ", re-serialized bytes " + (bytes_same ? "identical" : "differ") + ", " +
              std::to_string(rejected) + "/" + std::to_string(tried) +
              " truncated files rejected"};
}

Outcome criterion10(const Pipeline& a, const Pipeline& b) {
  if (!a.ok) return {false, a.error};
  if (!b.ok) return {false, b.error};
  std::size_t files = 0, same = 0;
  std::string first_diff;
  for (const auto& e : fs::recursive_directory_iterator(a.root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a.root);
    ++files;
    const auto other = b.root / rel;
    if (fs::exists(other) && io::read_file(e.path()) == io::read_file(other)) {
      ++same;
    } else if (first_diff.empty()) {
      first_diff = rel.string();
    }
  }
  std::size_t files_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b.root)) files_b += e.is_regular_file();
  const bool pass = files > 0 && same == files && files_b == files;
  return {pass, std::to_string(same) + "/" + std::to_string(files) +
                    " output files byte-identical across two runs" +
                    (first_diff.empty() ? "" : " (first difference: " + first_diff + ")")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&failures](int n, const char* title, const Outcome& o) {
    std::printf("criterion %d: %s - %s: %s\n", n, o.pass ? "PASS" : "FAIL", title,
                o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [](const std::function<Outcome()>& fn) -> Outcome {
    try {
      return fn();
    } catch (const std::exception& e) {
      return {false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "gradient checks", guarded(criterion1));
  report(2, "KL against Monte Carlo", guarded(criterion2));
  report(3, "mel formula", guarded(criterion3));

  test::TempDir work_a, work_b, scratch;
  const Pipeline run_a = run_pipeline(work_a.path());
  report(4, "end-to-end toy run", guarded([&] { return criterion4(run_a); }));
  report(5, "disentanglement", guarded([&] { return criterion5(run_a); }));

  ShortRun short_run;
  ckpt::Checkpoint trained;
  bool short_ok = run_a.ok;
  if (short_ok) {
    try {
      short_run = load_short_run(run_a);
    } catch (const std::exception&) {
      short_ok = false;
    }
  }
  report(6, "freeze invariant", guarded([&]() -> Outcome {
           if (!short_ok) return {false, "toy pipeline unavailable"};
           return criterion6(run_a, short_run, trained);
         }));
  report(7, "concentration effect", guarded([&]() -> Outcome {
           if (!short_ok) return {false, "toy pipeline unavailable"};
           return criterion7(short_run);
         }));
  report(8, "EER oracle equivalence", guarded(criterion8));
  report(9, "checkpoint round trip", guarded([&]() -> Outcome {
           if (!short_ok || trained.stage != 2) return {false, "no trained checkpoint"};
           return criterion9(short_run, trained, scratch.path());
         }));

  const Pipeline run_b = run_pipeline(work_b.path());
  report(10, "determinism", guarded([&] { return criterion10(run_a, run_b); }));

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
