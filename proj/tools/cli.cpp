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

#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <system_error>

#include "dsvae/checkpoint.hpp"
#include "dsvae/config.hpp"
#include "dsvae/data_io.hpp"
#include "dsvae/dataset.hpp"
#include "dsvae/error.hpp"
#include "dsvae/evaluation.hpp"
#include "dsvae/toy_corpus.hpp"
#include "dsvae/training.hpp"
#include "json.hpp"

namespace dsvae::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitInput = 1;
constexpr int kExitInternal = 2;

struct Options {
  std::string config;
  std::string manifest;
  std::string val_manifest;
  std::vector<std::string> checkpoints;
  std::string stage1_checkpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string wav;
  std::string maps;
  std::string which = "both";
  std::string split = "all";
};

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::vector<io::ManifestRecord> rows_for(const std::vector<io::ManifestRecord>& all,
                                         const std::string& split) {
  if (split == "all") return all;
  return io::filter_split(all, io::split_from_string(split));
}

// The given split when the manifest has rows for it, otherwise every row.
std::vector<io::ManifestRecord> prefer_split(const std::vector<io::ManifestRecord>& all,
                                             io::Split split) {
  auto rows = io::filter_split(all, split);
  return rows.empty() ? all : rows;
}

StageConfig stage_config(const Options& o, int stage) {
  StageConfig c = o.config.empty()
                      ? (stage == 1 ? StageConfig::stage1_defaults()
                                    : StageConfig::stage2_defaults())
                      : load_stage_config(o.config);
  if (c.stage != stage) {
    throw InputError("config is for stage " + std::to_string(c.stage) +
                     ", this subcommand trains stage " + std::to_string(stage));
  }
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

ckpt::Checkpoint load_stage2_checkpoint(const std::string& path) {
  auto c = ckpt::load_checkpoint(path);
  if (!c.bundle.has(nn::Subnet::kClassifier)) {
    throw InputError(path + " is a stage-" + std::to_string(c.stage) +
                     " checkpoint; a stage-2 checkpoint is required");
  }
  return c;
}

void print_failures(const std::vector<data::LoadFailure>& failures) {
  for (const auto& f : failures) {
    std::cerr << "warning: skipped " << f.path << ": " << f.message << "\n";
  }
}

int run_gen_toy(const Options& o) {
  toy::ToyConfig cfg = o.config.empty() ? toy::ToyConfig{} : toy::load_toy_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  const auto manifest = toy::generate_toy_dataset(cfg, o.out);
  std::cout << manifest.string() << "\n";
  return 0;
}

class NdjsonLog {
 public:
  explicit NdjsonLog(const fs::path& path) : f_(std::fopen(path.string().c_str(), "wb")) {
    if (!f_) throw IoError("cannot open '" + path.string() + "' for writing");
  }
  ~NdjsonLog() {
    if (f_) std::fclose(f_);
  }
  NdjsonLog(const NdjsonLog&) = delete;
  NdjsonLog& operator=(const NdjsonLog&) = delete;

  void operator()(const std::string& line) {
    std::fputs(line.c_str(), f_);
    std::fputc('\n', f_);
  }

 private:
  std::FILE* f_;
};

int run_train_stage1(const Options& o) {
  const StageConfig cfg = stage_config(o, 1);
  const auto rows = prefer_split(io::parse_manifest(o.manifest), io::Split::kTrain);
  const dsp::FrontendConfig fe_cfg;
  const dsp::Frontend frontend(fe_cfg);
  const auto corpus = data::load_dataset(rows, frontend);
  make_dir(o.out);
  io::write_text(fs::path(o.out) / "config.json", format_stage_config(cfg));

  NdjsonLog log(fs::path(o.out) / "train_stage1.ndjson");
  train::Hooks hooks;
  hooks.log = [&log](const std::string& line) { log(line); };
  hooks.on_step = [&cfg](const train::StepInfo& s) {
    if ((s.step + 1) % 50 == 0 || s.step + 1 == cfg.max_iterations) {
      std::cerr << "stage 1: step " << s.step + 1 << "/" << cfg.max_iterations
                << " loss " << s.report.total << "\n";
    }
  };
  const auto ckpt = train::train_stage1(corpus, cfg, fe_cfg, hooks);
  const auto path = fs::path(o.out) / "stage1.dsva";
  ckpt::save_checkpoint(ckpt, path);
  std::cout << path.string() << "\n";
  return 0;
}

int run_train_stage2(const Options& o) {
  const StageConfig cfg = stage_config(o, 2);
  const auto stage1 = ckpt::load_checkpoint(o.stage1_checkpoint);
  const dsp::Frontend frontend(stage1.frontend);
  const auto all = io::parse_manifest(o.manifest);
  const auto train_rows = prefer_split(all, io::Split::kTrain);
  std::vector<io::ManifestRecord> val_rows;
  if (!o.val_manifest.empty()) {
    val_rows = prefer_split(io::parse_manifest(o.val_manifest), io::Split::kDev);
  } else {
    val_rows = io::filter_split(all, io::Split::kDev);
    if (val_rows.empty()) {
      throw InputError("no validation data: pass --val-manifest or add dev rows");
    }
  }
  const auto train_set = data::load_dataset(train_rows, frontend);
  const auto val_set = data::load_dataset(val_rows, frontend);
  make_dir(o.out);
  io::write_text(fs::path(o.out) / "config.json", format_stage_config(cfg));

  NdjsonLog log(fs::path(o.out) / "train_stage2.ndjson");
  json history = json::array();
  train::Hooks hooks;
  hooks.log = [&log](const std::string& line) { log(line); };
  hooks.on_epoch = [&](const ckpt::Checkpoint& c) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%03llu.dsva",
                  static_cast<unsigned long long>(c.epoch));
    const auto path = fs::path(o.out) / name;
    ckpt::save_checkpoint(c, path);
    const auto& m = c.history.back();
    history.push_back({{"epoch", m.epoch},
                       {"checkpoint", std::string(name)},
                       {"train_loss", m.train_loss},
                       {"val_balanced_accuracy", m.val_balanced_accuracy}});
    std::cerr << "stage 2: epoch " << c.epoch << "/" << cfg.epochs << " loss "
              << m.train_loss << " val balanced accuracy " << m.val_balanced_accuracy
              << "\n";
    std::cout << path.string() << "\n";
  };
  train::train_stage2(train_set, val_set, stage1, cfg, hooks);
  io::write_text(fs::path(o.out) / "history.json", history.dump(2) + "\n");
  return 0;
}

int run_select_best(const Options& o) {
  const std::string val_path = o.val_manifest.empty() ? o.manifest : o.val_manifest;
  if (val_path.empty()) throw InputError("select-best needs --val-manifest");
  if (o.checkpoints.empty()) throw InputError("select-best needs --checkpoint");
  // The validation features depend on the frontend recorded in the checkpoints.
  const auto first = ckpt::load_checkpoint(o.checkpoints.front());
  const dsp::Frontend frontend(first.frontend);
  const auto rows = prefer_split(io::parse_manifest(val_path), io::Split::kDev);
  const auto val = data::load_dataset(rows, frontend);
  std::vector<fs::path> paths(o.checkpoints.begin(), o.checkpoints.end());
  const auto sel = train::select_best(paths, val);

  make_dir(o.out);
  const auto best = fs::path(o.out) / "best.dsva";
  io::write_file(best, io::read_file(paths[sel.index]));
  json cands = json::array();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    cands.push_back({{"checkpoint", paths[i].filename().string()},
                     {"balanced_accuracy", sel.accuracies[i]}});
  }
  json j = {{"selected", paths[sel.index].filename().string()},
            {"balanced_accuracy", sel.balanced_accuracy},
            {"candidates", cands}};
  io::write_text(fs::path(o.out) / "selection.json", j.dump(2) + "\n");
  std::cerr << "selected " << paths[sel.index].string() << " (balanced accuracy "
            << sel.balanced_accuracy << ")\n";
  std::cout << best.string() << "\n";
  return 0;
}

int run_eval(const Options& o) {
  auto c = load_stage2_checkpoint(o.checkpoints.front());
  const dsp::Frontend frontend(c.frontend);
  const auto rows = rows_for(io::parse_manifest(o.manifest), o.split);
  auto run = eval::score_dataset(c.bundle, frontend, rows);
  print_failures(run.failures);
  auto report = eval::evaluate(run.records);
  report.failures = run.failures;
  make_dir(o.out);
  io::write_text(fs::path(o.out) / "scores.csv", eval::format_scores_csv(run.records));
  const std::string text = eval::format_report_json(report);
  io::write_text(fs::path(o.out) / "report.json", text);
  std::cout << text;
  return 0;
}

int run_export_embeddings(const Options& o) {
  auto c = ckpt::load_checkpoint(o.checkpoints.front());
  const auto kind = eval::embedding_kind_from_string(o.which);
  const dsp::Frontend frontend(c.frontend);
  const auto rows = rows_for(io::parse_manifest(o.manifest), o.split);
  const auto ds = data::load_dataset(rows, frontend, data::OnError::kCollect);
  print_failures(ds.failures);
  const auto emb = eval::export_embeddings(c.bundle, ds.examples, kind);
  make_dir(o.out);
  const auto path = fs::path(o.out) / "embeddings.csv";
  io::write_text(path, eval::format_embeddings_csv(emb));
  std::cout << path.string() << "\n";
  return 0;
}

ad::Tensor as_matrix(const ad::Tensor& t, std::size_t item) {
  const std::size_t h = t.extent(2), w = t.extent(3);
  ad::Tensor m({h, w});
  const auto src = t.data().subspan(item * h * w, h * w);
  std::copy(src.begin(), src.end(), m.data().begin());
  return m;
}

int run_infer(const Options& o) {
  auto c = load_stage2_checkpoint(o.checkpoints.front());
  const dsp::Frontend frontend(c.frontend);
  const auto features = frontend(io::load_wav(o.wav)).values;
  const ad::Tensor x = nn::make_batch({&features});
  const auto r = nn::infer(c.bundle, x);
  char score[32];
  std::snprintf(score, sizeof score, "%.6g\n", static_cast<double>(r.scores[0]));
  std::cout << score;

  const std::string stem = fs::path(o.wav).stem().string();
  const std::string dir = !o.maps.empty() ? o.maps : o.out;
  if (dir.empty()) return 0;
  make_dir(dir);
  io::write_text(fs::path(dir) / (stem + ".score.txt"), score);
  if (o.maps.empty()) return 0;
  const ad::Tensor x_hat = nn::reconstruct_joint(c.bundle, x);
  const auto minmax = io::PgmScaling::minmax();
  const fs::path maps(o.maps);
  io::export_pgm(features, maps / (stem + ".X.pgm"), minmax);
  io::export_pgm(as_matrix(x_hat, 0), maps / (stem + ".Xhat.pgm"), minmax);
  io::export_pgm(as_matrix(r.activation, 0), maps / (stem + ".Amap.pgm"),
                 io::PgmScaling::fixed(0.0, 1.0));
  io::export_pgm(as_matrix(r.activated, 0), maps / (stem + ".Xmap.pgm"), minmax);
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Synthetic speech detection with disentangled VAE features", "dsvae"};
  app.require_subcommand(1, 1);
  Options o;
  std::uint64_t seed = 0;

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Override the configured seed");
  };
  auto* gen = app.add_subcommand("gen-toy", "Generate the toy corpus");
  gen->add_option("--config", o.config, "Toy corpus JSON")->check(CLI::ExistingFile);
  gen->add_option("--out", o.out, "Output directory")->required();
  add_seed(gen);

  auto* s1 = app.add_subcommand("train-stage1", "Train E_G and D");
  s1->add_option("--config", o.config, "Stage config JSON")->check(CLI::ExistingFile);
  s1->add_option("--manifest", o.manifest, "Corpus manifest")
      ->required()
      ->check(CLI::ExistingFile);
  s1->add_option("--out", o.out, "Output directory")->required();
  add_seed(s1);

  auto* s2 = app.add_subcommand("train-stage2", "Train the disentangled branch");
  s2->add_option("--config", o.config, "Stage config JSON")->check(CLI::ExistingFile);
  s2->add_option("--manifest", o.manifest, "Labelled manifest")
      ->required()
      ->check(CLI::ExistingFile);
  s2->add_option("--val-manifest", o.val_manifest, "Validation manifest")
      ->check(CLI::ExistingFile);
  s2->add_option("--stage1-checkpoint", o.stage1_checkpoint, "Stage-1 checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  s2->add_option("--out", o.out, "Output directory")->required();
  add_seed(s2);

  auto* sel = app.add_subcommand("select-best", "Pick the best epoch checkpoint");
  sel->add_option("--checkpoint", o.checkpoints, "Candidate checkpoints")
      ->required()
      ->check(CLI::ExistingFile);
  sel->add_option("--val-manifest", o.val_manifest, "Validation manifest")
      ->check(CLI::ExistingFile);
  sel->add_option("--manifest", o.manifest, "Manifest whose dev rows validate")
      ->check(CLI::ExistingFile);
  sel->add_option("--out", o.out, "Output directory")->required();

  const std::vector<std::string> splits{"all", "train", "dev", "eval"};
  auto* ev = app.add_subcommand("eval", "Score a manifest and write a report");
  ev->add_option("--checkpoint", o.checkpoints, "Stage-2 checkpoint")
      ->required()
      ->expected(1)
      ->check(CLI::ExistingFile);
  ev->add_option("--manifest", o.manifest, "Manifest to score")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--split", o.split, "Rows to use")->check(CLI::IsMember(splits));
  ev->add_option("--out", o.out, "Output directory")->required();

  auto* inf = app.add_subcommand("infer", "Score one clip");
  inf->add_option("--checkpoint", o.checkpoints, "Stage-2 checkpoint")
      ->required()
      ->expected(1)
      ->check(CLI::ExistingFile);
  inf->add_option("--wav", o.wav, "Input clip")->required()->check(CLI::ExistingFile);
  inf->add_option("--maps", o.maps, "Directory for the score and PGM maps");
  inf->add_option("--out", o.out, "Directory for the score file");

  auto* emb = app.add_subcommand("export-embeddings", "Write mean latents as CSV");
  emb->add_option("--checkpoint", o.checkpoints, "Checkpoint")
      ->required()
      ->expected(1)
      ->check(CLI::ExistingFile);
  emb->add_option("--manifest", o.manifest, "Manifest")
      ->required()
      ->check(CLI::ExistingFile);
  emb->add_option("--which", o.which, "fg, fd or both")
      ->check(CLI::IsMember({"fg", "fd", "both"}));
  emb->add_option("--split", o.split, "Rows to use")->check(CLI::IsMember(splits));
  emb->add_option("--out", o.out, "Output directory")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, std::cerr, std::cerr);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    if (e.get_exit_code() != 0) std::cerr << app.help();
    return e.get_exit_code() == 0 ? 0 : kExitInput;
  }
  for (auto* sub : {gen, s1, s2}) {
    if (sub->parsed() && sub->count("--seed")) o.seed = seed;
  }

  try {
    if (gen->parsed()) return run_gen_toy(o);
    if (s1->parsed()) return run_train_stage1(o);
    if (s2->parsed()) return run_train_stage2(o);
    if (sel->parsed()) return run_select_best(o);
    if (ev->parsed()) return run_eval(o);
    if (inf->parsed()) return run_infer(o);
    if (emb->parsed()) return run_export_embeddings(o);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const UnsupportedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace dsvae::cli
