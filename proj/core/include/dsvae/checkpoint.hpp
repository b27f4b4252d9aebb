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
#include <vector>

#include "dsvae/dsp.hpp"
#include "dsvae/model.hpp"
#include "dsvae/optim.hpp"

namespace dsvae::ckpt {

inline constexpr char kMagic[4] = {'D', 'S', 'V', 'A'};
inline constexpr std::uint32_t kFormatVersion = 1;

struct EpochMetrics {
  std::uint64_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean total loss over the epoch
  double val_balanced_accuracy = 0.0;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

/// Everything needed to resume training or run inference.
struct Checkpoint {
  nn::ModelBundle bundle;
  dsp::FrontendConfig frontend;
  int stage = 1;
  std::uint64_t iteration = 0;  // optimizer steps taken
  std::uint64_t epoch = 0;      // completed passes over the data
  ad::OptimizerState optimizer;
  std::vector<EpochMetrics> history;
  std::vector<double> loss_trace;  // total loss of every step
};

/// Layout: "DSVA", u32 version, u32 header length, JSON header, then
/// little-endian float32 blobs: every bundle parameter in declared order,
/// followed by the optimizer's first and then second moments.
std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
/// Throws FormatError (with byte offset) on bad magic, version, header or
/// size. Nothing is returned unless the whole file parsed.
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

/// Writes to a sibling temporary file and renames it into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dsvae::ckpt
