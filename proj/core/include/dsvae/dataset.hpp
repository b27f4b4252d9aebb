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

#include <span>
#include <string>
#include <vector>

#include "dsvae/data_io.hpp"
#include "dsvae/dsp.hpp"

namespace dsvae::data {

/// One clip turned into network input.
struct Example {
  std::string clip_id;
  int label = 0;  // 1 = synthetic
  std::string synthesizer_id;
  io::Split split = io::Split::kTrain;
  ad::Tensor features;  // [n_mels, target_frames]
};

struct LoadFailure {
  std::string path;
  std::string message;
};

struct Dataset {
  std::vector<Example> examples;
  std::vector<LoadFailure> failures;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
  std::size_t count(int label) const;
  bool has_both_labels() const { return count(0) > 0 && count(1) > 0; }
};

/// Manifest path without its extension.
std::string clip_id(const io::ManifestRecord& r);

enum class OnError { kThrow, kCollect };

/// Loads every record through `frontend`, in manifest order. With kCollect
/// unreadable clips are listed in `failures` and skipped.
Dataset load_dataset(std::span<const io::ManifestRecord> records,
                     const dsp::Frontend& frontend,
                     OnError on_error = OnError::kThrow);

}  // namespace dsvae::data
