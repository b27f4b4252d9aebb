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

#include "dsvae/dataset.hpp"

#include <algorithm>

#include "dsvae/error.hpp"

namespace dsvae::data {

std::size_t Dataset::count(int label) const {
  return static_cast<std::size_t>(
      std::count_if(examples.begin(), examples.end(),
                    [label](const Example& e) { return e.label == label; }));
}

std::string clip_id(const io::ManifestRecord& r) {
  const std::string& p = r.path;
  const auto slash = p.find_last_of('/');
  const auto dot = p.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return p;
  }
  return p.substr(0, dot);
}

Dataset load_dataset(std::span<const io::ManifestRecord> records,
                     const dsp::Frontend& frontend, OnError on_error) {
  Dataset ds;
  ds.examples.reserve(records.size());
  for (const auto& r : records) {
    try {
      Example e;
      e.clip_id = clip_id(r);
      e.label = r.y();
      e.synthesizer_id = r.synthesizer_id;
      e.split = r.split;
      e.features = frontend(io::load_wav(r.resolved)).values;
      ds.examples.push_back(std::move(e));
    } catch (const Error& err) {
      if (on_error == OnError::kThrow) {
        throw InputError(r.resolved.string() + ": " + err.what());
      }
      ds.failures.push_back({r.path, err.what()});
    }
  }
  return ds;
}

}  // namespace dsvae::data
