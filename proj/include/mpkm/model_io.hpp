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

#ifndef MPKM_MODEL_IO_HPP_
#define MPKM_MODEL_IO_HPP_

#include <filesystem>
#include <string>

#include "mpkm/kernel_machine.hpp"

// Versioned human-readable model file (JSON). Floats are written with
// shortest-round-trip precision, so load(save(m)) reproduces every float
// field bit-exactly.

namespace mpkm::io {

inline constexpr int kSchemaVersion = 1;

std::string model_to_json(const km::TrainedModel& model);
km::TrainedModel model_from_json(const std::string& text);

void save_model(const km::TrainedModel& model,
                const std::filesystem::path& path);
km::TrainedModel load_model(const std::filesystem::path& path);

}  // namespace mpkm::io

#endif  // MPKM_MODEL_IO_HPP_
