// Copyright 2026 The hpo Authors. All Rights Reserved.
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
// =============================================================================
#pragma once

#include <json.hpp>

#include "hpo/space.hpp"

namespace hpo {

nlohmann::json space_to_json(const ParamSpace& space);

/// Accepts either an explicit "values" list or an inclusive "range": [lo, hi]
/// per dimension. Categorical dims list "labels" instead.
ParamSpace space_from_json(const nlohmann::json& j);

}  // namespace hpo
