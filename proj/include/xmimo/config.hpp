// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "xmimo/campaign.hpp"

namespace xmimo {

using Json = nlohmann::ordered_json;

/// Every accepted key as a dotted path, in canonical order.
std::vector<std::string> config_keys();

/// Applies a JSON document (nested objects, dotted keys inside) on top of the
/// defaults. "sweep" and "compare_key" are ignored here. Unknown keys and type
/// mismatches throw ConfigError naming the key.
CampaignConfig config_from_json(const Json& doc);

/// Effective configuration as a nested document in canonical key order.
Json config_to_json(const CampaignConfig& cfg);

/// FNV-1a 64 over the key-sorted compact dump, 16 hex digits.
std::string config_hash(const Json& effective);

/// Parses "a.b=value". The value is read as JSON, falling back to a plain
/// string. Setting a swept key removes it from the sweep.
void apply_override(Json& doc, const std::string& assignment);

/// One point of a sweep.
struct Variant {
  std::string label;  // value of the compare key
  std::string group;  // "k=v;..." over the other sweep keys
  std::string dir;    // output subdirectory, empty without a sweep
  Json effective;
  CampaignConfig cfg;
};

/// Cartesian product of the sweep axes in key order, last key fastest.
std::vector<Variant> expand(const Json& doc);

/// Compare key of a document: explicit "compare_key", else the last sweep key.
std::string compare_key(const Json& doc);

Json load_json_file(const std::string& path);

}  // namespace xmimo
