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

#include "xmimo/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>

namespace xmimo {

namespace {

double read_number(const Json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key + ": expected a number, got " + v.dump());
  return v.get<double>();
}

int read_int(const Json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(key + ": expected an integer, got " + v.dump());
  return v.get<int>();
}

bool read_bool(const Json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError(key + ": expected true or false, got " + v.dump());
  return v.get<bool>();
}

std::string read_string(const Json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key + ": expected a string, got " + v.dump());
  return v.get<std::string>();
}

struct Field {
  std::string key;
  std::function<Json(const CampaignConfig&)> get;
  std::function<void(CampaignConfig&, const Json&)> set;
};

#define XMIMO_FIELD(path, member, reader)                                    \
  Field {                                                                    \
    path, [](const CampaignConfig& c) { return Json(c.member); },            \
        [](CampaignConfig& c, const Json& v) { c.member = reader(v, path); } \
  }

#define XMIMO_ARRAY_FIELDS(prefix, member)                                     \
  XMIMO_FIELD(prefix ".port_cols", member.port_cols, read_int),               \
      XMIMO_FIELD(prefix ".port_rows", member.port_rows, read_int),           \
      XMIMO_FIELD(prefix ".dual_polarized", member.dual_polarized, read_bool), \
      XMIMO_FIELD(prefix ".subarray_len", member.subarray_len, read_int),     \
      XMIMO_FIELD(prefix ".elem_spacing_h", member.elem_spacing_h, read_number), \
      XMIMO_FIELD(prefix ".elem_spacing_v", member.elem_spacing_v, read_number), \
      XMIMO_FIELD(prefix ".elem_gain_max", member.elem_gain_max, read_number), \
      XMIMO_FIELD(prefix ".elem_hpbw_az", member.elem_hpbw_az, read_number),  \
      XMIMO_FIELD(prefix ".elem_hpbw_zen", member.elem_hpbw_zen, read_number), \
      XMIMO_FIELD(prefix ".downtilt", member.downtilt, read_number),          \
      XMIMO_FIELD(prefix ".isotropic", member.isotropic, read_bool)

const std::vector<Field>& registry() {
  static const std::vector<Field> fields = {
      XMIMO_FIELD("scenario", scenario, read_string),
      Field{"seed",
            [](const CampaignConfig& c) { return c.seed ? Json(*c.seed) : Json(nullptr); },
            [](CampaignConfig& c, const Json& v) {
              if (v.is_null()) {
                c.seed.reset();
                return;
              }
              if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
                throw ConfigError("seed: expected a non-negative integer, got " + v.dump());
              c.seed = v.get<std::uint64_t>();
            }},
      Field{"mode", [](const CampaignConfig& c) { return Json(to_string(c.mode)); },
            [](CampaignConfig& c, const Json& v) { c.mode = parse_mode(read_string(v, "mode")); }},
      Field{"bs", [](const CampaignConfig& c) { return Json(c.bs); },
            [](CampaignConfig& c, const Json& v) {
              c.bs = read_string(v, "bs");
              c.bs_array = array_preset(c.bs);
            }},
      Field{"ue", [](const CampaignConfig& c) { return Json(c.ue); },
            [](CampaignConfig& c, const Json& v) {
              c.ue = read_string(v, "ue");
              c.ue_array = array_preset(c.ue);
            }},
      XMIMO_ARRAY_FIELDS("bs_array", bs_array),
      XMIMO_ARRAY_FIELDS("ue_array", ue_array),
      XMIMO_FIELD("ues_per_cell", ues_per_cell, read_int),
      XMIMO_FIELD("isd", isd, read_number),
      XMIMO_FIELD("n_drops", n_drops, read_int),
      XMIMO_FIELD("ttis_per_drop", ttis_per_drop, read_int),
      XMIMO_FIELD("warmup_ttis", warmup_ttis, read_int),
      XMIMO_FIELD("bandwidth", bandwidth, read_number),
      XMIMO_FIELD("n_rb_groups", n_rb_groups, read_int),
      XMIMO_FIELD("carrier", carrier, read_number),
      XMIMO_FIELD("tx_power_dbm", tx_power_dbm, read_number),
      XMIMO_FIELD("noise_figure_db", noise_figure_db, read_number),
      XMIMO_FIELD("overhead", overhead, read_number),
      XMIMO_FIELD("tti_seconds", tti_seconds, read_number),
      XMIMO_FIELD("layout.n_sites", layout.n_sites, read_int),
      XMIMO_FIELD("layout.sectors_per_site", layout.sectors_per_site, read_int),
      XMIMO_FIELD("layout.bs_height", layout.bs_height, read_number),
      XMIMO_FIELD("layout.ue_height", layout.ue_height, read_number),
      XMIMO_FIELD("layout.min_bs_ue_dist_2d", layout.min_bs_ue_dist_2d, read_number),
      XMIMO_FIELD("layout.wraparound", layout.wraparound, read_bool),
      XMIMO_FIELD("link.se_cap", link.se_cap, read_number),
      XMIMO_FIELD("link.implementation_loss_db", link.implementation_loss_db, read_number),
      XMIMO_FIELD("scheduler.pf_window", scheduler.pf_window, read_number),
      XMIMO_FIELD("scheduler.fairness_exponent", scheduler.fairness_exponent, read_number),
      XMIMO_FIELD("scheduler.epsilon_rate", scheduler.epsilon_rate, read_number),
      XMIMO_FIELD("scheduler.max_paired", scheduler.max_paired, read_int),
      XMIMO_FIELD("scheduler.mu_max_rank", scheduler.mu_max_rank, read_int),
      XMIMO_FIELD("scheduler.max_layers_su", scheduler.max_layers_su, read_int),
      XMIMO_FIELD("scheduler.max_total_layers", scheduler.max_total_layers, read_int),
      XMIMO_FIELD("channel.explicit_interferers", explicit_interferers, read_int),
      XMIMO_FIELD("precoding.per_rb", precoding.per_rb, read_bool),
      XMIMO_FIELD("precoding.water_filling", precoding.water_filling, read_bool),
      XMIMO_FIELD("decision_log", decision_log, read_bool),
  };
  return fields;
}

#undef XMIMO_ARRAY_FIELDS
#undef XMIMO_FIELD

const Field* find_field(const std::string& key) {
  for (const Field& f : registry())
    if (f.key == key) return &f;
  return nullptr;
}

bool is_prefix(const std::string& path) {
  const std::string p = path + ".";
  for (const Field& f : registry())
    if (f.key.compare(0, p.size(), p) == 0) return true;
  return false;
}

void flatten(const Json& node, const std::string& prefix, std::vector<std::pair<std::string, Json>>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (prefix.empty() && (key == "sweep" || key == "compare_key")) continue;
    if (find_field(key)) {
      out.emplace_back(key, it.value());
    } else if (it.value().is_object() && is_prefix(key)) {
      flatten(it.value(), key, out);
    } else {
      throw ConfigError(key + ": unknown key");
    }
  }
}

void set_path(Json& doc, const std::string& key, const Json& value) {
  Json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key + ": malformed key");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    Json& child = (*node)[part];
    if (!child.is_object()) child = Json::object();
    node = &child;
    start = dot + 1;
  }
}

std::string value_text(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::string sanitize(const std::string& s) {
  std::string out;
  for (char ch : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' || ch == '=' || ch == '_';
    out += keep ? ch : '_';
  }
  return out;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : registry()) keys.push_back(f.key);
  return keys;
}

CampaignConfig config_from_json(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  std::vector<std::pair<std::string, Json>> entries;
  flatten(doc, "", entries);
  CampaignConfig c;
  c.bs_array = array_preset(c.bs);
  c.ue_array = array_preset(c.ue);
  // Presets first so that array overrides land on top of them.
  for (const auto& [key, value] : entries)
    if (key == "bs" || key == "ue") find_field(key)->set(c, value);
  for (const auto& [key, value] : entries)
    if (key != "bs" && key != "ue") find_field(key)->set(c, value);
  c.finalize();
  return c;
}

Json config_to_json(const CampaignConfig& cfg) {
  Json doc = Json::object();
  for (const Field& f : registry()) set_path(doc, f.key, f.get(cfg));
  return doc;
}

std::string config_hash(const Json& effective) {
  const std::string canonical = nlohmann::json::parse(effective.dump()).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_override(Json& doc, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got \"" + assignment + "\"");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  if (key == "compare_key") {
    doc["compare_key"] = value;
    return;
  }
  if (key.rfind("sweep.", 0) == 0) {
    const std::string axis = key.substr(6);
    if (!find_field(axis)) throw ConfigError(key + ": unknown key");
    if (!value.is_array()) value = Json::array({value});
    doc["sweep"][axis] = value;
    return;
  }
  if (!find_field(key)) throw ConfigError(key + ": unknown key");
  if (doc.contains("sweep") && doc["sweep"].is_object()) doc["sweep"].erase(key);
  set_path(doc, key, value);
}

std::string compare_key(const Json& doc) {
  if (doc.contains("compare_key")) {
    if (!doc["compare_key"].is_string()) throw ConfigError("compare_key: expected a string");
    return doc["compare_key"].get<std::string>();
  }
  if (doc.contains("sweep") && doc["sweep"].is_object() && !doc["sweep"].empty())
    return std::prev(doc["sweep"].end()).key();
  return "";
}

std::vector<Variant> expand(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  std::vector<std::pair<std::string, Json>> axes;
  if (doc.contains("sweep")) {
    const Json& sweep = doc["sweep"];
    if (!sweep.is_object()) throw ConfigError("sweep: expected an object of key: [values]");
    for (auto it = sweep.begin(); it != sweep.end(); ++it) {
      if (!find_field(it.key())) throw ConfigError("sweep." + it.key() + ": unknown key");
      if (!it.value().is_array() || it.value().empty())
        throw ConfigError("sweep." + it.key() + ": expected a non-empty array");
      axes.emplace_back(it.key(), it.value());
    }
  }
  const std::string cmp = compare_key(doc);
  if (!cmp.empty() && !axes.empty()) {
    bool found = false;
    for (const auto& a : axes) found = found || a.first == cmp;
    if (!found) throw ConfigError("compare_key: \"" + cmp + "\" is not a sweep key");
  }
  Json base = doc;
  base.erase("sweep");
  base.erase("compare_key");

  std::vector<Variant> out;
  std::vector<std::size_t> idx(axes.size(), 0);
  for (;;) {
    Json d = base;
    std::string group, label, dir;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const Json& v = axes[a].second[idx[a]];
      set_path(d, axes[a].first, v);
      const std::string kv = axes[a].first + "=" + value_text(v);
      dir += (dir.empty() ? "" : ",") + kv;
      if (axes[a].first == cmp) {
        label = value_text(v);
      } else {
        group += (group.empty() ? "" : ";") + kv;
      }
    }
    Variant var;
    var.cfg = config_from_json(d);
    var.effective = config_to_json(var.cfg);
    var.label = axes.empty() ? var.cfg.scenario : label;
    var.group = group;
    var.dir = sanitize(dir);
    out.push_back(std::move(var));
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].second.size()) break;
      idx[a] = 0;
      if (a == 0) return out;
    }
    if (axes.empty()) return out;
  }
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace xmimo
