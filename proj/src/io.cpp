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

#include "xmimo/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace xmimo {

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double round9(double v) { return std::strtod(fmt9(v).c_str(), nullptr); }

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json r9(double v) { return Json(round9(v)); }

Json r9_array(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(r9(x));
  return a;
}

std::string json_text(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(tmp + ": cannot open for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error(tmp + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error(path + ": rename failed: " + ec.message());
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json report_to_json(const ThroughputReport& report, const std::string& label, const std::string& group,
                    const Json& effective) {
  Json doc = Json::object();
  doc["schema"] = "xmimo.report";
  doc["schema_version"] = kReportSchemaVersion;
  doc["label"] = label;
  doc["group"] = group;
  doc["scenario"] = report.scenario;
  doc["seed"] = report.seed;
  doc["config_hash"] = report.config_hash;
  doc["config"] = effective;

  double cap = 0.0;
  for (double c : report.drop_mean_capacity) cap += c;
  if (!report.drop_mean_capacity.empty()) cap /= static_cast<double>(report.drop_mean_capacity.size());
  Json m = Json::object();
  m["n_ues"] = report.ues.size();
  m["decisions"] = report.decisions;
  m["mean_throughput_bps"] = r9(report.mean_throughput);
  m["p5_throughput_bps"] = r9(report.p5_throughput);
  m["cell_throughput_bps"] = r9(report.cell_throughput);
  m["mean_layers"] = r9(report.mean_layers);
  m["frac_layers_gt4"] = r9(report.frac_layers_gt4);
  m["mean_su_capacity_bps_hz"] = r9(cap);
  doc["metrics"] = m;

  doc["layer_histogram"] = report.layer_histogram;
  doc["drop_mean_capacity_bps_hz"] = r9_array(report.drop_mean_capacity);

  // Served sum per cell, averaged over drops.
  int n_drops = 0, n_cells = 0;
  for (const UeResult& u : report.ues) {
    n_drops = std::max(n_drops, u.drop + 1);
    n_cells = std::max(n_cells, u.cell + 1);
  }
  std::vector<double> per_cell(static_cast<std::size_t>(n_cells), 0.0);
  for (const UeResult& u : report.ues) per_cell[static_cast<std::size_t>(u.cell)] += u.throughput_bps / n_drops;
  doc["per_cell_throughput_bps"] = r9_array(per_cell);
  return doc;
}

std::string per_ue_csv(const ThroughputReport& report) {
  std::string s = "drop,ue,cell,los,coupling_db,throughput_bps,scheduled_fraction,su_capacity_bps_hz\n";
  for (const UeResult& u : report.ues)
    s += std::to_string(u.drop) + "," + std::to_string(u.ue) + "," + std::to_string(u.cell) + "," +
         (u.los ? "1" : "0") + "," + fmt9(u.coupling_db) + "," + fmt9(u.throughput_bps) + "," +
         fmt9(u.scheduled_fraction) + "," + fmt9(u.su_capacity) + "\n";
  return s;
}

std::string layers_hist_csv(const ThroughputReport& report) {
  std::string s = "layers,count,fraction\n";
  for (std::size_t l = 0; l < report.layer_histogram.size(); ++l) {
    const double f = report.decisions > 0 ? static_cast<double>(report.layer_histogram[l]) / report.decisions : 0.0;
    s += std::to_string(l) + "," + std::to_string(report.layer_histogram[l]) + "," + fmt9(f) + "\n";
  }
  return s;
}

std::string decisions_csv(const ThroughputReport& report) {
  std::string s = "drop,tti,cell,ues,ranks,mean_sinr_db,bits\n";
  auto join = [](const auto& v, auto f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + f(v[i]);
    return out;
  };
  for (const DecisionRecord& d : report.decision_log)
    s += std::to_string(d.drop) + "," + std::to_string(d.tti) + "," + std::to_string(d.cell) + "," +
         join(d.ues, [](int x) { return std::to_string(x); }) + "," +
         join(d.ranks, [](int x) { return std::to_string(x); }) + "," +
         join(d.mean_sinr_db, [](double x) { return fmt9(x); }) + "," + fmt9(d.bits) + "\n";
  return s;
}

std::string summary_csv(const std::vector<Json>& reports) {
  std::string s =
      "label,group,scenario,mode,bs,ue,isd,ues_per_cell,n_drops,ttis_per_drop,seed,config_hash,n_ues,decisions,"
      "mean_throughput_bps,p5_throughput_bps,cell_throughput_bps,mean_layers,frac_layers_gt4\n";
  for (const Json& r : reports) {
    const Json& c = r.at("config");
    const Json& m = r.at("metrics");
    s += json_text(r.at("label")) + "," + json_text(r.at("group")) + "," + json_text(r.at("scenario")) + "," +
         json_text(c.at("mode")) + "," + json_text(c.at("bs")) + "," + json_text(c.at("ue")) + "," +
         fmt9(c.at("isd").get<double>()) + "," + json_text(c.at("ues_per_cell")) + "," + json_text(c.at("n_drops")) +
         "," + json_text(c.at("ttis_per_drop")) + "," + json_text(r.at("seed")) + "," + json_text(r.at("config_hash")) +
         "," + json_text(m.at("n_ues")) + "," + json_text(m.at("decisions")) + "," +
         fmt9(m.at("mean_throughput_bps").get<double>()) + "," + fmt9(m.at("p5_throughput_bps").get<double>()) + "," +
         fmt9(m.at("cell_throughput_bps").get<double>()) + "," + fmt9(m.at("mean_layers").get<double>()) + "," +
         fmt9(m.at("frac_layers_gt4").get<double>()) + "\n";
  }
  return s;
}

std::vector<std::string> write_run_outputs(const std::string& dir, const ThroughputReport& report,
                                           const std::string& label, const std::string& group,
                                           const Json& effective) {
  const Json doc = report_to_json(report, label, group, effective);
  const std::filesystem::path d(dir);
  std::vector<std::string> files = {"report.json", "summary.csv", "per_ue.csv", "layers_hist.csv"};
  write_text_atomic((d / "report.json").string(), doc.dump(2) + "\n");
  write_text_atomic((d / "summary.csv").string(), summary_csv({doc}));
  write_text_atomic((d / "per_ue.csv").string(), per_ue_csv(report));
  write_text_atomic((d / "layers_hist.csv").string(), layers_hist_csv(report));
  if (!report.decision_log.empty()) {
    write_text_atomic((d / "decisions.csv").string(), decisions_csv(report));
    files.push_back("decisions.csv");
  }
  return files;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string s =
      "group,variant,baseline,mean_throughput_bps,rel_mean_pct,p5_throughput_bps,rel_p5_pct,"
      "cell_throughput_bps,rel_cell_pct,mean_layers,frac_layers_gt4\n";
  for (const CompareRow& r : rows)
    s += r.group + "," + r.variant + "," + r.baseline + "," + fmt9(r.mean_throughput) + "," + fmt9(r.rel_mean_pct) +
         "," + fmt9(r.p5_throughput) + "," + fmt9(r.rel_p5_pct) + "," + fmt9(r.cell_throughput) + "," +
         fmt9(r.rel_cell_pct) + "," + fmt9(r.mean_layers) + "," + fmt9(r.frac_layers_gt4) + "\n";
  return s;
}

std::string compare_table(const std::vector<CompareRow>& rows) {
  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %-10s %12s %12s %12s %9s %8s\n", "group", "variant", "avg tput %", "5% tput %",
                "cell tput %", "layers", ">4 frac");
  s += buf;
  for (const CompareRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%-28s %-10s %12.1f %12.1f %12.1f %9.2f %8.3f\n",
                  r.group.empty() ? "-" : r.group.c_str(), r.variant.c_str(), r.rel_mean_pct, r.rel_p5_pct,
                  r.rel_cell_pct, r.mean_layers, r.frac_layers_gt4);
    s += buf;
  }
  return s;
}

Json read_report(const std::string& path) {
  const std::string text = read_text(path);
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("schema", "") != "xmimo.report")
    throw ConfigError(path + ": not an xmimo report");
  if (doc.value("schema_version", -1) != kReportSchemaVersion)
    throw ConfigError(path + ": unsupported report schema_version " + doc.value("schema_version", Json()).dump());
  return doc;
}

ReportSummary summary_from_report(const Json& r) {
  try {
    const Json& c = r.at("config");
    const Json& m = r.at("metrics");
    ReportSummary s;
    s.label = r.at("label").get<std::string>();
    s.group = r.at("group").get<std::string>();
    s.mode = c.at("mode").get<std::string>();
    s.bandwidth = c.at("bandwidth").get<double>();
    s.carrier = c.at("carrier").get<double>();
    s.isd = c.at("isd").get<double>();
    s.n_sites = c.at("layout").at("n_sites").get<int>();
    s.sectors_per_site = c.at("layout").at("sectors_per_site").get<int>();
    s.ues_per_cell = c.at("ues_per_cell").get<int>();
    s.mean_throughput = m.at("mean_throughput_bps").get<double>();
    s.p5_throughput = m.at("p5_throughput_bps").get<double>();
    s.cell_throughput = m.at("cell_throughput_bps").get<double>();
    s.mean_layers = m.at("mean_layers").get<double>();
    s.frac_layers_gt4 = m.at("frac_layers_gt4").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Link dump
// ---------------------------------------------------------------------------

namespace {

struct ArrayField {
  const char* name;
  std::string (*get)(const ArrayConfig&);
  void (*set)(ArrayConfig&, double);
};

#define XMIMO_AF(field, conv)                                                              \
  ArrayField {                                                                             \
    #field, [](const ArrayConfig& a) { return fmt17(static_cast<double>(a.field)); },      \
        [](ArrayConfig& a, double v) { a.field = conv(v); }                                \
  }

int to_int(double v) { return static_cast<int>(v); }
bool to_bool(double v) { return v != 0.0; }
double to_double(double v) { return v; }

const std::vector<ArrayField>& array_fields() {
  static const std::vector<ArrayField> f = {
      XMIMO_AF(port_cols, to_int),         XMIMO_AF(port_rows, to_int),
      XMIMO_AF(dual_polarized, to_bool),   XMIMO_AF(subarray_len, to_int),
      XMIMO_AF(elem_spacing_h, to_double), XMIMO_AF(elem_spacing_v, to_double),
      XMIMO_AF(elem_gain_max, to_double),  XMIMO_AF(elem_hpbw_az, to_double),
      XMIMO_AF(elem_hpbw_zen, to_double),  XMIMO_AF(downtilt, to_double),
      XMIMO_AF(isotropic, to_bool),
  };
  return f;
}

#undef XMIMO_AF

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t c = line.find(',', start);
    out.push_back(line.substr(start, c == std::string::npos ? std::string::npos : c - start));
    if (c == std::string::npos) return out;
    start = c + 1;
  }
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw DumpError("link dump line " + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& s, int line) {
  if (s.empty()) fail(line, "empty number");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) fail(line, "bad number \"" + s + "\"");
  return v;
}

long parse_int(const std::string& s, int line) {
  if (s.empty()) fail(line, "empty integer");
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) fail(line, "bad integer \"" + s + "\"");
  return v;
}

}  // namespace

void write_link_dump(const std::string& path, const LinkDump& d) {
  if (d.link_id.find_first_of(",\n") != std::string::npos) throw ConfigError("link dump: link_id must not contain commas");
  std::string s = "xmimo_link_dump," + std::to_string(kLinkDumpVersion) + "\n";
  s += "link_id," + d.link_id + "\n";
  s += "bs_array," + d.bs_array + "\n";
  for (const ArrayField& f : array_fields()) s += std::string("bs.") + f.name + "," + f.get(d.bs) + "\n";
  s += "n_rx," + std::to_string(d.n_rx) + "\n";
  s += "n_tx," + std::to_string(d.n_tx) + "\n";
  s += "n_rb," + std::to_string(d.n_rb()) + "\n";
  s += "rb_bandwidth_hz," + fmt17(d.rb_bandwidth) + "\n";
  s += "carrier_hz," + fmt17(d.carrier) + "\n";
  s += "large_scale_gain_db," + fmt17(d.large_scale_gain_db) + "\n";
  for (std::size_t n = 0; n < d.clusters.size(); ++n) {
    const Cluster& c = d.clusters[n];
    s += "cluster," + std::to_string(n) + "," + fmt17(c.power) + "," + fmt17(c.delay) + "," + fmt17(c.aod) + "," +
         fmt17(c.zod) + "," + fmt17(c.aoa) + "," + fmt17(c.zoa) + "\n";
  }
  for (int rb = 0; rb < d.n_rb(); ++rb)
    for (int r = 0; r < d.n_rx; ++r) {
      s += "h," + std::to_string(rb) + "," + std::to_string(r);
      for (int t = 0; t < d.n_tx; ++t) {
        const cdouble v = d.h[static_cast<std::size_t>(rb)](r, t);
        s += "," + fmt17(v.real()) + "," + fmt17(v.imag());
      }
      s += "\n";
    }
  if (d.precoder) {
    const Precoder& p = *d.precoder;
    for (int l = 0; l < p.n_layers(); ++l) {
      const int beam = l < static_cast<int>(p.beam_ids.size()) ? p.beam_ids[static_cast<std::size_t>(l)] : -1;
      const int group = l < static_cast<int>(p.beam_groups.size()) ? p.beam_groups[static_cast<std::size_t>(l)] : -1;
      s += "precoder," + std::to_string(l) + "," + std::to_string(beam) + "," + std::to_string(group);
      for (int t = 0; t < d.n_tx; ++t) s += "," + fmt17(p.matrix(t, l).real()) + "," + fmt17(p.matrix(t, l).imag());
      s += "\n";
    }
  }
  write_text_atomic(path, s);
}

LinkDump read_link_dump(const std::string& path) { return parse_link_dump(read_text(path)); }

LinkDump parse_link_dump(const std::string& text) {
  LinkDump d;
  std::istringstream in(text);
  std::string line;
  int ln = 0;
  if (!std::getline(in, line)) fail(1, "empty file");
  ++ln;
  if (line != "xmimo_link_dump," + std::to_string(kLinkDumpVersion))
    fail(ln, "expected header \"xmimo_link_dump," + std::to_string(kLinkDumpVersion) + "\"");

  std::map<std::string, std::string> meta;
  std::map<std::string, int> meta_line;
  std::map<std::string, double> bs_over;
  int n_rb = -1;
  bool data = false;
  std::vector<std::vector<char>> seen;
  std::map<int, std::vector<std::string>> precoder_rows;
  std::map<int, int> precoder_lines;

  auto need_dims = [&](int at) {
    if (data) return;
    for (const char* k : {"n_rx", "n_tx", "n_rb", "bs_array"})
      if (!meta.count(k)) fail(at, std::string("metadata \"") + k + "\" must precede data rows");
    d.n_rx = static_cast<int>(parse_int(meta["n_rx"], at));
    d.n_tx = static_cast<int>(parse_int(meta["n_tx"], at));
    n_rb = static_cast<int>(parse_int(meta["n_rb"], at));
    if (d.n_rx < 1 || d.n_tx < 1 || n_rb < 1) fail(at, "n_rx, n_tx and n_rb must be >= 1");
    d.h.assign(static_cast<std::size_t>(n_rb), CMatrix::Zero(d.n_rx, d.n_tx));
    seen.assign(static_cast<std::size_t>(n_rb), std::vector<char>(static_cast<std::size_t>(d.n_rx), 0));
    data = true;
  };

  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line);
    const std::string& kind = f[0];
    if (kind == "cluster") {
      need_dims(ln);
      if (f.size() != 8) fail(ln, "cluster row needs 8 fields, got " + std::to_string(f.size()));
      if (parse_int(f[1], ln) != static_cast<long>(d.clusters.size())) fail(ln, "cluster rows must be numbered 0, 1, ...");
      Cluster c;
      c.power = parse_double(f[2], ln);
      c.delay = parse_double(f[3], ln);
      c.aod = parse_double(f[4], ln);
      c.zod = parse_double(f[5], ln);
      c.aoa = parse_double(f[6], ln);
      c.zoa = parse_double(f[7], ln);
      d.clusters.push_back(c);
    } else if (kind == "h") {
      need_dims(ln);
      const std::size_t want = 3 + 2 * static_cast<std::size_t>(d.n_tx);
      if (f.size() != want) fail(ln, "h row needs " + std::to_string(want) + " fields, got " + std::to_string(f.size()));
      const long rb = parse_int(f[1], ln), rx = parse_int(f[2], ln);
      if (rb < 0 || rb >= n_rb || rx < 0 || rx >= d.n_rx) fail(ln, "h row index out of range");
      char& s = seen[static_cast<std::size_t>(rb)][static_cast<std::size_t>(rx)];
      if (s) fail(ln, "duplicate h row");
      s = 1;
      for (int t = 0; t < d.n_tx; ++t)
        d.h[static_cast<std::size_t>(rb)](rx, t) =
            cdouble(parse_double(f[3 + 2 * static_cast<std::size_t>(t)], ln), parse_double(f[4 + 2 * static_cast<std::size_t>(t)], ln));
    } else if (kind == "precoder") {
      need_dims(ln);
      const std::size_t want = 4 + 2 * static_cast<std::size_t>(d.n_tx);
      if (f.size() != want) fail(ln, "precoder row needs " + std::to_string(want) + " fields, got " + std::to_string(f.size()));
      const long l = parse_int(f[1], ln);
      if (l < 0 || precoder_rows.count(static_cast<int>(l))) fail(ln, "bad or duplicate precoder layer");
      precoder_rows[static_cast<int>(l)] = f;
      precoder_lines[static_cast<int>(l)] = ln;
    } else {
      if (data) fail(ln, "metadata \"" + kind + "\" after data rows");
      if (f.size() != 2) fail(ln, "metadata row needs 2 fields");
      if (kind.rfind("bs.", 0) == 0) {
        bool known = false;
        for (const ArrayField& af : array_fields()) known = known || kind.substr(3) == af.name;
        if (!known) fail(ln, "unknown array field \"" + kind + "\"");
        bs_over[kind.substr(3)] = parse_double(f[1], ln);
      } else if (kind == "link_id" || kind == "bs_array" || kind == "n_rx" || kind == "n_tx" || kind == "n_rb" ||
                 kind == "rb_bandwidth_hz" || kind == "carrier_hz" || kind == "large_scale_gain_db") {
        if (meta.count(kind)) fail(ln, "duplicate metadata \"" + kind + "\"");
        meta[kind] = f[1];
        meta_line[kind] = ln;
      } else {
        fail(ln, "unknown row type \"" + kind + "\"");
      }
    }
  }
  if (!data) fail(ln, "no data rows");
  for (int rb = 0; rb < n_rb; ++rb)
    for (int r = 0; r < d.n_rx; ++r)
      if (!seen[static_cast<std::size_t>(rb)][static_cast<std::size_t>(r)])
        fail(ln, "missing h row rb=" + std::to_string(rb) + " rx=" + std::to_string(r));

  d.link_id = meta.count("link_id") ? meta["link_id"] : "link";
  d.bs_array = meta["bs_array"];
  try {
    d.bs = array_preset(d.bs_array);
  } catch (const ConfigError& e) {
    fail(meta_line["bs_array"], e.what());
  }
  for (const ArrayField& af : array_fields())
    if (bs_over.count(af.name)) af.set(d.bs, bs_over[af.name]);
  if (meta.count("rb_bandwidth_hz")) d.rb_bandwidth = parse_double(meta["rb_bandwidth_hz"], meta_line["rb_bandwidth_hz"]);
  if (meta.count("carrier_hz")) d.carrier = parse_double(meta["carrier_hz"], meta_line["carrier_hz"]);
  if (meta.count("large_scale_gain_db")) d.large_scale_gain_db = parse_double(meta["large_scale_gain_db"], meta_line["large_scale_gain_db"]);
  d.bs.carrier_freq = d.carrier;
  try {
    d.bs.validate();
  } catch (const ConfigError& e) {
    throw DumpError(std::string("link dump: bs.") + e.what());
  }
  if (d.bs.n_ports() != d.n_tx)
    throw DumpError("link dump: n_tx " + std::to_string(d.n_tx) + " does not match the BS array (" +
                    std::to_string(d.bs.n_ports()) + " ports)");

  if (!precoder_rows.empty()) {
    Precoder p;
    const int n_layers = static_cast<int>(precoder_rows.size());
    if (precoder_rows.rbegin()->first != n_layers - 1) fail(precoder_lines.rbegin()->second, "precoder layers must be 0..L-1");
    p.matrix.resize(d.n_tx, n_layers);
    for (const auto& [l, f] : precoder_rows) {
      const int at = precoder_lines[l];
      p.beam_ids.push_back(static_cast<int>(parse_int(f[2], at)));
      p.beam_groups.push_back(static_cast<int>(parse_int(f[3], at)));
      for (int t = 0; t < d.n_tx; ++t)
        p.matrix(t, l) = cdouble(parse_double(f[4 + 2 * static_cast<std::size_t>(t)], at),
                                 parse_double(f[5 + 2 * static_cast<std::size_t>(t)], at));
    }
    p.layer_power.assign(static_cast<std::size_t>(n_layers), 1.0 / n_layers);
    d.precoder = std::move(p);
  }
  return d;
}

}  // namespace xmimo
