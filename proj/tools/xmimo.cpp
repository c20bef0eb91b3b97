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

// xmimo: run campaigns, compare reports, analyze link dumps.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xmimo/analysis.hpp"
#include "xmimo/campaign.hpp"
#include "xmimo/config.hpp"
#include "xmimo/io.hpp"

namespace fs = std::filesystem;
using namespace xmimo;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string out_root() {
  const char* env = std::getenv("XMIMO_OUT");
  return env && *env ? env : "out";
}

Json load_config(const std::string& path, const std::vector<std::string>& sets, std::optional<std::uint64_t> seed) {
  Json doc = path.empty() ? Json::object() : load_json_file(path);
  if (!doc.is_object()) throw ConfigError(path + ": expected a JSON object");
  for (const std::string& s : sets) apply_override(doc, s);
  if (seed) doc["seed"] = *seed;
  return doc;
}

Json schema_versions() {
  Json v = Json::object();
  v["report.json"] = kReportSchemaVersion;
  for (const char* f : {"summary.csv", "per_ue.csv", "layers_hist.csv", "decisions.csv", "compare.csv", "heatmap.csv",
                        "beams.csv", "clusters.csv", "association.csv"})
    v[f] = kCsvSchemaVersion;
  v["manifest.json"] = kManifestSchemaVersion;
  v["link_dump"] = kLinkDumpVersion;
  return v;
}

void print_summary(const std::vector<Json>& reports) {
  std::printf("%-10s %-28s %14s %14s %14s %7s %7s\n", "label", "group", "mean bps", "p5 bps", "cell bps", "layers",
              ">4");
  for (const Json& r : reports) {
    const Json& m = r["metrics"];
    const std::string group = r["group"].get<std::string>();
    std::printf("%-10s %-28s %14.4g %14.4g %14.4g %7.2f %7.3f\n", r["label"].get<std::string>().c_str(),
                group.empty() ? "-" : group.c_str(), m["mean_throughput_bps"].get<double>(),
                m["p5_throughput_bps"].get<double>(), m["cell_throughput_bps"].get<double>(),
                m["mean_layers"].get<double>(), m["frac_layers_gt4"].get<double>());
  }
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets, std::string out, int threads,
            std::optional<std::uint64_t> seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const Json doc = load_config(config_path, sets, seed);
  const std::vector<Variant> variants = expand(doc);
  if (out.empty()) out = (fs::path(out_root()) / variants.front().cfg.scenario).string();

  std::vector<Json> reports;
  std::vector<ReportSummary> summaries;
  Json manifest_variants = Json::array();
  for (const Variant& v : variants) {
    std::fprintf(stderr, "running %s%s%s ...\n", v.label.c_str(), v.group.empty() ? "" : " @ ", v.group.c_str());
    ThroughputReport rep = run_campaign(v.cfg, threads);
    rep.config_hash = config_hash(v.effective);
    const std::string dir = (fs::path(out) / v.dir).string();
    const std::vector<std::string> files = write_run_outputs(dir, rep, v.label, v.group, v.effective);
    reports.push_back(report_to_json(rep, v.label, v.group, v.effective));
    summaries.push_back(summary_from_report(reports.back()));
    Json mv = Json::object();
    mv["label"] = v.label;
    mv["group"] = v.group;
    mv["dir"] = v.dir.empty() ? "." : v.dir;
    mv["config_hash"] = rep.config_hash;
    mv["outputs"] = files;
    manifest_variants.push_back(mv);
  }
  write_text_atomic((fs::path(out) / "summary.csv").string(), summary_csv(reports));
  print_summary(reports);

  std::vector<std::string> top = {"summary.csv"};
  const std::string key = compare_key(doc);
  if (!key.empty() && variants.size() > 1) {
    const std::vector<CompareRow> rows = compare(summaries, variants.front().label);
    write_text_atomic((fs::path(out) / "compare.csv").string(), compare_csv(rows));
    std::printf("\n%s", compare_table(rows).c_str());
    top.push_back("compare.csv");
  }

  Json manifest = Json::object();
  manifest["schema"] = "xmimo.manifest";
  manifest["schema_version"] = kManifestSchemaVersion;
  manifest["version"] = XMIMO_VERSION;
  manifest["config_path"] = config_path;
  manifest["overrides"] = sets;
  manifest["seed"] = variants.front().cfg.seed ? Json(*variants.front().cfg.seed) : Json(nullptr);
  manifest["config_hash"] = config_hash(doc);
  manifest["threads"] = threads;
  manifest["schemas"] = schema_versions();
  manifest["outputs"] = top;
  manifest["variants"] = manifest_variants;
  manifest["wall_clock_seconds"] =
      round9(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  write_text_atomic((fs::path(out) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::fprintf(stderr, "wrote %s\n", out.c_str());
  return 0;
}

int cmd_compare(const std::vector<std::string>& paths, std::string baseline, std::string out) {
  if (paths.size() < 2) throw ConfigError("compare: need at least two reports");
  std::vector<ReportSummary> s;
  for (const std::string& p : paths) s.push_back(summary_from_report(read_report(p)));
  if (baseline.empty()) baseline = s.front().label;
  const std::vector<CompareRow> rows = compare(s, baseline);
  if (out.empty()) out = ".";
  write_text_atomic((fs::path(out) / "compare.csv").string(), compare_csv(rows));
  std::printf("%s", compare_table(rows).c_str());
  return 0;
}

int cmd_analyze(const std::string& path, std::string out, const AnalyzeOptions& opts) {
  const LinkDump dump = read_link_dump(path);
  const AnalysisResult r = analyze_link(dump, opts);
  if (out.empty()) out = (fs::path(out_root()) / ("analyze_" + dump.link_id)).string();
  write_analysis(out, r);
  std::printf("%zu clusters\n", r.clusters.clusters.size());
  for (std::size_t c = 0; c < r.clusters.clusters.size(); ++c) {
    const ClusterPeak& p = r.clusters.clusters[c];
    std::printf("  cluster %zu: az %.1f zen %.1f %.2f dB\n", c + 1, p.azimuth, p.zenith, p.power_db);
  }
  for (const LayerBeam& l : r.layers.layers)
    std::printf("  layer %d: beam %d (az %.1f, zen %.1f) -> %s\n", l.layer + 1, l.beam_id, l.azimuth, l.zenith,
                l.cluster < 0 ? "none" : ("cluster " + std::to_string(l.cluster + 1)).c_str());
  std::fprintf(stderr, "wrote %s\n", out.c_str());
  return 0;
}

int cmd_dump(const std::string& synthetic, const std::string& config_path, const std::vector<std::string>& sets,
             std::optional<std::uint64_t> seed, int drop_index, int ue, const std::string& out) {
  if (out.empty()) throw ConfigError("dump: --out is required");
  LinkDump d;
  if (!synthetic.empty()) {
    d = synthetic_link_dump(synthetic_scene(synthetic), seed.value_or(1));
    d.link_id = "synthetic_" + synthetic;
  } else {
    const Json doc = load_config(config_path, sets, seed);
    const std::vector<Variant> variants = expand(doc);
    if (variants.size() != 1) throw ConfigError("dump: config must not sweep; pin the swept keys with --set");
    const CampaignConfig& cfg = variants.front().cfg;
    if (drop_index < 0 || drop_index >= cfg.n_drops) throw ConfigError("dump: --drop out of range");
    DropEngine engine(cfg, campaign_drop(cfg, drop_index), drop_seed(*cfg.seed, drop_index));
    if (ue < 0 || ue >= engine.n_ues()) throw ConfigError("dump: --ue out of range");
    const ClusterSet cs = engine.serving_clusters(ue);
    d.link_id = "drop" + std::to_string(drop_index) + "_ue" + std::to_string(ue) + "_cell" +
                std::to_string(engine.serving_cell(ue));
    d.bs_array = cfg.bs;
    d.bs = cfg.bs_array;
    d.h = engine.serving_channel(ue);
    d.n_rx = static_cast<int>(d.h.front().rows());
    d.n_tx = static_cast<int>(d.h.front().cols());
    d.rb_bandwidth = cfg.rb_bandwidth();
    d.carrier = cfg.carrier;
    d.large_scale_gain_db = -cs.pathloss_db - cs.shadowing_db;
    for (const Cluster& c : cs.clusters) {
      Cluster k = c;
      k.rays.clear();
      d.clusters.push_back(k);
    }
  }
  write_link_dump(out, d);
  std::fprintf(stderr, "wrote %s\n", out.c_str());
  return 0;
}

int cmd_probe(const std::string& config_path, const std::vector<std::string>& sets, std::optional<std::uint64_t> seed,
              double distance, int rank, int ttis, bool nlos) {
  Json doc = load_config(config_path, sets, seed);
  if (!doc.contains("seed")) doc["seed"] = 1;
  const std::vector<Variant> variants = expand(doc);
  if (variants.size() != 1) throw ConfigError("probe: config must not sweep; pin the swept keys with --set");
  const double bps = peak_rate_probe(variants.front().cfg, distance, !nlos, rank, ttis);
  std::printf("%.9g\n", bps);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"X-MIMO system-level simulator and channel analyzer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(XMIMO_VERSION));

  std::string config_path, out, baseline, synthetic, dump_path;
  std::vector<std::string> sets, reports;
  int threads = 0, drop_index = 0, ue = 0, rank = 8, ttis = 100;
  std::optional<std::uint64_t> seed;
  double distance = 100.0;
  bool nlos = false, serial = false;
  AnalyzeOptions aopts;

  CLI::App* run = app.add_subcommand("run", "Run a campaign (or every point of its sweep)");
  run->add_option("--config", config_path, "Config JSON")->required();
  run->add_option("--set", sets, "Override key=value (dotted path)");
  run->add_option("--out", out, "Output directory (default $XMIMO_OUT/<scenario>)");
  run->add_option("--threads", threads, "Worker threads, 0 = all cores");
  run->add_option("--seed", seed, "Campaign seed");

  CLI::App* cmp = app.add_subcommand("compare", "Relative table of report.json files");
  cmp->add_option("reports", reports, "report.json paths")->required();
  cmp->add_option("--baseline", baseline, "Baseline label (default: first report)");
  cmp->add_option("--out", out, "Directory for compare.csv (default .)");

  CLI::App* ana = app.add_subcommand("analyze", "Angular analysis of a link dump");
  ana->add_option("dump", dump_path, "Link dump file")->required();
  ana->add_option("--out", out, "Output directory");
  ana->add_option("--o1", aopts.o1, "Horizontal codebook oversampling");
  ana->add_option("--o2", aopts.o2, "Vertical codebook oversampling");
  ana->add_option("--layers", aopts.n_layers, "Layers for DFT beam assignment");
  ana->add_option("--threshold", aopts.detect.threshold_db, "Peak threshold, dB below the maximum");
  ana->add_option("--separation", aopts.detect.min_separation, "Minimum peak separation, degrees");
  ana->add_flag("--serial", serial, "Use the serial Bartlett kernel");

  CLI::App* dmp = app.add_subcommand("dump", "Write a link dump (synthetic or from a campaign drop)");
  dmp->add_option("--synthetic", synthetic, "two | one");
  dmp->add_option("--config", config_path, "Campaign config");
  dmp->add_option("--set", sets, "Override key=value");
  dmp->add_option("--seed", seed, "Seed");
  dmp->add_option("--drop", drop_index, "Drop index");
  dmp->add_option("--ue", ue, "UE id within the drop");
  dmp->add_option("--out", out, "Dump file")->required();

  CLI::App* prb = app.add_subcommand("probe", "Single-UE peak-rate probe");
  prb->add_option("--config", config_path, "Config JSON (default built-ins)");
  prb->add_option("--set", sets, "Override key=value");
  prb->add_option("--seed", seed, "Seed (default 1)");
  prb->add_option("--distance", distance, "UE distance, metres");
  prb->add_option("--rank", rank, "Layers, 0 = rank adaptation");
  prb->add_option("--ttis", ttis, "TTIs to average");
  prb->add_flag("--nlos", nlos, "Force NLOS instead of LOS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(config_path, sets, out, threads, seed);
    if (*cmp) return cmd_compare(reports, baseline, out);
    if (*ana) {
      aopts.parallel = !serial;
      return cmd_analyze(dump_path, out, aopts);
    }
    if (*dmp) {
      if (synthetic.empty() == config_path.empty()) throw ConfigError("dump: give exactly one of --synthetic or --config");
      return cmd_dump(synthetic, config_path, sets, seed, drop_index, ue, out);
    }
    if (*prb) return cmd_probe(config_path, sets, seed, distance, rank, ttis, nlos);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
