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

#include <optional>
#include <string>
#include <vector>

#include "xmimo/campaign.hpp"
#include "xmimo/config.hpp"
#include "xmimo/precoding.hpp"

namespace xmimo {

/// Schema versions of every file the tools write. A reader rejects any other
/// version.
inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kCsvSchemaVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;
inline constexpr int kLinkDumpVersion = 1;

/// Shortest decimal form with 9 significant digits.
std::string fmt9(double v);
/// v rounded to 9 significant digits.
double round9(double v);

/// Writes to `path`.tmp and renames it over `path`.
void write_text_atomic(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

/// Full report document (report.json). No timestamps, so repeated runs with
/// the same config and seed produce identical bytes.
Json report_to_json(const ThroughputReport& report, const std::string& label,
                    const std::string& group, const Json& effective);

/// report.json, per_ue.csv, layers_hist.csv, summary.csv and, when the
/// decision log is on, decisions.csv. Returns the written file names.
std::vector<std::string> write_run_outputs(const std::string& dir, const ThroughputReport& report,
                                           const std::string& label, const std::string& group,
                                           const Json& effective);

/// One row per report document.
std::string summary_csv(const std::vector<Json>& reports);
std::string per_ue_csv(const ThroughputReport& report);
std::string layers_hist_csv(const ThroughputReport& report);
std::string decisions_csv(const ThroughputReport& report);
std::string compare_csv(const std::vector<CompareRow>& rows);
/// Fixed-width table for the terminal.
std::string compare_table(const std::vector<CompareRow>& rows);

/// Loads report.json. Missing file: std::runtime_error. Wrong schema or
/// version: ConfigError.
Json read_report(const std::string& path);
ReportSummary summary_from_report(const Json& report);

/// Bad link dump content; messages carry the line number.
class DumpError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// One BS-UE link in the text dump format.
struct LinkDump {
  std::string link_id = "link";
  std::string bs_array = "x256";  // preset the geometry starts from
  ArrayConfig bs;                  // resolved geometry (preset + bs.* lines)
  int n_rx = 0;
  int n_tx = 0;
  double rb_bandwidth = 2e6;
  double carrier = 7.125e9;
  double large_scale_gain_db = 0.0;
  std::vector<Cluster> clusters;  // optional, rays not stored
  std::vector<CMatrix> h;         // n_rb matrices, n_rx x n_tx
  std::optional<Precoder> precoder;

  int n_rb() const { return static_cast<int>(h.size()); }
};

void write_link_dump(const std::string& path, const LinkDump& dump);
/// Parses a dump. Missing file: std::runtime_error; content errors: DumpError.
LinkDump read_link_dump(const std::string& path);
LinkDump parse_link_dump(const std::string& text);

}  // namespace xmimo
