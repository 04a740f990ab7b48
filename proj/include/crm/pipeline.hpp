// Copyright 2026 The CRM Audit Authors
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crm/adapter_client.hpp"
#include "crm/memo_eval.hpp"
#include "crm/mia.hpp"

// Stage orchestration. Stages talk only through files in output_dir:
//   extract -> triplets.jsonl, mia_windows.jsonl, skip_report.json
//   probe   -> probes.jsonl
//   score   -> scored_probes.jsonl (+ score_failures.jsonl on error)
//   eval    -> crm_groups.csv, crm_tau.csv, crm_bins.csv, cuefree.csv
//   mia     -> mia_records.jsonl, mia_roc.csv, freq_<lang>.jsonl
//   report  -> fig_hr_tau.svg, fig_cue_bins.svg, fig_mia_auroc.svg
namespace crm::pipeline {

using Json = nlohmann::json;
namespace fs = std::filesystem;

struct CorpusSpec {
  fs::path path;
  bool member = true;
};

struct RunConfig {
  std::vector<std::string> languages;
  std::vector<CorpusSpec> corpora;
  std::optional<fs::path> names_sidecar;
  fs::path country_codes;
  fs::path templates;
  std::string adapter;
  std::optional<std::string> reference_adapter;
  size_t max_in_flight = 16;
  size_t threads = 4;

  size_t window_scalars = 100;
  size_t prefix_tokens = 100;
  size_t mia_min_tokens = 50;
  size_t mia_max_tokens = 150;
  size_t mia_target_tokens = 100;

  int cuefree_n = 32;
  int greedy_max_new_tokens = 15;
  int sample_max_new_tokens = 256;
  int top_k = 40;

  std::vector<double> taus{0.3, 0.5, 0.7, 0.9};
  double bin_width = 0.1;
  int tld_labels_stripped = 1;
  std::vector<std::vector<memo::GroupField>> group_by;

  std::vector<mia::Attack> attacks;
  double k_fraction = 0.2;
  std::optional<double> dc_pdd_clamp;
  std::optional<double> dc_pdd_epsilon;
  int n_neighbors = 10;
  double mask_fraction = 0.2;
  int max_span = 3;
  std::vector<double> fprs{1e-3, 1e-2};
  std::map<std::string, std::vector<fs::path>> frequency_corpora;
  std::optional<fs::path> email_pool;
  std::optional<fs::path> name_pool;

  std::uint64_t seed = 0;
  fs::path output_dir = "out";
  fs::path base_dir;  // directory of the config file

  bool wants(mia::Attack a) const;
};

// Relative paths resolve against base_dir. Missing keys take the defaults
// above. Throws ConfigError on unknown keys or out-of-range values.
RunConfig parse_config(const Json& j, const fs::path& base_dir);
// Reads the file and applies CRM_ADAPTER_CMD / CRM_OUTPUT_DIR overrides.
RunConfig load_config(const fs::path& path);
Json config_to_json(const RunConfig& c);

// Endpoint forms:
//   "unix:<path>"                              existing socket server
//   "builtin-mock:corpus=a.jsonl,b.jsonl;model_id=x;copy_rule=0"
//                                              in-process mock backend
//   anything else                              shell command on stdin/stdout
std::unique_ptr<adapter::AdapterClient> connect(const std::string& endpoint, size_t max_in_flight,
                                                const fs::path& base_dir = {});

struct StageLog {
  std::vector<std::string> lines;
  void info(std::string s) { lines.push_back(std::move(s)); }
};

void cmd_extract(const RunConfig& c, adapter::AdapterClient& client, StageLog& log);
void cmd_probe(const RunConfig& c, StageLog& log);
void cmd_score(const RunConfig& c, adapter::AdapterClient& client, StageLog& log);
void cmd_eval(const RunConfig& c, StageLog& log);
void cmd_mia(const RunConfig& c, adapter::AdapterClient& client, adapter::AdapterClient* reference, StageLog& log);
void cmd_report(const RunConfig& c, StageLog& log);

// Runs every stage in order with one session per model.
void cmd_all(const RunConfig& c, StageLog& log);

// 64-bit FNV-1a mixed with the run seed; stable per-item seeds.
std::uint64_t item_seed(std::uint64_t seed, const std::string& key);

}  // namespace crm::pipeline
