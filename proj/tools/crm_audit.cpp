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

// crm-audit: staged CRM audit pipeline.
//
//   crm-audit <extract|probe|score|eval|mia|report|all> --config run.json
//
// Exit codes: 0 ok, 2 configuration error, 3 adapter error, 4 data error.

#include <CLI11.hpp>

#include <iostream>

#include "crm/error.hpp"
#include "crm/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kAdapter = 3, kData = 4 };

using namespace crm;
using pipeline::RunConfig;

int run(const std::string& stage, const RunConfig& c, bool dump_config) {
  if (dump_config) {
    std::cout << pipeline::config_to_json(c).dump(2) << "\n";
    return kOk;
  }
  pipeline::StageLog log;
  auto client = [&] { return pipeline::connect(c.adapter, c.max_in_flight, c.base_dir); };
  if (stage == "extract") {
    pipeline::cmd_extract(c, *client(), log);
  } else if (stage == "probe") {
    pipeline::cmd_probe(c, log);
  } else if (stage == "score") {
    pipeline::cmd_score(c, *client(), log);
  } else if (stage == "eval") {
    pipeline::cmd_eval(c, log);
  } else if (stage == "mia") {
    auto main = client();
    std::unique_ptr<adapter::AdapterClient> ref;
    if (c.reference_adapter && c.wants(mia::Attack::ref)) {
      ref = pipeline::connect(*c.reference_adapter, c.max_in_flight, c.base_dir);
    }
    pipeline::cmd_mia(c, *main, ref.get(), log);
  } else if (stage == "report") {
    pipeline::cmd_report(c, log);
  } else {
    pipeline::cmd_all(c, log);
  }
  for (const auto& l : log.lines) std::cerr << l << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cue-resistant memorization audit of PII in language models"};
  app.require_subcommand(1, 1);
  std::string config_path;
  bool dump_config = false;
  std::string adapter_override, output_override;

  const std::pair<const char*, const char*> stages[] = {
      {"extract", "Scan corpora, build PII triplets and MIA windows"},
      {"probe", "Instantiate verbatim, associative and cue-free probes"},
      {"score", "Score probes through the model adapter (resumable)"},
      {"eval", "Cue-stratified hit rates, reconstruction and cue-bin tables"},
      {"mia", "Membership-inference scores and ROC tables"},
      {"report", "CSV tables and SVG figures"},
      {"all", "Run every stage in order"},
  };
  for (const auto& [name, help] : stages) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--adapter", adapter_override, "Adapter endpoint; overrides config and CRM_ADAPTER_CMD");
    sub->add_option("-o,--output-dir", output_override, "Output directory; overrides config and CRM_OUTPUT_DIR");
    sub->add_flag("--print-config", dump_config, "Print the resolved configuration and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  const std::string stage = app.get_subcommands().front()->get_name();

  try {
    RunConfig c = pipeline::load_config(config_path);
    if (!adapter_override.empty()) c.adapter = adapter_override;
    if (!output_override.empty()) c.output_dir = output_override;
    return run(stage, c, dump_config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const AdapterError& e) {
    std::cerr << "adapter error: " << e.what() << "\n";
    return kAdapter;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const PreconditionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
}
