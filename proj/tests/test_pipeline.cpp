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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "crm/error.hpp"
#include "crm/jsonl.hpp"
#include "crm/pipeline.hpp"
#include "test_util.hpp"

using namespace crm;
using namespace crm::pipeline;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = fs::path(CRM_SOURCE_DIR) / "fixtures";

Json fixture_json() { return Json::parse(jsonl::read_text_file(kFixtures / "config.json")); }

RunConfig fixture_config(const fs::path& out) {
  Json j = fixture_json();
  j["output_dir"] = out.string();
  return parse_config(j, kFixtures);
}

std::string slurp(const fs::path& p) { return jsonl::read_text_file(p); }

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

int run(const std::string& cmd) {
  int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsAndResolution) {
  crm::testing::TempDir dir;
  RunConfig c = fixture_config(dir.path());
  EXPECT_EQ(c.languages, (std::vector<std::string>{"eng", "deu", "fra", "spa"}));
  EXPECT_EQ(c.corpora.size(), 2u);
  EXPECT_FALSE(c.corpora[1].member);
  EXPECT_TRUE(c.corpora[0].path.is_absolute());
  EXPECT_EQ(c.taus, (std::vector<double>{0.3, 0.5, 0.7, 0.9}));
  EXPECT_EQ(c.group_by.size(), 4u);
  EXPECT_EQ(c.cuefree_n, 4);
  EXPECT_EQ(c.k_fraction, 0.2);
  for (auto a : mia::kAllAttacks) EXPECT_TRUE(c.wants(a)) << mia::to_string(a);

  Json j = fixture_json();
  j.erase("mia");
  j["adapter"].erase("reference_endpoint");
  RunConfig d = parse_config(j, kFixtures);
  EXPECT_FALSE(d.wants(mia::Attack::ref));
  EXPECT_FALSE(d.wants(mia::Attack::ne_pii));
  EXPECT_FALSE(d.wants(mia::Attack::dc_pdd));
  EXPECT_TRUE(d.wants(mia::Attack::min_k_pp));
  EXPECT_EQ(parse_config(config_to_json(c), kFixtures).seed, c.seed);
}

TEST(Config, Errors) {
  auto bad = [](auto&& edit) {
    Json j = fixture_json();
    edit(j);
    EXPECT_THROW(parse_config(j, kFixtures), ConfigError) << j.dump();
  };
  bad([](Json& j) { j["surprise"] = 1; });
  bad([](Json& j) { j["mia"]["kfraction"] = 0.1; });
  bad([](Json& j) { j["languages"] = Json::array(); });
  bad([](Json& j) { j["eval"]["taus"] = {0.0}; });
  bad([](Json& j) { j["eval"]["bin_width"] = 0.3; });
  bad([](Json& j) { j["eval"]["group_by"] = {{"model", "colour"}}; });
  bad([](Json& j) { j["mia"]["attacks"] = {"loss", "gzip"}; });
  bad([](Json& j) { j["mia"]["fprs"] = {1.0}; });
  bad([](Json& j) { j["mia"]["k_fraction"] = 0.0; });
  bad([](Json& j) {
    j["adapter"].erase("reference_endpoint");
    j["mia"]["attacks"] = {"ref"};
  });
  bad([](Json& j) { j["extract"]["mia_min_tokens"] = 200; });
  bad([](Json& j) { j["adapter"]["threads"] = 0; });
  bad([](Json& j) { j.erase("templates"); });
}

TEST(Config, EnvironmentOverrides) {
  crm::testing::TempDir dir;
  Json j = fixture_json();
  const fs::path cfg = dir.path() / "c.json";
  j["country_codes"] = (kFixtures / "../config/country_codes.json").string();
  j["templates"] = (kFixtures / "../config/templates.json").string();
  j["corpora"] = Json::array();
  j["names_sidecar"] = nullptr;
  j.erase("names_sidecar");
  j.erase("mia");
  j["adapter"].erase("reference_endpoint");
  jsonl::write_text_file(cfg, j.dump());
  ::setenv("CRM_ADAPTER_CMD", "my-adapter --x", 1);
  ::setenv("CRM_OUTPUT_DIR", "/tmp/elsewhere", 1);
  RunConfig c = load_config(cfg);
  ::unsetenv("CRM_ADAPTER_CMD");
  ::unsetenv("CRM_OUTPUT_DIR");
  EXPECT_EQ(c.adapter, "my-adapter --x");
  EXPECT_EQ(c.output_dir, fs::path("/tmp/elsewhere"));
  EXPECT_EQ(load_config(cfg).adapter, j["adapter"]["endpoint"]);
  EXPECT_THROW(load_config(dir.path() / "missing.json"), ConfigError);
}

TEST(ItemSeed, StableAndKeyed) {
  EXPECT_EQ(item_seed(7, "a"), item_seed(7, "a"));
  EXPECT_NE(item_seed(7, "a"), item_seed(7, "b"));
  EXPECT_NE(item_seed(7, "a"), item_seed(8, "a"));
}

TEST(Stages, EmptyCorpusGivesEmptyOutputs) {
  crm::testing::TempDir dir;
  const fs::path empty = dir.path() / "empty.jsonl";
  jsonl::write_text_file(empty, "");
  Json j = fixture_json();
  j["corpora"] = {{{"path", empty.string()}, {"member", true}}};
  j["output_dir"] = (dir.path() / "out").string();
  RunConfig c = parse_config(j, kFixtures);
  auto client = connect(c.adapter, c.max_in_flight, c.base_dir);
  StageLog log;
  cmd_extract(c, *client, log);
  EXPECT_EQ(slurp(c.output_dir / "triplets.jsonl"), "");
  EXPECT_EQ(slurp(c.output_dir / "mia_windows.jsonl"), "");
  Json rep = Json::parse(slurp(c.output_dir / "skip_report.json"));
  EXPECT_EQ(rep["documents"], 0);
  EXPECT_EQ(rep["triplets"], 0);
  for (const auto& [lang, reasons] : rep["drops"].items()) {
    for (const auto& [reason, n] : reasons.items()) EXPECT_EQ(n, 0) << lang << "/" << reason;
  }
  cmd_probe(c, log);
  cmd_score(c, *client, log);
  cmd_eval(c, log);
  EXPECT_EQ(slurp(c.output_dir / "crm_groups.csv"),
            "model,lang,paradigm,variant,pii_kind,split,n,total_hits,unique_hits,avg_cue_hit,avg_cue_nonhit,cue_auc\n");
}

TEST(Stages, ExtractIsIdempotentAndScoreResumes) {
  crm::testing::TempDir dir;
  RunConfig c = fixture_config(dir.path() / "out");
  auto client = connect(c.adapter, c.max_in_flight, c.base_dir);
  StageLog log;
  cmd_extract(c, *client, log);
  const std::string t1 = slurp(c.output_dir / "triplets.jsonl");
  const std::string w1 = slurp(c.output_dir / "mia_windows.jsonl");
  cmd_extract(c, *client, log);
  EXPECT_EQ(slurp(c.output_dir / "triplets.jsonl"), t1);
  EXPECT_EQ(slurp(c.output_dir / "mia_windows.jsonl"), w1);

  cmd_probe(c, log);
  cmd_score(c, *client, log);
  const std::string full = slurp(c.output_dir / "scored_probes.jsonl");
  EXPECT_FALSE(fs::exists(c.output_dir / "scored_probes.partial.jsonl"));

  // Keep half of the rows as an interrupted run and resume.
  std::istringstream in(full);
  std::string partial, line;
  for (int i = 0; std::getline(in, line); ++i) {
    if (i % 2 == 0) partial += line + "\n";
  }
  fs::remove(c.output_dir / "scored_probes.jsonl");
  jsonl::write_text_file(c.output_dir / "scored_probes.partial.jsonl", partial);
  cmd_score(c, *client, log);
  EXPECT_EQ(slurp(c.output_dir / "scored_probes.jsonl"), full);
  EXPECT_NE(log.lines.back().find("newly scored"), std::string::npos);
}

TEST(Stages, ScoreFailuresWriteManifest) {
  crm::testing::TempDir dir;
  RunConfig c = fixture_config(dir.path() / "out");
  {
    auto client = connect(c.adapter, c.max_in_flight, c.base_dir);
    StageLog log;
    cmd_extract(c, *client, log);
    cmd_probe(c, log);
  }
  // A uniform backend rejects every target token it does not know.
  auto bad = connect(std::string(CRM_MOCK_ADAPTER) + " --uniform-vocab a,b --model-id tiny", 4);
  StageLog log;
  EXPECT_THROW(cmd_score(c, *bad, log), AdapterError);
  const auto failures = jsonl::read_all(c.output_dir / "score_failures.jsonl");
  EXPECT_FALSE(failures.empty());
  EXPECT_EQ(failures[0]["model"], "tiny");
  EXPECT_FALSE(fs::exists(c.output_dir / "scored_probes.jsonl"));
}

TEST(Stages, MissingInputIsDataError) {
  crm::testing::TempDir dir;
  RunConfig c = fixture_config(dir.path() / "out");
  StageLog log;
  EXPECT_THROW(cmd_probe(c, log), DataError);
  EXPECT_THROW(cmd_eval(c, log), DataError);
}

TEST(Stages, UnconfiguredLanguageAndMissingCodes) {
  crm::testing::TempDir dir;
  const fs::path corpus = dir.path() / "c.jsonl";
  jsonl::write_text_file(corpus, R"({"id": "x", "lang": "ita", "text": "Ciao"})" "\n");
  Json j = fixture_json();
  j["corpora"] = {{{"path", corpus.string()}, {"member", true}}};
  j["output_dir"] = (dir.path() / "out").string();
  RunConfig c = parse_config(j, kFixtures);
  auto client = connect(c.adapter, c.max_in_flight, c.base_dir);
  StageLog log;
  EXPECT_THROW(cmd_extract(c, *client, log), DataError);

  const fs::path codes = dir.path() / "codes.json";
  jsonl::write_text_file(codes, R"({"languages": {"eng": ["1"]}})");
  j["country_codes"] = codes.string();
  j["corpora"] = {{{"path", (kFixtures / "corpus_train.jsonl").string()}, {"member", true}}};
  RunConfig d = parse_config(j, kFixtures);
  EXPECT_THROW(cmd_extract(d, *client, log), MissingCountryCodes);
}

TEST(Cli, ExitCodesAndReports) {
  crm::testing::TempDir dir;
  const std::string cli = CRM_CLI;
  const std::string cfg = (kFixtures / "config.json").string();
  const fs::path out = dir.path() / "out";
  EXPECT_EQ(run(cli + " all -c " + cfg + " -o " + out.string()), 0);
  for (const char* f : {"triplets.jsonl", "mia_windows.jsonl", "skip_report.json", "probes.jsonl",
                        "scored_probes.jsonl", "crm_groups.csv", "crm_tau.csv", "crm_bins.csv", "cuefree.csv",
                        "mia_records.jsonl", "mia_roc.csv", "fig_hr_tau.svg", "fig_cue_bins.svg",
                        "fig_mia_auroc.svg"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_EQ(first_line(out / "crm_tau.csv"), "model,lang,paradigm,variant,pii_kind,split,tau,n_below,hits_below,hr,mean_recon_logprob");
  EXPECT_EQ(first_line(out / "crm_bins.csv"),
            "model,lang,paradigm,variant,pii_kind,split,bin_lo,bin_hi,n,hits,hit_rate,mean_recon_logprob");
  EXPECT_EQ(first_line(out / "cuefree.csv"), "model,lang,pii_kind,samples,distinct_extracted,matched_known");
  EXPECT_EQ(first_line(out / "mia_roc.csv"),
            "model,lang,attack,auroc,auroc_norm,tpr_at_fpr_0.001,tpr_at_fpr_0.01,n_members,n_nonmembers");
  for (const char* svg : {"fig_hr_tau.svg", "fig_cue_bins.svg", "fig_mia_auroc.svg"}) {
    const std::string s = slurp(out / svg);
    EXPECT_NE(s.find("<svg"), std::string::npos) << svg;
    EXPECT_NE(s.find("</svg>"), std::string::npos) << svg;
  }
  fs::remove(out / "fig_hr_tau.svg");
  EXPECT_EQ(run(cli + " report -c " + cfg + " -o " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "fig_hr_tau.svg"));

  const fs::path bad_cfg = dir.path() / "bad.json";
  jsonl::write_text_file(bad_cfg, R"({"languages": ["eng"], "nonsense": true})");
  EXPECT_EQ(run(cli + " extract -c " + bad_cfg.string()), 2);
  EXPECT_EQ(run(cli + " frobnicate"), 2);
  EXPECT_EQ(run(cli + " extract -c " + cfg + " -o " + (dir.path() / "o2").string() + " --adapter 'exit 0'"), 3);
  EXPECT_EQ(run(cli + " eval -c " + cfg + " -o " + (dir.path() / "o3").string()), 4);
}
