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

#include <algorithm>
#include <cmath>
#include <random>

#include "crm/error.hpp"
#include "crm/memo_eval.hpp"

using namespace crm;
using namespace crm::memo;

namespace {

ScoredProbe make(double cue, bool hit, std::string target = "t@x.io", std::string lang = "eng",
                 std::optional<double> recon = std::nullopt) {
  ScoredProbe p;
  p.probe.probe_id = target + "/" + std::to_string(cue);
  p.probe.paradigm = prompting::Paradigm::assoc_twin;
  p.probe.variant = prompting::Variant::A;
  p.probe.lang = lang;
  p.probe.prompt = "p";
  p.probe.target = target;
  p.model = "m";
  p.cue = cue::CueScore{cue, cue::CueKind::email, std::nullopt};
  p.generation = adapter::GenerationResult{hit ? target : "nothing", 3, adapter::Decoding::greedy};
  p.hit = hit;
  p.recon_logprob = recon;
  return p;
}

std::vector<ScoredProbe> random_set(std::mt19937_64& rng, size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoredProbe> v;
  for (size_t i = 0; i < n; ++i) {
    double c = std::round(u(rng) * 20.0) / 20.0;  // frequent exact ties with tau values
    v.push_back(make(c, u(rng) < 0.3, "t" + std::to_string(rng() % 5), "eng", -u(rng) * 10));
  }
  return v;
}

}  // namespace

TEST(ExactHit, NfcWithoutCaseFolding) {
  EXPECT_TRUE(exact_hit("jane@x.io", "mail: jane@x.io."));
  EXPECT_FALSE(exact_hit("jane@x.io", "mail: Jane@x.io."));
  EXPECT_TRUE(exact_hit("jürgen@x.de", "ju\xcc\x88rgen@x.de"));
  EXPECT_FALSE(exact_hit("a", ""));
  EXPECT_THROW(exact_hit("", "x"), PreconditionError);
}

TEST(Recon, CompensatedSum) {
  adapter::ScoreTrace t{{"a", "b", "c", "d"}, {-1e16, -1.0, -1.0, 1e16}, std::nullopt, std::nullopt};
  EXPECT_EQ(recon_logprob(t), -2.0);
  EXPECT_THROW(recon_logprob(adapter::ScoreTrace{}), PreconditionError);
}

TEST(HrAtTau, NumeratorDenominatorMonotoneInTau) {
  std::mt19937_64 rng(17);
  const std::vector<double> taus{0.0, 0.1, 0.25, 0.3, 0.5, 0.55, 0.7, 0.9, 0.95, 1.0, 1.01};
  for (int s = 0; s < 1000; ++s) {
    auto set = random_set(rng, rng() % 40);
    TauCell prev;
    for (double tau : taus) {
      TauCell c = hr_at_tau(set, tau);
      ASSERT_GE(c.n_below, prev.n_below);
      ASSERT_GE(c.hits_below, prev.hits_below);
      ASSERT_EQ(c.hr.has_value(), c.n_below > 0);
      if (c.hr) ASSERT_EQ(*c.hr, double(c.hits_below) / double(c.n_below));
      prev = c;
    }
  }
}

TEST(HrAtTau, AboveMaxEqualsUnconditionalRate) {
  std::mt19937_64 rng(19);
  for (int s = 0; s < 200; ++s) {
    auto set = random_set(rng, 1 + rng() % 40);
    size_t hits = std::count_if(set.begin(), set.end(), [](const ScoredProbe& p) { return *p.hit; });
    TauCell c = hr_at_tau(set, 1.0 + 1e-9);
    ASSERT_EQ(c.n_below, set.size());
    ASSERT_EQ(*c.hr, double(hits) / double(set.size()));
  }
}

TEST(HrAtTau, StrictInequalityAndEmptySubsets) {
  std::vector<ScoredProbe> v{make(0.5, true), make(0.7, false)};
  EXPECT_EQ(hr_at_tau(v, 0.5).n_below, 0u);
  EXPECT_FALSE(hr_at_tau(v, 0.5).hr.has_value());
  EXPECT_EQ(hr_at_tau(v, 0.50001).hits_below, 1u);
  EXPECT_FALSE(hr_at_tau({}, 0.9).hr.has_value());
  EXPECT_THROW(recon_at_tau(v, 0.9), PreconditionError);  // no reconstruction scores
  std::vector<ScoredProbe> r{make(0.5, true, "t", "eng", -1.0)};
  EXPECT_FALSE(recon_at_tau(r, 0.3).mean_logprob.has_value());
  auto bad = make(0.1, true);
  bad.cue.reset();
  std::vector<ScoredProbe> b{bad};
  EXPECT_THROW(hr_at_tau(b, 0.5), PreconditionError);
}

TEST(Bins, TopBinClosedAtOne) {
  std::vector<ScoredProbe> v{make(0.0, false), make(0.1, true), make(0.0999999, true), make(1.0, true),
                             make(0.3, false)};
  auto rows = bin_by_cue(v, 0.1);
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0].n, 2u);
  EXPECT_EQ(rows[1].n, 1u);
  EXPECT_EQ(rows[2].n, 0u);
  EXPECT_EQ(rows[3].n, 1u);  // 0.3 lands on its lower edge
  EXPECT_EQ(rows[9].n, 1u);
  EXPECT_DOUBLE_EQ(rows[9].hi, 1.0);
  EXPECT_FALSE(rows[2].hit_rate.has_value());
  EXPECT_EQ(*rows[0].hit_rate, 0.5);
  EXPECT_THROW(bin_by_cue(v, 0.3), PreconditionError);
  EXPECT_EQ(bin_by_cue(v, 0.25).size(), 4u);
}

TEST(Summaries, PartitionMergeIsExact) {
  std::mt19937_64 rng(29);
  SummaryOptions opts;
  for (int s = 0; s < 100; ++s) {
    auto set = random_set(rng, 1 + rng() % 60);
    GroupAccumulator whole, a, b;
    for (const auto& p : set) whole.add(p);
    std::vector<ScoredProbe> shuffled = set;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    size_t cut = rng() % (shuffled.size() + 1);
    for (size_t i = 0; i < shuffled.size(); ++i) (i < cut ? a : b).add(shuffled[i]);
    b.merge(std::move(a));
    auto x = whole.finish({}, opts);
    auto y = b.finish({}, opts);
    ASSERT_EQ(x.n, y.n);
    ASSERT_EQ(x.total_hits, y.total_hits);
    ASSERT_EQ(x.avg_cue_hit, y.avg_cue_hit);
    ASSERT_EQ(x.avg_cue_nonhit, y.avg_cue_nonhit);
    ASSERT_EQ(x.cue_auc, y.cue_auc);
    for (size_t k = 0; k < x.recon_rows.size(); ++k) ASSERT_EQ(x.recon_rows[k].mean_logprob, y.recon_rows[k].mean_logprob);
    for (size_t k = 0; k < x.bins.size(); ++k) ASSERT_EQ(x.bins[k].mean_recon, y.bins[k].mean_recon);
  }
}

TEST(Summaries, UniqueHitsByTargetAndLanguage) {
  std::vector<ScoredProbe> v{make(0.1, true, "a@x.io", "eng"), make(0.2, true, "a@x.io", "eng"),
                             make(0.3, true, "a@x.io", "deu"), make(0.4, false, "b@x.io", "eng")};
  auto s = summarize(v, {GroupField::model});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].total_hits, 3u);
  EXPECT_EQ(s[0].unique_hits, 2u);
  EXPECT_EQ(*s[0].cue_auc, 0.0);
  EXPECT_NEAR(*s[0].avg_cue_hit, 0.2, 1e-15);
  EXPECT_EQ(s[0].key[1], (std::pair<GroupField, std::string>{GroupField::lang, "*"}));
  auto by_lang = summarize(v, {GroupField::lang});
  ASSERT_EQ(by_lang.size(), 2u);
  EXPECT_EQ(by_lang[0].key[1].second, "deu");
}

TEST(Summaries, CueFreeProbesIgnored) {
  auto p = make(0.1, false);
  p.probe.paradigm = prompting::Paradigm::cuefree;
  p.probe.target.reset();
  p.cue.reset();
  p.hit.reset();
  std::vector<ScoredProbe> v{p};
  EXPECT_TRUE(summarize(v, {GroupField::model}).empty());
  auto rows = summarize_cuefree(v, {{"eng", "nothing"}},
                                [](const std::string&, PiiKind, const std::string& t) {
                                  return std::vector<std::string>{t};
                                });
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].samples, 1u);
  EXPECT_EQ(rows[0].matched_known, 1u);
}

TEST(ScoredProbe, JsonRoundTripAndValidation) {
  auto p = make(0.4, true, "z@x.io", "eng", -3.5);
  p.trace = adapter::ScoreTrace{{"z"}, {-3.5}, std::nullopt, std::nullopt};
  auto j = to_json(p);
  EXPECT_EQ(to_json(scored_probe_from_json(j, "x")), j);
  auto bad = j;
  bad["recon_logprob"] = 0.5;
  EXPECT_THROW(scored_probe_from_json(bad, "x"), DataError);
  bad = j;
  bad["trace"]["logprobs"] = {1.0};
  EXPECT_THROW(scored_probe_from_json(bad, "x"), DataError);
  bad = j;
  bad["generation"] = nullptr;
  EXPECT_THROW(scored_probe_from_json(bad, "x"), DataError);
}
