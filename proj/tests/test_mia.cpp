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

#include <cmath>
#include <random>
#include <regex>

#include "crm/error.hpp"
#include "crm/mia.hpp"
#include "crm/mock_model.hpp"
#include "test_util.hpp"

using namespace crm;
using namespace crm::mia;

namespace {

ScoreTrace trace(std::vector<std::string> toks, std::vector<double> lps) {
  return ScoreTrace{std::move(toks), std::move(lps), std::nullopt, std::nullopt};
}

ScoreTrace random_trace(std::mt19937_64& rng, size_t n) {
  std::uniform_real_distribution<double> u(-8.0, 0.0);
  ScoreTrace t;
  for (size_t i = 0; i < n; ++i) {
    t.target_tokens.push_back("t" + std::to_string(i));
    t.logprobs.push_back(u(rng));
  }
  return t;
}

corpus::MiaWindow window(const std::string& text) { return {"d", "eng", text, 60, true, ""}; }

const std::vector<std::string> kCodes{"1", "44"};

}  // namespace

TEST(Attacks, NamesRoundTrip) {
  for (Attack a : kAllAttacks) EXPECT_EQ(attack_from_string(to_string(a)), a);
  EXPECT_EQ(to_string(Attack::min_k_pp), "min_k_pp");
  EXPECT_THROW(attack_from_string("gzip"), ConfigError);
}

TEST(Attacks, MinKAtOneIsLoss) {
  std::mt19937_64 rng(61);
  for (int i = 0; i < 2000; ++i) {
    auto t = random_trace(rng, 1 + rng() % 50);
    ASSERT_EQ(min_k_score(t, 1.0), loss_score(t));
  }
}

TEST(Attacks, MinKSelectsLowest) {
  auto t = trace({"a", "b", "c", "d", "e"}, {-1, -2, -3, -4, -5});
  EXPECT_DOUBLE_EQ(min_k_score(t, 0.4), -4.5);
  EXPECT_DOUBLE_EQ(min_k_score(t, 0.01), -5.0);
  EXPECT_THROW(min_k_score(t, 0.0), PreconditionError);
  EXPECT_THROW(min_k_score(t, 1.5), PreconditionError);
  EXPECT_THROW(loss_score(ScoreTrace{}), PreconditionError);
}

TEST(Attacks, NeighborhoodTranslationInvariant) {
  std::mt19937_64 rng(67);
  for (int i = 0; i < 1000; ++i) {
    auto self = random_trace(rng, 8);
    std::vector<ScoreTrace> nb;
    for (int k = 0; k < 4; ++k) nb.push_back(random_trace(rng, 8));
    const double c = -0.25 * static_cast<double>(rng() % 8);  // exact in binary
    auto shift = [&](ScoreTrace t) {
      for (auto& x : t.logprobs) x += c;
      return t;
    };
    std::vector<ScoreTrace> nb2;
    for (const auto& t : nb) nb2.push_back(shift(t));
    // Dyadic values, lengths and neighbor count make every mean exact, so
    // the identity holds bit for bit.
    auto q = [](ScoreTrace t) {
      for (auto& x : t.logprobs) x = std::round(x * 64) / 64;
      return t;
    };
    std::vector<ScoreTrace> nq, nq2;
    for (const auto& t : nb) nq.push_back(q(t));
    for (const auto& t : nq) nq2.push_back(shift(t));
    ASSERT_EQ(neighborhood_score(q(self), nq), neighborhood_score(shift(q(self)), nq2));
    ASSERT_NEAR(neighborhood_score(self, nb), neighborhood_score(shift(self), nb2), 1e-12);
  }
  EXPECT_THROW(neighborhood_score(trace({"a"}, {-1}), {}), PreconditionError);
}

TEST(Attacks, ZlibHandComputation) {
  const std::string text = "The quick brown fox!";
  ASSERT_EQ(text.size(), 20u);
  EXPECT_EQ(zlib_length(text), 28u);
  EXPECT_EQ(zlib_length(text + text), 31u);
  auto t = trace({"The", " quick", " brown", " fox!"}, {-0.5, -1.25, -2.0, -0.75});
  EXPECT_DOUBLE_EQ(zlib_score(text, t), -0.16071428571428573);
  auto t2 = trace({"a", "b", "c", "d", "e", "f", "g", "h"}, {-0.5, -1.25, -2.0, -0.75, -0.5, -1.25, -2.0, -0.75});
  EXPECT_DOUBLE_EQ(zlib_score(text + text, t2), -0.2903225806451613);
  EXPECT_THROW(zlib_score("", t), PreconditionError);
}

TEST(Attacks, ReferenceOrientation) {
  auto target = trace({"a", "b"}, {-0.5, -0.5});
  auto ref = trace({"a", "b"}, {-2.0, -3.0});
  EXPECT_DOUBLE_EQ(ref_score(target, ref), 2.0);  // target model finds it easier: member-like
  EXPECT_DOUBLE_EQ(ref_score(ref, target), -2.0);
}

TEST(Attacks, MinKPlusPlus) {
  ScoreTrace t = trace({"a", "b", "c", "d", "e"}, {-1, -2.5, -0.2, -4, -3});
  EXPECT_THROW(min_k_pp_score(t, 0.4), MissingStats);
  t.vocab_mu = std::vector<double>{-2, -2, -1, -3, -2.5};
  t.vocab_sigma = std::vector<double>{0.5, 1, 2, 0.25, 1.5};
  EXPECT_DOUBLE_EQ(min_k_pp_score(t, 0.4), -2.25);

  std::mt19937_64 rng(71);
  for (int i = 0; i < 1000; ++i) {
    auto c = random_trace(rng, 1 + rng() % 30);
    c.vocab_mu = c.logprobs;
    c.vocab_sigma = std::vector<double>(c.size(), 0.5 + static_cast<double>(rng() % 7));
    ASSERT_EQ(min_k_pp_score(c, 0.2), 0.0);
    ASSERT_EQ(min_k_pp_score(c, 1.0), 0.0);
  }
}

TEST(DcPdd, FrozenValues) {
  TokenFrequencyTable f;
  f.counts = {{"a", 50}, {"b", 30}, {"c", 20}};
  f.total = 100;
  f.epsilon = 0.01;
  auto t = trace({"a", "b", "a", "c", "d"}, {-0.1, -2.0, -0.3, -0.7, -5.0});
  EXPECT_DOUBLE_EQ(default_dc_pdd_clamp(f), 0.04605170185988091);
  EXPECT_NEAR(dc_pdd_score(t, &f), 0.04229612455364976, 1e-15);
  EXPECT_NEAR(dc_pdd_score(t, &f, 1.0), 0.4050945282434628, 1e-15);
  EXPECT_THROW(dc_pdd_score(t, nullptr), MissingFrequencyTable);
}

TEST(FrequencyTable, BuildSmoothAndPersist) {
  std::vector<std::string> texts{"a b a", "c a"};
  auto f = build_frequency_table(texts, [](const std::string& s) { return mock::tokenize(s); }, "eng", "tok");
  EXPECT_EQ(f.total, 5u);
  EXPECT_EQ(f.counts.at("a"), 1u);
  EXPECT_EQ(f.counts.at(" a"), 2u);
  EXPECT_DOUBLE_EQ(f.epsilon, 0.2);
  EXPECT_DOUBLE_EQ(f.frequency(" a"), 0.4);
  EXPECT_DOUBLE_EQ(f.frequency("zzz"), 0.2);
  crm::testing::TempDir dir;
  f.save(dir.path() / "f.jsonl");
  auto g = TokenFrequencyTable::load(dir.path() / "f.jsonl");
  EXPECT_EQ(g.counts, f.counts);
  EXPECT_EQ(g.total, f.total);
  EXPECT_EQ(g.epsilon, f.epsilon);
  EXPECT_EQ(g.lang, "eng");
  EXPECT_EQ(g.tokenizer_id, "tok");
  std::vector<std::string> empty;
  EXPECT_THROW(build_frequency_table(empty, [](const std::string& s) { return mock::tokenize(s); }, "eng", "tok"),
               PreconditionError);
}

TEST(NePii, SubstitutesEveryKindAndIsPure) {
  NeighborPools pools{{"x1@pool.org", "x2@pool.org"}, {"Zed Qu", "Ola Ny"}};
  auto w = window("Ann Lee (ann@lee.io, +44 20 7946 0000) born 12.03.1990 writes.");
  auto a = nepii_substitute(w, pools, 9, std::vector<std::string>{"Ann Lee"}, kCodes, 10);
  auto b = nepii_substitute(w, pools, 9, std::vector<std::string>{"Ann Lee"}, kCodes, 10);
  EXPECT_TRUE(a.substituted);
  EXPECT_EQ(a.variants, b.variants);
  ASSERT_EQ(a.variants.size(), 10u);
  const std::regex shape(
      R"(^(Zed Qu|Ola Ny) \(x[12]@pool\.org, \+44 \d\d \d{4} \d{4}\) born \d\d\.\d\d\.\d{4} writes\.$)");
  for (const auto& v : a.variants) {
    EXPECT_TRUE(std::regex_match(v, shape)) << v;
    EXPECT_EQ(v.find("Ann Lee"), std::string::npos);
    EXPECT_EQ(v.find("ann@lee.io"), std::string::npos);
  }
  EXPECT_NE(nepii_substitute(w, pools, 10, std::vector<std::string>{"Ann Lee"}, kCodes, 10).variants, a.variants);
}

TEST(NePii, NoPiiAndEmptyPools) {
  NeighborPools pools{{"x@p.org"}, {"Zed Qu"}};
  auto plain = nepii_substitute(window("nothing personal here"), pools, 1, {}, kCodes, 3);
  EXPECT_FALSE(plain.substituted);
  EXPECT_EQ(plain.variants, std::vector<std::string>(3, "nothing personal here"));
  EXPECT_THROW(nepii_substitute(window("mail a@b.io"), NeighborPools{{}, {"Zed"}}, 1, {}, kCodes), EmptyPool);
  EXPECT_THROW(nepii_substitute(window("Ann Lee"), NeighborPools{{"x@p.org"}, {}}, 1,
                                std::vector<std::string>{"Ann Lee"}, kCodes),
               EmptyPool);
  auto phone_only = nepii_substitute(window("+1 555 010 0199"), NeighborPools{}, 3, {}, kCodes, 4);
  EXPECT_TRUE(phone_only.substituted);
  for (const auto& v : phone_only.variants) EXPECT_EQ(v.rfind("+1 ", 0), 0u);
}

TEST(Records, ScoreAndRoundTrip) {
  MiaRecord r;
  r.window = window("The quick brown fox!");
  r.model = "m";
  r.traces["self"] = {trace({"The", " quick", " brown", " fox!"}, {-0.5, -1.25, -2.0, -0.75})};
  std::vector<Attack> all(std::begin(kAllAttacks), std::end(kAllAttacks));
  auto s = score_record(r, all, {}, nullptr);
  EXPECT_EQ(s.size(), 3u);  // loss, zlib, min_k
  EXPECT_DOUBLE_EQ(s.at("loss"), -1.125);
  EXPECT_DOUBLE_EQ(s.at("zlib"), -0.16071428571428573);
  r.traces["reference"] = {trace({"x"}, {-3.0})};
  r.traces["ne_ran"] = {trace({"x"}, {-2.0}), trace({"x"}, {-4.0})};
  s = score_record(r, all, {}, nullptr);
  EXPECT_DOUBLE_EQ(s.at("ref"), 1.875);
  EXPECT_DOUBLE_EQ(s.at("ne_ran"), 1.875);
  r.scores = s;
  r.neighbor_texts["ne_ran"] = {"a", "b"};
  auto back = mia_record_from_json(to_json(r), "x");
  EXPECT_EQ(to_json(back), to_json(r));
  EXPECT_THROW(mia_record_from_json(nlohmann::json::object(), "x"), DataError);
}

TEST(Records, EvaluateByLanguage) {
  std::vector<MiaRecord> recs;
  for (int i = 0; i < 8; ++i) {
    MiaRecord r;
    r.model = "m";
    r.window = window("w");
    r.window.lang = i < 4 ? "eng" : "deu";
    r.window.member = i % 2 == 0;
    r.scores["loss"] = r.window.member ? -1.0 - i * 0.01 : -3.0 - i * 0.01;
    recs.push_back(r);
  }
  recs[5].window.member = false;
  std::vector<Attack> atk{Attack::loss, Attack::zlib};
  std::vector<double> fprs{0.01};
  auto rows = evaluate_by_language(recs, atk, fprs);
  ASSERT_EQ(rows.size(), 3u);  // all, deu, eng; zlib has no scores
  for (const auto& row : rows) {
    EXPECT_EQ(row.result.attack, "loss");
    EXPECT_EQ(row.result.auroc, 1.0);
  }
}
