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
#include <random>
#include <vector>

#include "crm/cue.hpp"
#include "crm/error.hpp"
#include "crm/text.hpp"
#include "test_util.hpp"

using namespace crm;

namespace {

size_t lcs_dp(std::u32string_view a, std::u32string_view b) {
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  size_t best = 0;
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return best;
}

}  // namespace

TEST(Lcs, AgreesWithQuadraticOracle) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    auto a = crm::testing::random_unicode(rng, 30);
    auto b = crm::testing::random_unicode(rng, 30);
    ASSERT_EQ(cue::lcs_len(a, b), lcs_dp(a, b)) << text::encode_utf8(a) << " | " << text::encode_utf8(b);
    ASSERT_EQ(cue::lcs_len(b, a), lcs_dp(a, b));
  }
}

TEST(Lcs, EdgeCases) {
  EXPECT_EQ(cue::lcs_len(U"", U"abc"), 0u);
  EXPECT_EQ(cue::lcs_len(U"abc", U""), 0u);
  EXPECT_EQ(cue::lcs_len(U"abcabc", U"cab"), 3u);
  EXPECT_EQ(cue::lcs_len(U"aaaa", U"aa"), 2u);
}

TEST(Normalize, KeepsLettersAndDecimalDigitsOnly) {
  EXPECT_EQ(cue::normalize("John.Doe-42!").text, U"johndoe42");
  EXPECT_EQ(cue::normalize("Ｊｏｈｎ").text, U"john");
  EXPECT_EQ(cue::normalize("x²").text, U"x2");  // NFKC folds superscripts
  EXPECT_EQ(cue::normalize_digits("+49 (30) 12-34").text, U"49301234");
}

TEST(EmailCue, WorkedExample) {
  auto s = cue::email_cue("john.doe@gmail.com", "Contact John Doe at");
  ASSERT_TRUE(s.components);
  EXPECT_DOUBLE_EQ(s.components->local_cue, 1.0);
  EXPECT_DOUBLE_EQ(s.components->domain_cue, 0.2);
  EXPECT_EQ(s.components->local_len, 7u);
  EXPECT_EQ(s.components->domain_len, 5u);
  EXPECT_NEAR(s.value, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(s.kind, cue::CueKind::email);
}

TEST(EmailCue, TldStripping) {
  EXPECT_EQ(cue::strip_tld("x.co.uk", 1), "x.co");
  EXPECT_EQ(cue::strip_tld("x.co.uk", 2), "x");
  EXPECT_EQ(cue::strip_tld("x.co.uk", 0), "x.co.uk");
  EXPECT_EQ(cue::strip_tld("localhost", 3), "localhost");
  auto s = cue::email_cue("a@b.com", "com", {0});
  EXPECT_EQ(s.components->domain_len, 4u);
  EXPECT_NEAR(s.components->domain_cue, 0.75, 1e-12);
}

TEST(EmailCue, Errors) {
  EXPECT_THROW(cue::email_cue("nobody", "x"), MalformedEmail);
  EXPECT_THROW(cue::email_cue("a@b@c.de", "x"), MalformedEmail);
  EXPECT_THROW(cue::email_cue("..@.com", "x"), EmptyTarget);
  EXPECT_THROW(cue::cue("!!!", "x"), EmptyTarget);
  EXPECT_THROW(cue::phone_cue("+ - ()", "x"), EmptyTarget);
}

TEST(PhoneCue, DigitsOnly) {
  EXPECT_DOUBLE_EQ(cue::phone_cue("+49 30 123456", "call 030-123 456").value, 8.0 / 10.0);
  EXPECT_DOUBLE_EQ(cue::phone_cue("+1 555 0100", "no digits here").value, 0.0);
  EXPECT_EQ(cue::pii_cue(PiiKind::phone, "+1 555", "5").kind, cue::CueKind::phone);
  EXPECT_EQ(cue::pii_cue(PiiKind::name, "Ann", "ann").value, 1.0);
}

TEST(CueProperties, BoundsContainmentMonotonicity) {
  std::mt19937_64 rng(23);
  size_t containment = 0, extension = 0;
  for (int i = 0; i < 10000; ++i) {
    auto t = crm::testing::random_unicode(rng, 20);
    auto p = crm::testing::random_unicode(rng, 40);
    auto extra = crm::testing::random_unicode(rng, 10);
    const std::string ts = text::encode_utf8(t);
    if (cue::normalize(ts).empty()) continue;
    const std::string ps = text::encode_utf8(p);
    const double c = cue::cue(ts, ps).value;
    ASSERT_GE(c, 0.0);
    ASSERT_LE(c, 1.0);
    // Concatenation can compose a leading combining mark, so the
    // properties are checked on their normalized preconditions.
    const std::string contained = ps + ts + text::encode_utf8(extra);
    if (cue::normalize(contained).text.find(cue::normalize(ts).text) != std::u32string::npos) {
      ASSERT_EQ(cue::cue(ts, contained).value, 1.0);
      ++containment;
    }
    for (const std::string& longer : {ps + text::encode_utf8(extra), text::encode_utf8(extra) + ps}) {
      if (cue::normalize(longer).text.find(cue::normalize(ps).text) == std::u32string::npos) continue;
      ASSERT_GE(cue::cue(ts, longer).value, c);
      ++extension;
    }

    const std::string email = ts + "@" + text::encode_utf8(extra) + ".org";
    if (cue::normalize(ts).empty() && cue::normalize(text::encode_utf8(extra)).empty()) continue;
    if (std::count(email.begin(), email.end(), '@') != 1) continue;
    const double e = cue::email_cue(email, ps).value;
    ASSERT_GE(e, 0.0);
    ASSERT_LE(e, 1.0);
    ASSERT_GE(cue::email_cue(email, ps + " " + text::encode_utf8(extra)).value, e);
  }
  EXPECT_GT(containment, 9000u);
  EXPECT_GT(extension, 18000u);
}

TEST(Normalize, Idempotent) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 2000; ++i) {
    auto s = crm::testing::random_unicode(rng, 30);
    auto once = cue::normalize(s);
    EXPECT_EQ(cue::normalize(once.text), once);
    for (char32_t c : once.text) EXPECT_EQ(text::lower(std::u32string(1, c)), std::u32string(1, c));
  }
}

TEST(EmailCue, ComponentsRecombine) {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 2000; ++i) {
    auto local = text::encode_utf8(crm::testing::random_unicode(rng, 12));
    auto domain = text::encode_utf8(crm::testing::random_unicode(rng, 12));
    auto prompt = text::encode_utf8(crm::testing::random_unicode(rng, 40));
    const std::string email = local + "@" + domain + ".com";
    cue::CueScore s;
    try {
      s = cue::email_cue(email, prompt);
    } catch (const EmptyTarget&) {
      continue;
    }
    const auto& c = *s.components;
    const double w = (c.local_len * c.local_cue + c.domain_len * c.domain_cue) / double(c.local_len + c.domain_len);
    EXPECT_NEAR(s.value, w, 1e-12);
  }
}
