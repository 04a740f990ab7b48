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

#include <string>
#include <vector>

#include "crm/corpus.hpp"
#include "crm/error.hpp"
#include "crm/jsonl.hpp"
#include "crm/text.hpp"

using namespace crm;
using corpus::Document;

namespace {

Document doc(const std::string& s) { return {"d", "eng", text::decode_utf8(s), true}; }

std::vector<std::pair<size_t, size_t>> spans(const std::vector<corpus::PiiEntity>& es) {
  std::vector<std::pair<size_t, size_t>> out;
  for (const auto& e : es) out.emplace_back(e.span.begin, e.span.end);
  return out;
}

std::vector<std::pair<size_t, size_t>> oracle_spans(const nlohmann::json& j) {
  std::vector<std::pair<size_t, size_t>> out;
  for (const auto& s : j.at("spans")) out.emplace_back(s.at(0).get<size_t>(), s.at(1).get<size_t>());
  return out;
}

}  // namespace

TEST(ScanEmails, MatchesReferenceRegexEngine) {
  size_t n = 0, matched = 0;
  jsonl::for_each(std::string(CRM_TEST_DATA_DIR) + "/email_oracle.jsonl", [&](const auto& j, const auto& where) {
    const Document d = doc(j.at("text").template get<std::string>());
    const auto got = corpus::scan_emails(d);
    ASSERT_EQ(spans(got), oracle_spans(j)) << where << ": " << j.at("text");
    for (const auto& e : got) EXPECT_EQ(text::decode_utf8(e.surface), text::substr(d.text, e.span.begin, e.span.end));
    ++n;
    matched += got.empty() ? 0 : 1;
  });
  EXPECT_GE(n, 5000u);
  EXPECT_GT(matched, 100u);
}

TEST(ScanEmails, FixedCases) {
  EXPECT_EQ(spans(corpus::scan_emails(doc("mail me at a.b@x.io now"))), (std::vector<std::pair<size_t, size_t>>{{11, 19}}));
  EXPECT_TRUE(corpus::scan_emails(doc("")).empty());
  EXPECT_EQ(spans(corpus::scan_emails(doc("user@@host.com, u@h.museum1"))),
            (std::vector<std::pair<size_t, size_t>>{{16, 25}}));
  EXPECT_EQ(spans(corpus::scan_emails(doc("a@b@c.com"))), (std::vector<std::pair<size_t, size_t>>{{2, 9}}));
  EXPECT_EQ(spans(corpus::scan_emails(doc("a@b.comx.y@c.de"))),
            (std::vector<std::pair<size_t, size_t>>{{0, 8}, {8, 15}}));
}

TEST(ScanPhones, MatchesReferenceRegexEngine) {
  size_t n = 0, matched = 0;
  jsonl::for_each(std::string(CRM_TEST_DATA_DIR) + "/phone_oracle.jsonl", [&](const auto& j, const auto& where) {
    const auto codes = j.at("codes").template get<std::vector<std::string>>();
    const auto got = corpus::scan_phones(doc(j.at("text").template get<std::string>()), codes);
    ASSERT_EQ(spans(got), oracle_spans(j)) << where << ": " << j.at("text");
    ++n;
    matched += got.empty() ? 0 : 1;
  });
  EXPECT_GE(n, 3000u);
  EXPECT_GT(matched, 100u);
}

TEST(ScanPhones, FixedCases) {
  const std::vector<std::string> de{"49"};
  using V = std::vector<std::pair<size_t, size_t>>;
  EXPECT_EQ(spans(corpus::scan_phones(doc("+49 30 123456"), de)), (V{{0, 13}}));
  EXPECT_EQ(spans(corpus::scan_phones(doc("+49 123456 7"), de)), (V{{0, 12}}));
  EXPECT_EQ(spans(corpus::scan_phones(doc("+49 (30) 1234-56"), de)), (V{{0, 16}}));
  EXPECT_TRUE(corpus::scan_phones(doc("a+49 30 123456"), de).empty());
  EXPECT_TRUE(corpus::scan_phones(doc("+49 1234567890123"), de).empty());
}

TEST(ScanPhones, NeverMatchesWithoutConfiguredPrefix) {
  const std::vector<std::string> codes{"49", "43", "41"};
  for (const char* s : {"030 1234567", "0049 30 1234567", "(030) 123-4567", "+33 1 42 68 53 00", "49 30 1234567",
                        "Tel: 030/1234567", "+ 49 30 1234567"}) {
    EXPECT_TRUE(corpus::scan_phones(doc(s), codes).empty()) << s;
  }
  for (const auto& p : corpus::scan_phones(doc("x +43 1 5550123 y +41 44 555 01 23 z"), codes)) {
    EXPECT_EQ(p.surface[0], '+');
  }
}

TEST(CountryCodes, ShippedTableCoversAllLanguages) {
  const auto t = corpus::CountryCodeTable::load(std::string(CRM_SOURCE_DIR) + "/config/country_codes.json");
  EXPECT_FALSE(t.version().empty());
  for (const char* lang : {"afr", "ara", "aze", "bel", "bul", "dan", "deu", "ell", "eng", "fin", "fra",
                           "hin", "hun", "ita", "kor", "lav", "lit", "mal", "nld", "pol", "por", "ron",
                           "rus", "spa", "swa", "swe", "tam", "tha", "tur", "ukr", "vie", "zho"}) {
    EXPECT_FALSE(t.codes_for(lang).empty()) << lang;
  }
  EXPECT_EQ(t.codes_for("zho"), (std::vector<std::string>{"86", "852", "853", "886"}));
  EXPECT_THROW(t.codes_for("xxx"), MissingCountryCodes);
}

TEST(CountryCodes, RejectsNonDigitCodes) {
  EXPECT_THROW(corpus::CountryCodeTable::from_json(nlohmann::json::parse(R"({"languages": {"eng": ["+1"]}})")),
               ConfigError);
  EXPECT_THROW(corpus::CountryCodeTable::from_json(nlohmann::json::parse(R"({"languages": {"eng": []}})")),
               ConfigError);
  EXPECT_THROW(corpus::CountryCodeTable::from_json(nlohmann::json::parse(R"({"codes": {}})")), ConfigError);
}
