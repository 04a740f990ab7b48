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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crm/corpus.hpp"
#include "crm/protocol.hpp"
#include "crm/roc.hpp"

// Membership-inference scores over a context window. Every score is
// oriented so that a larger value means "more member-like".
namespace crm::mia {

using Json = nlohmann::json;
using adapter::ScoreTrace;

enum class Attack { loss, zlib, ref, ne_ran, ne_pii, min_k, min_k_pp, dc_pdd };
inline constexpr Attack kAllAttacks[] = {Attack::loss,   Attack::zlib,  Attack::ref,      Attack::ne_ran,
                                         Attack::ne_pii, Attack::min_k, Attack::min_k_pp, Attack::dc_pdd};
std::string_view to_string(Attack a);
Attack attack_from_string(std::string_view s);  // throws ConfigError

// Mean per-token log-probability (= -NLL).
double loss_score(const ScoreTrace& trace);

// Byte length of zlib.compress(utf8) at the default level.
size_t zlib_length(std::string_view utf8);
// Sum of log-probabilities divided by the compressed length of the text.
// Throws PreconditionError on empty text.
double zlib_score(std::string_view text, const ScoreTrace& trace);

// loss(target model) - loss(reference model).
double ref_score(const ScoreTrace& target, const ScoreTrace& reference);

// loss(self) - mean loss(neighbors). Needs at least one neighbor.
double neighborhood_score(const ScoreTrace& self, std::span<const ScoreTrace> neighbors);

// Mean of the ceil(k*T) lowest log-probabilities, 0 < k <= 1.
double min_k_score(const ScoreTrace& trace, double k_fraction = 0.2);

// Same selection over (logprob - mu) / sigma. Throws MissingStats.
double min_k_pp_score(const ScoreTrace& trace, double k_fraction = 0.2);

// Per-language token counts under the audited tokenizer. Unseen tokens get
// frequency epsilon.
struct TokenFrequencyTable {
  std::string lang;
  std::string tokenizer_id;
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;  // sum of counts before smoothing
  double epsilon = 0.0;

  double frequency(const std::string& token) const;
  void save(const std::filesystem::path& path) const;
  static TokenFrequencyTable load(const std::filesystem::path& path);
};

// epsilon defaults to 1/total. Throws PreconditionError on an empty corpus.
TokenFrequencyTable build_frequency_table(std::span<const std::string> texts, const corpus::TokenizeFn& tokenize,
                                          std::string lang, std::string tokenizer_id,
                                          std::optional<double> epsilon = std::nullopt);

// Default clamp: 0.01 * |ln epsilon|.
double default_dc_pdd_clamp(const TokenFrequencyTable& freq);

// Over first occurrences of each target token:
//   alpha_t = p_t * ln(1 / f_t),  score = mean(min(alpha_t, clamp)).
// Throws MissingFrequencyTable when freq is null.
double dc_pdd_score(const ScoreTrace& trace, const TokenFrequencyTable* freq,
                    std::optional<double> clamp = std::nullopt);

struct NeighborPools {
  std::vector<std::string> emails;
  std::vector<std::string> names;
  static NeighborPools load(const std::filesystem::path& emails, const std::filesystem::path& names);
};

struct NePiiVariants {
  std::vector<std::string> variants;
  bool substituted = false;  // false: no PII found, variants equal the source
};

// PII-substituting neighbors: emails and names are swapped for pool
// entries; phone digits after the "+code" and date digits are replaced by
// random digits, separators kept. Pure in (window, pools, seed, names,
// codes). Throws EmptyPool when a needed pool is empty.
NePiiVariants nepii_substitute(const corpus::MiaWindow& window, const NeighborPools& pools, std::uint64_t seed,
                               std::span<const std::string> names, std::span<const std::string> country_codes,
                               int n = 10);

struct AttackParams {
  double k_fraction = 0.2;
  std::optional<double> dc_pdd_clamp;
};

// A window plus every trace the configured attacks need:
//   "self" (1), "reference" (1), "ne_ran" (n), "ne_pii" (n).
struct MiaRecord {
  corpus::MiaWindow window;
  std::string model;
  std::map<std::string, std::vector<ScoreTrace>> traces;
  std::map<std::string, std::vector<std::string>> neighbor_texts;
  bool nepii_substituted = false;
  std::map<std::string, double> scores;
};
Json to_json(const MiaRecord& r);
MiaRecord mia_record_from_json(const Json& j, const std::string& where);

// Computes every attack in `attacks` whose inputs are present. Min-K%++
// is skipped when the self trace lacks statistics, DC-PDD when freq is null.
std::map<std::string, double> score_record(const MiaRecord& r, std::span<const Attack> attacks,
                                           const AttackParams& params, const TokenFrequencyTable* freq);

struct LangRoc {
  std::string model;
  std::string lang;  // "all" pools every language
  roc::RocResult result;
};

// Per (language, attack) ROC over records carrying that score, plus a
// pooled "all" row. Cells lacking one class are omitted.
std::vector<LangRoc> evaluate_by_language(std::span<const MiaRecord> records, std::span<const Attack> attacks,
                                          std::span<const double> fprs);

}  // namespace crm::mia
