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

#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crm/cue.hpp"
#include "crm/protocol.hpp"
#include "crm/prompting.hpp"

namespace crm::memo {

using Json = nlohmann::json;

struct ScoredProbe {
  prompting::ProbeInstance probe;
  std::string model;
  std::optional<adapter::ScoreTrace> trace;
  std::optional<adapter::GenerationResult> generation;
  std::optional<cue::CueScore> cue;  // absent for cue-free probes
  std::optional<double> recon_logprob;
  std::optional<bool> hit;
};
Json to_json(const ScoredProbe& s);
ScoredProbe scored_probe_from_json(const Json& j, const std::string& where);

// Target occurs contiguously in the generation after NFC of both; no case
// folding. Throws PreconditionError for an empty target.
bool exact_hit(const std::string& target, const std::string& generation);

// Sum of per-token log-probabilities (compensated summation).
double recon_logprob(const adapter::ScoreTrace& trace);

// Order-independent compensated mean: values are sorted before summing so
// any partition/merge of the same multiset yields identical bits.
double stable_mean(std::vector<double> values);

struct TauCell {
  double tau = 0.0;
  size_t n_below = 0;
  size_t hits_below = 0;
  std::optional<double> hr;  // nullopt when n_below == 0
};

struct ReconCell {
  double tau = 0.0;
  size_t n_below = 0;
  std::optional<double> mean_logprob;
};

// Restricted to cue < tau (strict). Every probe must carry cue and hit
// (resp. recon_logprob); throws PreconditionError otherwise.
TauCell hr_at_tau(std::span<const ScoredProbe> probes, double tau);
ReconCell recon_at_tau(std::span<const ScoredProbe> probes, double tau);

struct BinRow {
  double lo = 0.0;
  double hi = 0.0;
  size_t n = 0;
  size_t hits = 0;
  std::optional<double> mean_recon;
  std::optional<double> hit_rate;
};

// Disjoint bins [0,w), [w,2w), ..., final bin closed at 1.0. `width` must
// divide 1 (PreconditionError otherwise).
std::vector<BinRow> bin_by_cue(std::span<const ScoredProbe> probes, double width = 0.1);

enum class GroupField { model, lang, paradigm, variant, pii_kind, split };
std::string_view to_string(GroupField f);
GroupField group_field_from_string(std::string_view s);
inline constexpr GroupField kAllGroupFields[] = {GroupField::model,    GroupField::lang,
                                                 GroupField::paradigm, GroupField::variant,
                                                 GroupField::pii_kind, GroupField::split};

struct CrmSummary {
  // One entry per GroupField in canonical order; "*" where not grouped.
  std::vector<std::pair<GroupField, std::string>> key;
  size_t n = 0;
  size_t total_hits = 0;
  size_t unique_hits = 0;  // distinct (target, lang) among hits
  std::optional<double> avg_cue_hit;
  std::optional<double> avg_cue_nonhit;
  // Separability of hits from non-hits by cue: P(cue_hit > cue_nonhit),
  // ties counted half. Needs both classes.
  std::optional<double> cue_auc;
  std::vector<TauCell> tau_rows;
  std::vector<ReconCell> recon_rows;
  std::vector<BinRow> bins;
};

struct SummaryOptions {
  std::vector<double> taus{0.3, 0.5, 0.7, 0.9};
  double bin_width = 0.1;
};

// Probe multiset for one group; merge() concatenates, so partitioned
// accumulation followed by merge equals a single sequential pass.
class GroupAccumulator {
 public:
  void add(const ScoredProbe& p);
  void merge(GroupAccumulator&& other);
  CrmSummary finish(std::vector<std::pair<GroupField, std::string>> key, const SummaryOptions& opts) const;

 private:
  std::vector<ScoredProbe> probes_;
};

std::string group_value(const ScoredProbe& p, GroupField f);

// Groups scored probes that carry a target (cue-free probes are ignored)
// by the selected fields and summarizes each group. Groups are returned
// sorted by key.
std::vector<CrmSummary> summarize(std::span<const ScoredProbe> probes, const std::vector<GroupField>& group_by,
                                  const SummaryOptions& opts = {});

// Extractable PII from cue-free generations, per (model, lang, kind).
struct CuefreeRow {
  std::string model;
  std::string lang;
  PiiKind pii_kind = PiiKind::email;
  size_t samples = 0;
  size_t distinct_extracted = 0;
  size_t matched_known = 0;  // distinct extracted strings found in `known`
};
std::vector<CuefreeRow> summarize_cuefree(std::span<const ScoredProbe> probes,
                                          const std::set<std::pair<std::string, std::string>>& known_by_lang,
                                          const std::function<std::vector<std::string>(const std::string& lang,
                                                                                       PiiKind kind,
                                                                                       const std::string& text)>& extract);

}  // namespace crm::memo
