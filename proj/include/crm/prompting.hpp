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

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crm/corpus.hpp"
#include "crm/types.hpp"

namespace crm::prompting {

using Json = nlohmann::json;

enum class Paradigm { verbatim, assoc_twin, assoc_triplet, cuefree };
std::string_view to_string(Paradigm p);
Paradigm paradigm_from_string(std::string_view s);

enum class Family { twin, triplet };
enum class Variant { A, B, C };
std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);
inline constexpr std::array<Variant, 3> kVariants{Variant::A, Variant::B, Variant::C};

// Templates for one language. Variant A/B/C is list position 0/1/2.
struct TemplateSet {
  std::string lang;
  std::map<PiiKind, std::array<std::string, 3>> twins;
  std::map<PiiKind, std::array<std::string, 3>> triplets;
  std::map<PiiKind, std::string> cuefree;
  // Dialing-code suffix for cue-free phone prompts, e.g. "+1".
  std::string phone_cc_prefix;
};

// Parses {"<lang>": {"twins": {...}, "triplets": {...}, "cuefree": {...}}}.
// Validation is strict: exactly three variants per family and kind, the
// required placeholders present, no unknown keys or placeholders. Throws
// SchemaError naming the language and key.
std::map<std::string, TemplateSet> parse_templates(const Json& j);
std::map<std::string, TemplateSet> load_templates(const std::filesystem::path& path);

struct ProbeInstance {
  std::string probe_id;
  Paradigm paradigm = Paradigm::verbatim;
  std::optional<Variant> variant;
  PiiKind pii_kind = PiiKind::email;
  std::string lang;
  std::string prompt;
  std::optional<std::string> target;  // none for cue-free probes
  std::optional<std::string> source_triplet;
  std::string split = "train";
};
Json to_json(const ProbeInstance& p);
ProbeInstance probe_from_json(const Json& j, const std::string& where);

// Throws MissingField when the name (or the non-target PII for triplet
// templates) is empty.
ProbeInstance instantiate_associative(const corpus::PiiTriplet& t, const TemplateSet& ts, Family family,
                                      Variant variant, PiiKind target_kind);
// Throws MissingField when the stored prefix for target_kind is empty.
ProbeInstance instantiate_verbatim(const corpus::PiiTriplet& t, PiiKind target_kind);
// n identical prompts; phone prompts end with the dialing code. n >= 1.
std::vector<ProbeInstance> instantiate_cuefree(const TemplateSet& ts, PiiKind pii_kind, int n);

// All verbatim and associative probes for one triplet, in a fixed order:
// 2 verbatim, then 2 kinds x 2 families x 3 variants. Probes whose inputs
// are missing are skipped and counted in `skipped`.
std::vector<ProbeInstance> instantiate_all(const corpus::PiiTriplet& t, const TemplateSet& ts,
                                           size_t* skipped = nullptr);

}  // namespace crm::prompting
