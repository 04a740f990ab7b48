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

#include <optional>
#include <string>
#include <string_view>

#include "crm/types.hpp"

// Overlap cue between a target string and a prompt: the share of the
// normalized target that already appears contiguously in the normalized
// prompt. Email and phone targets get type-specific variants.
namespace crm::cue {

// Text after NFKC, full lowercasing, and removal of everything that is not
// a letter (L*) or decimal digit (Nd).
struct NormalizedText {
  std::u32string text;
  size_t size() const { return text.size(); }
  bool empty() const { return text.empty(); }
  bool operator==(const NormalizedText&) const = default;
};

NormalizedText normalize(std::u32string_view s);
NormalizedText normalize(std::string_view utf8);
// NFKC then keep Nd only.
NormalizedText normalize_digits(std::u32string_view s);
NormalizedText normalize_digits(std::string_view utf8);

// Length of the longest common contiguous substring, in scalars.
// Suffix automaton over the longer input: O(|a| + |b|) transitions.
size_t lcs_len(std::u32string_view a, std::u32string_view b);
inline size_t lcs_len(const NormalizedText& a, const NormalizedText& b) {
  return lcs_len(a.text, b.text);
}

enum class CueKind { generic, email, phone };
std::string_view to_string(CueKind k);

struct EmailComponents {
  double local_cue = 0.0;
  double domain_cue = 0.0;
  size_t local_len = 0;
  size_t domain_len = 0;
};

struct CueScore {
  double value = 0.0;
  CueKind kind = CueKind::generic;
  std::optional<EmailComponents> components;
};

struct EmailCueOptions {
  // Number of trailing dot-separated labels dropped from the domain.
  int tld_labels_stripped = 1;
};

// Throws EmptyTarget when the normalized target is empty.
CueScore cue(std::string_view target, std::string_view prompt);
// Throws MalformedEmail unless there is exactly one '@'; EmptyTarget when
// both normalized components are empty.
CueScore email_cue(std::string_view email, std::string_view prompt,
                   const EmailCueOptions& opts = {});
// Throws EmptyTarget when the target has no digits.
CueScore phone_cue(std::string_view phone, std::string_view prompt);

// Dispatches on PII kind; names use the generic cue.
CueScore pii_cue(PiiKind kind, std::string_view target, std::string_view prompt,
                 const EmailCueOptions& opts = {});

// Domain with trailing labels removed ("x.co.uk" -> "x.co" for one label).
std::string strip_tld(std::string_view domain, int labels);

}  // namespace crm::cue
