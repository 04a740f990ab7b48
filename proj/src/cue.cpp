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

#include "crm/cue.hpp"

#include <algorithm>
#include <unordered_map>
#include <vector>

#include "crm/error.hpp"
#include "crm/text.hpp"

namespace crm {

std::string_view to_string(PiiKind k) {
  switch (k) {
    case PiiKind::email: return "email";
    case PiiKind::phone: return "phone";
    case PiiKind::name: return "name";
  }
  return "?";
}

PiiKind pii_kind_from_string(std::string_view s) {
  if (s == "email") return PiiKind::email;
  if (s == "phone") return PiiKind::phone;
  if (s == "name") return PiiKind::name;
  throw DataError("unknown pii kind '" + std::string(s) + "'");
}

}  // namespace crm

namespace crm::cue {
namespace {

// Suffix automaton; transitions in a hash map since scripts vary widely.
class SuffixAutomaton {
 public:
  explicit SuffixAutomaton(std::u32string_view s) {
    states_.reserve(2 * s.size() + 1);
    states_.push_back({});
    for (char32_t c : s) extend(c);
  }

  size_t longest_common(std::u32string_view t) const {
    size_t best = 0;
    size_t cur_len = 0;
    int v = 0;
    for (char32_t c : t) {
      while (v != 0 && !states_[v].next.contains(c)) {
        v = states_[v].link;
        cur_len = states_[v].len;
      }
      auto it = states_[v].next.find(c);
      if (it != states_[v].next.end()) {
        v = it->second;
        ++cur_len;
      }
      best = std::max(best, cur_len);
    }
    return best;
  }

 private:
  struct State {
    size_t len = 0;
    int link = -1;
    std::unordered_map<char32_t, int> next;
  };

  void extend(char32_t c) {
    int cur = static_cast<int>(states_.size());
    states_.push_back({states_[last_].len + 1, -1, {}});
    int p = last_;
    while (p != -1 && !states_[p].next.contains(c)) {
      states_[p].next[c] = cur;
      p = states_[p].link;
    }
    if (p == -1) {
      states_[cur].link = 0;
    } else {
      int q = states_[p].next[c];
      if (states_[p].len + 1 == states_[q].len) {
        states_[cur].link = q;
      } else {
        int clone = static_cast<int>(states_.size());
        State copy = states_[q];
        copy.len = states_[p].len + 1;
        states_.push_back(std::move(copy));
        while (p != -1) {
          auto it = states_[p].next.find(c);
          if (it == states_[p].next.end() || it->second != q) break;
          it->second = clone;
          p = states_[p].link;
        }
        states_[q].link = clone;
        states_[cur].link = clone;
      }
    }
    last_ = cur;
  }

  std::vector<State> states_;
  int last_ = 0;
};

double ratio(const NormalizedText& target, const NormalizedText& prompt) {
  return static_cast<double>(lcs_len(target, prompt)) / static_cast<double>(target.size());
}

}  // namespace

NormalizedText normalize(std::u32string_view s) {
  std::u32string folded = text::lower(text::nfkc(s));
  NormalizedText out;
  out.text.reserve(folded.size());
  for (char32_t c : folded) {
    if (text::is_alnum(c)) out.text.push_back(c);
  }
  return out;
}

NormalizedText normalize(std::string_view utf8) { return normalize(text::decode_utf8(utf8)); }

NormalizedText normalize_digits(std::u32string_view s) {
  std::u32string composed = text::nfkc(s);
  NormalizedText out;
  for (char32_t c : composed) {
    if (text::is_decimal_digit(c)) out.text.push_back(c);
  }
  return out;
}

NormalizedText normalize_digits(std::string_view utf8) {
  return normalize_digits(text::decode_utf8(utf8));
}

size_t lcs_len(std::u32string_view a, std::u32string_view b) {
  if (a.empty() || b.empty()) return 0;
  if (a.size() > b.size()) std::swap(a, b);
  SuffixAutomaton sam(b);
  return sam.longest_common(a);
}

std::string_view to_string(CueKind k) {
  switch (k) {
    case CueKind::generic: return "generic";
    case CueKind::email: return "email";
    case CueKind::phone: return "phone";
  }
  return "?";
}

CueScore cue(std::string_view target, std::string_view prompt) {
  NormalizedText t = normalize(target);
  if (t.empty()) throw EmptyTarget("target normalizes to the empty string");
  return {ratio(t, normalize(prompt)), CueKind::generic, std::nullopt};
}

std::string strip_tld(std::string_view domain, int labels) {
  std::string d(domain);
  for (int i = 0; i < labels; ++i) {
    auto dot = d.rfind('.');
    if (dot == std::string::npos) break;
    d.resize(dot);
  }
  return d;
}

CueScore email_cue(std::string_view email, std::string_view prompt, const EmailCueOptions& opts) {
  auto at = email.find('@');
  if (at == std::string_view::npos || email.find('@', at + 1) != std::string_view::npos) {
    throw MalformedEmail("email must contain exactly one '@': " + std::string(email));
  }
  NormalizedText local = normalize(email.substr(0, at));
  NormalizedText domain = normalize(strip_tld(email.substr(at + 1), opts.tld_labels_stripped));
  if (local.empty() && domain.empty()) {
    throw EmptyTarget("email has no alphanumeric content: " + std::string(email));
  }
  NormalizedText p = normalize(prompt);
  EmailComponents comp;
  comp.local_len = local.size();
  comp.domain_len = domain.size();
  if (!local.empty()) comp.local_cue = ratio(local, p);
  if (!domain.empty()) comp.domain_cue = ratio(domain, p);
  double weighted = static_cast<double>(comp.local_len) * comp.local_cue +
                    static_cast<double>(comp.domain_len) * comp.domain_cue;
  double value = weighted / static_cast<double>(comp.local_len + comp.domain_len);
  return {value, CueKind::email, comp};
}

CueScore phone_cue(std::string_view phone, std::string_view prompt) {
  NormalizedText t = normalize_digits(phone);
  if (t.empty()) throw EmptyTarget("phone has no digits: " + std::string(phone));
  return {ratio(t, normalize_digits(prompt)), CueKind::phone, std::nullopt};
}

CueScore pii_cue(PiiKind kind, std::string_view target, std::string_view prompt,
                 const EmailCueOptions& opts) {
  switch (kind) {
    case PiiKind::email: return email_cue(target, prompt, opts);
    case PiiKind::phone: return phone_cue(target, prompt);
    case PiiKind::name: return cue(target, prompt);
  }
  return cue(target, prompt);
}

}  // namespace crm::cue
