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

#include "crm/prompting.hpp"

#include <set>

#include "crm/error.hpp"
#include "crm/jsonl.hpp"

namespace crm::prompting {
namespace {

const std::set<std::string> kLangKeys = {"twins", "triplets", "cuefree", "phone_cc_prefix"};

// Every "{...}" placeholder name in a template.
std::vector<std::string> placeholders(const std::string& s) {
  std::vector<std::string> out;
  for (size_t open = s.find('{'); open != std::string::npos; open = s.find('{', open + 1)) {
    size_t close = s.find('}', open);
    if (close == std::string::npos) break;
    out.push_back(s.substr(open + 1, close - open - 1));
  }
  return out;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::map<PiiKind, std::array<std::string, 3>> parse_family(const std::string& lang, const Json& j,
                                                            const char* family, bool needs_pii1) {
  std::string where = lang + "." + family;
  if (!j.is_object()) throw SchemaError(where + ": expected an object keyed by PII kind");
  std::map<PiiKind, std::array<std::string, 3>> out;
  for (const auto& [kind_name, list] : j.items()) {
    if (kind_name != "email" && kind_name != "phone") {
      throw SchemaError(where + ": unknown PII kind '" + kind_name + "'");
    }
    std::string key = where + "." + kind_name;
    if (!list.is_array() || list.size() != 3) throw SchemaError(key + ": expected exactly 3 templates");
    std::array<std::string, 3> arr;
    for (size_t i = 0; i < 3; ++i) {
      if (!list[i].is_string()) throw SchemaError(key + "[" + std::to_string(i) + "]: expected a string");
      arr[i] = list[i].get<std::string>();
      bool has_name = false;
      bool has_pii1 = false;
      for (const auto& ph : placeholders(arr[i])) {
        if (ph == "name") {
          has_name = true;
        } else if (ph == "pii_1" && needs_pii1) {
          has_pii1 = true;
        } else {
          throw SchemaError(key + "[" + std::to_string(i) + "]: unexpected placeholder {" + ph + "}");
        }
      }
      if (!has_name) throw SchemaError(key + "[" + std::to_string(i) + "]: missing {name}");
      if (needs_pii1 && !has_pii1) throw SchemaError(key + "[" + std::to_string(i) + "]: missing {pii_1}");
    }
    out[pii_kind_from_string(kind_name)] = std::move(arr);
  }
  for (const char* kind : {"email", "phone"}) {
    if (!out.contains(pii_kind_from_string(kind))) throw SchemaError(where + ": missing kind '" + kind + "'");
  }
  return out;
}

std::string probe_id(const corpus::PiiTriplet& t, Paradigm p, std::optional<Variant> v, PiiKind k) {
  std::string id = t.triplet_id + "/" + std::string(to_string(p));
  if (v) id += "/" + std::string(to_string(*v));
  return id + "/" + std::string(to_string(k));
}

const std::string& pii_of(const corpus::PiiTriplet& t, PiiKind k) {
  return k == PiiKind::email ? t.email.surface : t.phone.surface;
}

}  // namespace

std::string_view to_string(Paradigm p) {
  switch (p) {
    case Paradigm::verbatim: return "verbatim";
    case Paradigm::assoc_twin: return "assoc_twin";
    case Paradigm::assoc_triplet: return "assoc_triplet";
    case Paradigm::cuefree: return "cuefree";
  }
  return "?";
}

Paradigm paradigm_from_string(std::string_view s) {
  for (Paradigm p : {Paradigm::verbatim, Paradigm::assoc_twin, Paradigm::assoc_triplet, Paradigm::cuefree}) {
    if (to_string(p) == s) return p;
  }
  throw DataError("unknown paradigm '" + std::string(s) + "'");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::A: return "A";
    case Variant::B: return "B";
    case Variant::C: return "C";
  }
  return "?";
}

Variant variant_from_string(std::string_view s) {
  for (Variant v : kVariants) {
    if (to_string(v) == s) return v;
  }
  throw DataError("unknown template variant '" + std::string(s) + "'");
}

std::map<std::string, TemplateSet> parse_templates(const Json& j) {
  if (!j.is_object()) throw SchemaError("template file must be an object keyed by language");
  std::map<std::string, TemplateSet> out;
  for (const auto& [lang, body] : j.items()) {
    if (!body.is_object()) throw SchemaError(lang + ": expected an object");
    for (const auto& [key, unused] : body.items()) {
      if (!kLangKeys.contains(key)) throw SchemaError(lang + ": unknown key '" + key + "'");
    }
    if (!body.contains("twins")) throw SchemaError(lang + ": missing key 'twins'");
    if (!body.contains("triplets")) throw SchemaError(lang + ": missing key 'triplets'");
    TemplateSet ts;
    ts.lang = lang;
    ts.twins = parse_family(lang, body["twins"], "twins", false);
    ts.triplets = parse_family(lang, body["triplets"], "triplets", true);
    if (auto cf = body.find("cuefree"); cf != body.end()) {
      if (!cf->is_object()) throw SchemaError(lang + ".cuefree: expected an object");
      for (const auto& [kind, prompt] : cf->items()) {
        if (kind != "email" && kind != "phone") throw SchemaError(lang + ".cuefree: unknown PII kind '" + kind + "'");
        if (!prompt.is_string() || prompt.get<std::string>().empty()) {
          throw SchemaError(lang + ".cuefree." + kind + ": expected a non-empty string");
        }
        if (!placeholders(prompt.get<std::string>()).empty()) {
          throw SchemaError(lang + ".cuefree." + kind + ": cue-free prompts take no placeholders");
        }
        ts.cuefree[pii_kind_from_string(kind)] = prompt.get<std::string>();
      }
    }
    if (auto cc = body.find("phone_cc_prefix"); cc != body.end()) {
      if (!cc->is_string()) throw SchemaError(lang + ".phone_cc_prefix: expected a string");
      ts.phone_cc_prefix = cc->get<std::string>();
    }
    out[lang] = std::move(ts);
  }
  return out;
}

std::map<std::string, TemplateSet> load_templates(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(jsonl::read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return parse_templates(j);
}

Json to_json(const ProbeInstance& p) {
  return {{"probe_id", p.probe_id},
          {"paradigm", to_string(p.paradigm)},
          {"variant", p.variant ? Json(to_string(*p.variant)) : Json(nullptr)},
          {"pii_kind", to_string(p.pii_kind)},
          {"lang", p.lang},
          {"prompt", p.prompt},
          {"target", p.target ? Json(*p.target) : Json(nullptr)},
          {"source_triplet", p.source_triplet ? Json(*p.source_triplet) : Json(nullptr)},
          {"split", p.split}};
}

ProbeInstance probe_from_json(const Json& j, const std::string& where) {
  ProbeInstance p;
  p.probe_id = jsonl::get_string(j, "probe_id", where);
  p.paradigm = paradigm_from_string(jsonl::get_string(j, "paradigm", where));
  if (j.contains("variant") && j["variant"].is_string()) p.variant = variant_from_string(j["variant"].get<std::string>());
  p.pii_kind = pii_kind_from_string(jsonl::get_string(j, "pii_kind", where));
  p.lang = jsonl::get_string(j, "lang", where);
  p.prompt = jsonl::get_string(j, "prompt", where);
  if (j.contains("target") && j["target"].is_string()) p.target = j["target"].get<std::string>();
  if (j.contains("source_triplet") && j["source_triplet"].is_string()) {
    p.source_triplet = j["source_triplet"].get<std::string>();
  }
  p.split = jsonl::get_string_or(j, "split", "train");
  return p;
}

ProbeInstance instantiate_associative(const corpus::PiiTriplet& t, const TemplateSet& ts, Family family,
                                      Variant variant, PiiKind target_kind) {
  if (target_kind == PiiKind::name) throw PreconditionError("associative probes target email or phone");
  if (t.name.surface.empty()) throw MissingField(t.triplet_id + ": triplet has no name");
  const auto& table = family == Family::twin ? ts.twins : ts.triplets;
  auto it = table.find(target_kind);
  if (it == table.end()) throw MissingField(ts.lang + ": no templates for " + std::string(to_string(target_kind)));
  std::string prompt = it->second[static_cast<size_t>(variant)];
  replace_all(prompt, "{name}", t.name.surface);
  if (family == Family::triplet) {
    const std::string& other = pii_of(t, target_kind == PiiKind::email ? PiiKind::phone : PiiKind::email);
    if (other.empty()) throw MissingField(t.triplet_id + ": associated PII is missing");
    replace_all(prompt, "{pii_1}", other);
  }
  const std::string& target = pii_of(t, target_kind);
  if (target.empty()) throw MissingField(t.triplet_id + ": target PII is missing");
  ProbeInstance p;
  p.paradigm = family == Family::twin ? Paradigm::assoc_twin : Paradigm::assoc_triplet;
  p.variant = variant;
  p.pii_kind = target_kind;
  p.lang = t.lang;
  p.prompt = std::move(prompt);
  p.target = target;
  p.source_triplet = t.triplet_id;
  p.split = t.member ? "train" : "test";
  p.probe_id = probe_id(t, p.paradigm, p.variant, target_kind);
  return p;
}

ProbeInstance instantiate_verbatim(const corpus::PiiTriplet& t, PiiKind target_kind) {
  if (target_kind == PiiKind::name) throw PreconditionError("verbatim probes target email or phone");
  const std::string& prefix = target_kind == PiiKind::email ? t.verbatim_prefix_email : t.verbatim_prefix_phone;
  if (prefix.empty()) throw MissingField(t.triplet_id + ": no verbatim prefix for " + std::string(to_string(target_kind)));
  const std::string& target = pii_of(t, target_kind);
  if (target.empty()) throw MissingField(t.triplet_id + ": target PII is missing");
  ProbeInstance p;
  p.paradigm = Paradigm::verbatim;
  p.pii_kind = target_kind;
  p.lang = t.lang;
  p.prompt = prefix;
  p.target = target;
  p.source_triplet = t.triplet_id;
  p.split = t.member ? "train" : "test";
  p.probe_id = probe_id(t, p.paradigm, std::nullopt, target_kind);
  return p;
}

std::vector<ProbeInstance> instantiate_cuefree(const TemplateSet& ts, PiiKind pii_kind, int n) {
  if (n < 1) throw PreconditionError("cue-free probe count must be >= 1");
  auto it = ts.cuefree.find(pii_kind);
  if (it == ts.cuefree.end()) {
    throw MissingField(ts.lang + ": no cue-free template for " + std::string(to_string(pii_kind)));
  }
  std::string prompt = it->second;
  if (pii_kind == PiiKind::phone) {
    if (ts.phone_cc_prefix.empty()) throw MissingField(ts.lang + ": no dialing code for cue-free phone prompts");
    bool present = prompt.size() >= ts.phone_cc_prefix.size() &&
                   prompt.compare(prompt.size() - ts.phone_cc_prefix.size(), ts.phone_cc_prefix.size(),
                                  ts.phone_cc_prefix) == 0;
    if (!present) prompt += " " + ts.phone_cc_prefix;
  }
  std::vector<ProbeInstance> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    ProbeInstance p;
    p.paradigm = Paradigm::cuefree;
    p.pii_kind = pii_kind;
    p.lang = ts.lang;
    p.prompt = prompt;
    p.probe_id = "cuefree/" + ts.lang + "/" + std::string(to_string(pii_kind)) + "/" + std::to_string(i);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ProbeInstance> instantiate_all(const corpus::PiiTriplet& t, const TemplateSet& ts, size_t* skipped) {
  std::vector<ProbeInstance> out;
  auto attempt = [&](auto&& make) {
    try {
      out.push_back(make());
    } catch (const MissingField&) {
      if (skipped) ++*skipped;
    }
  };
  for (PiiKind k : {PiiKind::email, PiiKind::phone}) {
    attempt([&] { return instantiate_verbatim(t, k); });
  }
  for (PiiKind k : {PiiKind::email, PiiKind::phone}) {
    for (Family f : {Family::twin, Family::triplet}) {
      for (Variant v : kVariants) attempt([&] { return instantiate_associative(t, ts, f, v, k); });
    }
  }
  return out;
}

}  // namespace crm::prompting
