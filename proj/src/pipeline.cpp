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

#include "crm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "crm/corpus.hpp"
#include "crm/error.hpp"
#include "crm/jsonl.hpp"
#include "crm/mock_model.hpp"
#include "crm/prompting.hpp"
#include "crm/report.hpp"
#include "crm/text.hpp"
#include "crm/transport.hpp"

namespace crm::pipeline {

namespace {

constexpr const char* kTriplets = "triplets.jsonl";
constexpr const char* kWindows = "mia_windows.jsonl";
constexpr const char* kSkipReport = "skip_report.json";
constexpr const char* kProbes = "probes.jsonl";
constexpr const char* kScored = "scored_probes.jsonl";
constexpr const char* kScoredPartial = "scored_probes.partial.jsonl";
constexpr const char* kScoreFailures = "score_failures.jsonl";
constexpr const char* kMiaRecords = "mia_records.jsonl";

const char* const kSkipReasons[] = {"no_email",
                                    "phone_overlaps_email",
                                    "unpaired_email",
                                    "no_name_in_window",
                                    "ambiguous_names",
                                    "disambiguated_by_local_part",
                                    "duplicate_triplet",
                                    "empty_verbatim_prefix",
                                    "mia_window_unsatisfiable"};

template <class F>
void parallel_for(size_t n, size_t threads, F&& fn) {
  std::atomic<size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  const size_t extra = std::min(std::max<size_t>(threads, 1), std::max<size_t>(n, 1)) - 1;
  std::vector<std::thread> pool;
  for (size_t t = 0; t < extra; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// ---- config helpers ----

void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
void read(const Json& j, const char* key, T& dst, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::vector<memo::GroupField> default_grouping(std::initializer_list<memo::GroupField> fs) { return fs; }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    size_t p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string::npos ? std::string::npos : p - start));
    if (p == std::string::npos) break;
    start = p + 1;
  }
  return out;
}

// ---- shared readers ----

std::vector<corpus::PiiTriplet> read_triplets(const fs::path& path) {
  std::vector<corpus::PiiTriplet> out;
  jsonl::for_each(path, [&](const Json& j, const std::string& where) { out.push_back(corpus::triplet_from_json(j, where)); });
  return out;
}

std::vector<memo::ScoredProbe> read_scored(const fs::path& path) {
  std::vector<memo::ScoredProbe> out;
  jsonl::for_each(path, [&](const Json& j, const std::string& where) { out.push_back(memo::scored_probe_from_json(j, where)); });
  return out;
}

std::vector<mia::MiaRecord> read_mia(const fs::path& path) {
  std::vector<mia::MiaRecord> out;
  jsonl::for_each(path, [&](const Json& j, const std::string& where) { out.push_back(mia::mia_record_from_json(j, where)); });
  return out;
}

std::map<std::string, std::vector<std::string>> read_sidecar(const fs::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  jsonl::for_each(path, [&](const Json& j, const std::string& where) {
    const std::string& id = jsonl::get_string(j, "doc_id", where);
    if (!j.contains("names") || !j["names"].is_array()) throw MissingField(where + ": missing names list");
    auto& dst = out[id];
    for (const auto& n : j["names"]) {
      if (!n.is_string()) throw DataError(where + ": names must be strings");
      dst.push_back(n.get<std::string>());
    }
  });
  return out;
}

void require_input(const fs::path& p, const char* stage) {
  if (!fs::exists(p)) throw DataError(std::string(stage) + ": missing input " + p.string());
}

// ---- CSV writers ----

std::vector<std::string> key_cells(const memo::CrmSummary& s) {
  std::vector<std::string> out;
  for (const auto& [f, v] : s.key) out.push_back(v);
  return out;
}

std::vector<std::string> key_header() {
  std::vector<std::string> out;
  for (auto f : memo::kAllGroupFields) out.emplace_back(memo::to_string(f));
  return out;
}

std::string cell(const std::optional<double>& v) { return v ? report::fmt(*v) : "null"; }

void write_crm_csvs(const RunConfig& c, std::span<const memo::ScoredProbe> probes,
                    std::vector<memo::CrmSummary>* keep) {
  memo::SummaryOptions opts;
  opts.taus = c.taus;
  opts.bin_width = c.bin_width;

  std::string groups, tau, bins;
  auto head = key_header();
  auto with = [&](std::vector<std::string> cols) {
    auto h = head;
    h.insert(h.end(), cols.begin(), cols.end());
    return report::csv_row(h);
  };
  groups += with({"n", "total_hits", "unique_hits", "avg_cue_hit", "avg_cue_nonhit", "cue_auc"});
  tau += with({"tau", "n_below", "hits_below", "hr", "mean_recon_logprob"});
  bins += with({"bin_lo", "bin_hi", "n", "hits", "hit_rate", "mean_recon_logprob"});

  std::set<std::vector<memo::GroupField>> seen;
  for (const auto& gb : c.group_by) {
    if (!seen.insert(gb).second) continue;
    for (auto& s : memo::summarize(probes, gb, opts)) {
      const auto key = key_cells(s);
      auto row = [&](std::vector<std::string> cols) {
        auto r = key;
        r.insert(r.end(), cols.begin(), cols.end());
        return report::csv_row(r);
      };
      groups += row({std::to_string(s.n), std::to_string(s.total_hits), std::to_string(s.unique_hits),
                     cell(s.avg_cue_hit), cell(s.avg_cue_nonhit), cell(s.cue_auc)});
      for (size_t i = 0; i < s.tau_rows.size(); ++i) {
        const auto& t = s.tau_rows[i];
        const std::string recon = i < s.recon_rows.size() ? cell(s.recon_rows[i].mean_logprob) : "null";
        tau += row({report::fmt(t.tau), std::to_string(t.n_below), std::to_string(t.hits_below), cell(t.hr), recon});
      }
      for (const auto& b : s.bins) {
        bins += row({report::fmt(b.lo), report::fmt(b.hi), std::to_string(b.n), std::to_string(b.hits),
                     cell(b.hit_rate), cell(b.mean_recon)});
      }
      if (keep) keep->push_back(std::move(s));
    }
  }
  jsonl::write_text_file(c.output_dir / "crm_groups.csv", groups);
  jsonl::write_text_file(c.output_dir / "crm_tau.csv", tau);
  jsonl::write_text_file(c.output_dir / "crm_bins.csv", bins);
}

void write_cuefree_csv(const RunConfig& c, std::span<const memo::ScoredProbe> probes) {
  std::set<std::pair<std::string, std::string>> known;
  const fs::path tpath = c.output_dir / kTriplets;
  if (fs::exists(tpath)) {
    for (const auto& t : read_triplets(tpath)) {
      known.insert({t.lang, t.email.surface});
      known.insert({t.lang, t.phone.surface});
    }
  }
  const auto table = corpus::CountryCodeTable::load(c.country_codes);
  auto extract = [&](const std::string& lang, PiiKind kind, const std::string& txt) {
    corpus::Document d{"", lang, text::decode_utf8(txt), false};
    std::vector<corpus::PiiEntity> found;
    if (kind == PiiKind::email) {
      found = corpus::scan_emails(d);
    } else if (kind == PiiKind::phone && table.has(lang)) {
      found = corpus::scan_phones(d, table.codes_for(lang));
    }
    std::vector<std::string> out;
    for (auto& e : found) out.push_back(std::move(e.surface));
    return out;
  };
  std::string csv = report::csv_row({"model", "lang", "pii_kind", "samples", "distinct_extracted", "matched_known"});
  for (const auto& r : memo::summarize_cuefree(probes, known, extract)) {
    csv += report::csv_row({r.model, r.lang, std::string(to_string(r.pii_kind)), std::to_string(r.samples),
                            std::to_string(r.distinct_extracted), std::to_string(r.matched_known)});
  }
  jsonl::write_text_file(c.output_dir / "cuefree.csv", csv);
}

std::vector<mia::LangRoc> write_mia_roc(const RunConfig& c, std::span<const mia::MiaRecord> records) {
  auto rows = mia::evaluate_by_language(records, c.attacks, c.fprs);
  std::vector<std::string> head{"model", "lang", "attack", "auroc", "auroc_norm"};
  for (double f : c.fprs) head.push_back("tpr_at_fpr_" + report::fmt(f));
  head.insert(head.end(), {"n_members", "n_nonmembers"});
  std::string csv = report::csv_row(head);
  for (const auto& r : rows) {
    std::vector<std::string> cols{r.model, r.lang, r.result.attack, report::fmt(r.result.auroc),
                                  report::fmt(r.result.auroc_norm)};
    for (const auto& [f, t] : r.result.tpr_at) cols.push_back(report::fmt(t));
    cols.push_back(std::to_string(r.result.n_members));
    cols.push_back(std::to_string(r.result.n_nonmembers));
    csv += report::csv_row(cols);
  }
  jsonl::write_text_file(c.output_dir / "mia_roc.csv", csv);
  return rows;
}

}  // namespace

bool RunConfig::wants(mia::Attack a) const { return std::find(attacks.begin(), attacks.end(), a) != attacks.end(); }

std::uint64_t item_seed(std::uint64_t seed, const std::string& key) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : key) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = h ^ (seed + 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RunConfig parse_config(const Json& j, const fs::path& base) {
  RunConfig c;
  c.base_dir = base;
  check_keys(j, "config",
             {"languages", "corpora", "names_sidecar", "country_codes", "templates", "adapter", "extract", "probe",
              "score", "eval", "mia", "seed", "output_dir"});
  read(j, "languages", c.languages, "config");
  if (c.languages.empty()) throw ConfigError("config.languages must not be empty");
  if (j.contains("corpora")) {
    if (!j["corpora"].is_array()) throw ConfigError("config.corpora must be a list");
    for (const auto& e : j["corpora"]) {
      check_keys(e, "config.corpora[]", {"path", "member"});
      CorpusSpec s;
      std::string p;
      read(e, "path", p, "config.corpora[]");
      if (p.empty()) throw ConfigError("config.corpora[]: path is required");
      s.path = resolve(base, p);
      read(e, "member", s.member, "config.corpora[]");
      c.corpora.push_back(std::move(s));
    }
  }
  std::string s;
  if (j.contains("names_sidecar") && !j["names_sidecar"].is_null()) {
    read(j, "names_sidecar", s, "config");
    c.names_sidecar = resolve(base, s);
  }
  s.clear();
  read(j, "country_codes", s, "config");
  if (s.empty()) throw ConfigError("config.country_codes is required");
  c.country_codes = resolve(base, s);
  s.clear();
  read(j, "templates", s, "config");
  if (s.empty()) throw ConfigError("config.templates is required");
  c.templates = resolve(base, s);

  if (j.contains("adapter")) {
    const auto& a = j["adapter"];
    check_keys(a, "config.adapter", {"endpoint", "reference_endpoint", "max_in_flight", "threads"});
    read(a, "endpoint", c.adapter, "config.adapter");
    if (a.contains("reference_endpoint") && !a["reference_endpoint"].is_null()) {
      std::string r;
      read(a, "reference_endpoint", r, "config.adapter");
      c.reference_adapter = r;
    }
    read(a, "max_in_flight", c.max_in_flight, "config.adapter");
    read(a, "threads", c.threads, "config.adapter");
    if (c.max_in_flight == 0 || c.threads == 0) throw ConfigError("config.adapter: max_in_flight and threads must be >= 1");
  }
  if (j.contains("extract")) {
    const auto& e = j["extract"];
    check_keys(e, "config.extract",
               {"window_scalars", "prefix_tokens", "mia_min_tokens", "mia_max_tokens", "mia_target_tokens"});
    read(e, "window_scalars", c.window_scalars, "config.extract");
    read(e, "prefix_tokens", c.prefix_tokens, "config.extract");
    read(e, "mia_min_tokens", c.mia_min_tokens, "config.extract");
    read(e, "mia_max_tokens", c.mia_max_tokens, "config.extract");
    read(e, "mia_target_tokens", c.mia_target_tokens, "config.extract");
    if (c.mia_min_tokens == 0 || c.mia_min_tokens > c.mia_max_tokens || c.prefix_tokens == 0) {
      throw ConfigError("config.extract: need 0 < mia_min_tokens <= mia_max_tokens and prefix_tokens > 0");
    }
  }
  if (j.contains("probe")) {
    check_keys(j["probe"], "config.probe", {"cuefree_n"});
    read(j["probe"], "cuefree_n", c.cuefree_n, "config.probe");
    if (c.cuefree_n < 0) throw ConfigError("config.probe.cuefree_n must be >= 0");
  }
  if (j.contains("score")) {
    const auto& e = j["score"];
    check_keys(e, "config.score", {"greedy_max_new_tokens", "sample_max_new_tokens", "top_k"});
    read(e, "greedy_max_new_tokens", c.greedy_max_new_tokens, "config.score");
    read(e, "sample_max_new_tokens", c.sample_max_new_tokens, "config.score");
    read(e, "top_k", c.top_k, "config.score");
    if (c.greedy_max_new_tokens < 1 || c.sample_max_new_tokens < 1 || c.top_k < 1) {
      throw ConfigError("config.score: token budgets and top_k must be >= 1");
    }
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    check_keys(e, "config.eval", {"taus", "bin_width", "group_by", "tld_labels_stripped"});
    read(e, "taus", c.taus, "config.eval");
    read(e, "bin_width", c.bin_width, "config.eval");
    read(e, "tld_labels_stripped", c.tld_labels_stripped, "config.eval");
    if (e.contains("group_by")) {
      std::vector<std::vector<std::string>> gb;
      read(e, "group_by", gb, "config.eval");
      for (const auto& g : gb) {
        std::vector<memo::GroupField> fields;
        try {
          for (const auto& f : g) fields.push_back(memo::group_field_from_string(f));
        } catch (const Error& err) {
          throw ConfigError(std::string("config.eval.group_by: ") + err.what());
        }
        c.group_by.push_back(std::move(fields));
      }
    }
  }
  for (double t : c.taus) {
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("config.eval.taus must lie in (0, 1]");
  }
  {
    const double k = std::round(1.0 / c.bin_width);
    if (!(c.bin_width > 0.0) || k < 1 || std::fabs(k * c.bin_width - 1.0) > 1e-9) {
      throw ConfigError("config.eval.bin_width must divide 1");
    }
  }
  if (c.tld_labels_stripped < 0) throw ConfigError("config.eval.tld_labels_stripped must be >= 0");
  if (c.group_by.empty()) {
    using G = memo::GroupField;
    c.group_by = {default_grouping({G::model, G::lang, G::paradigm, G::pii_kind}),
                  default_grouping({G::model, G::paradigm, G::pii_kind}),
                  default_grouping({G::model, G::paradigm, G::variant, G::pii_kind}),
                  default_grouping({G::model, G::paradigm, G::pii_kind, G::split})};
  }

  bool explicit_attacks = false;
  if (j.contains("mia")) {
    const auto& m = j["mia"];
    check_keys(m, "config.mia",
               {"attacks", "k_fraction", "dc_pdd_clamp", "dc_pdd_epsilon", "n_neighbors", "mask_fraction",
                "max_span", "fprs", "frequency_corpora", "email_pool", "name_pool"});
    if (m.contains("attacks")) {
      std::vector<std::string> names;
      read(m, "attacks", names, "config.mia");
      for (const auto& n : names) c.attacks.push_back(mia::attack_from_string(n));
      explicit_attacks = true;
    }
    read(m, "k_fraction", c.k_fraction, "config.mia");
    if (m.contains("dc_pdd_clamp") && !m["dc_pdd_clamp"].is_null()) {
      double v = 0;
      read(m, "dc_pdd_clamp", v, "config.mia");
      c.dc_pdd_clamp = v;
    }
    if (m.contains("dc_pdd_epsilon") && !m["dc_pdd_epsilon"].is_null()) {
      double v = 0;
      read(m, "dc_pdd_epsilon", v, "config.mia");
      if (!(v > 0.0)) throw ConfigError("config.mia.dc_pdd_epsilon must be positive");
      c.dc_pdd_epsilon = v;
    }
    read(m, "n_neighbors", c.n_neighbors, "config.mia");
    read(m, "mask_fraction", c.mask_fraction, "config.mia");
    read(m, "max_span", c.max_span, "config.mia");
    read(m, "fprs", c.fprs, "config.mia");
    if (m.contains("frequency_corpora")) {
      std::map<std::string, std::vector<std::string>> fc;
      read(m, "frequency_corpora", fc, "config.mia");
      for (auto& [lang, paths] : fc) {
        for (auto& p : paths) c.frequency_corpora[lang].push_back(resolve(base, p));
      }
    }
    std::string p;
    read(m, "email_pool", p, "config.mia");
    if (!p.empty()) c.email_pool = resolve(base, p);
    p.clear();
    read(m, "name_pool", p, "config.mia");
    if (!p.empty()) c.name_pool = resolve(base, p);
  }
  if (!(c.k_fraction > 0.0 && c.k_fraction <= 1.0)) throw ConfigError("config.mia.k_fraction must lie in (0, 1]");
  if (c.n_neighbors < 1 || c.max_span < 1 || !(c.mask_fraction > 0.0 && c.mask_fraction < 1.0)) {
    throw ConfigError("config.mia: n_neighbors, max_span >= 1 and mask_fraction in (0, 1)");
  }
  for (double f : c.fprs) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("config.mia.fprs must lie in (0, 1)");
  }
  const bool have_pools = c.email_pool.has_value() && c.name_pool.has_value();
  if (!explicit_attacks) {
    using A = mia::Attack;
    c.attacks = {A::loss, A::zlib, A::ne_ran, A::min_k, A::min_k_pp};
    if (c.reference_adapter) c.attacks.push_back(A::ref);
    if (have_pools) c.attacks.push_back(A::ne_pii);
    if (!c.frequency_corpora.empty()) c.attacks.push_back(A::dc_pdd);
    std::sort(c.attacks.begin(), c.attacks.end());
  }
  if (c.wants(mia::Attack::ref) && !c.reference_adapter) {
    throw ConfigError("attack 'ref' needs adapter.reference_endpoint");
  }
  if (c.wants(mia::Attack::ne_pii) && !have_pools) {
    throw ConfigError("attack 'ne_pii' needs mia.email_pool and mia.name_pool");
  }
  if (c.wants(mia::Attack::dc_pdd) && c.frequency_corpora.empty()) {
    throw ConfigError("attack 'dc_pdd' needs mia.frequency_corpora");
  }

  read(j, "seed", c.seed, "config");
  std::string out;
  read(j, "output_dir", out, "config");
  if (!out.empty()) c.output_dir = resolve(base, out);
  return c;
}

RunConfig load_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(jsonl::read_text_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  RunConfig c = parse_config(j, path.parent_path());
  if (const char* cmd = std::getenv("CRM_ADAPTER_CMD"); cmd && *cmd) c.adapter = cmd;
  if (const char* out = std::getenv("CRM_OUTPUT_DIR"); out && *out) c.output_dir = out;
  return c;
}

Json config_to_json(const RunConfig& c) {
  Json corpora = Json::array();
  for (const auto& s : c.corpora) corpora.push_back({{"path", s.path.string()}, {"member", s.member}});
  Json gb = Json::array();
  for (const auto& g : c.group_by) {
    Json row = Json::array();
    for (auto f : g) row.push_back(std::string(memo::to_string(f)));
    gb.push_back(std::move(row));
  }
  Json attacks = Json::array();
  for (auto a : c.attacks) attacks.push_back(std::string(mia::to_string(a)));
  Json freq = Json::object();
  for (const auto& [lang, ps] : c.frequency_corpora) {
    for (const auto& p : ps) freq[lang].push_back(p.string());
  }
  auto opt_path = [](const std::optional<fs::path>& p) { return p ? Json(p->string()) : Json(nullptr); };
  auto opt_num = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{
      {"languages", c.languages},
      {"corpora", corpora},
      {"names_sidecar", opt_path(c.names_sidecar)},
      {"country_codes", c.country_codes.string()},
      {"templates", c.templates.string()},
      {"adapter",
       {{"endpoint", c.adapter},
        {"reference_endpoint", c.reference_adapter ? Json(*c.reference_adapter) : Json(nullptr)},
        {"max_in_flight", c.max_in_flight},
        {"threads", c.threads}}},
      {"extract",
       {{"window_scalars", c.window_scalars},
        {"prefix_tokens", c.prefix_tokens},
        {"mia_min_tokens", c.mia_min_tokens},
        {"mia_max_tokens", c.mia_max_tokens},
        {"mia_target_tokens", c.mia_target_tokens}}},
      {"probe", {{"cuefree_n", c.cuefree_n}}},
      {"score",
       {{"greedy_max_new_tokens", c.greedy_max_new_tokens},
        {"sample_max_new_tokens", c.sample_max_new_tokens},
        {"top_k", c.top_k}}},
      {"eval",
       {{"taus", c.taus}, {"bin_width", c.bin_width}, {"group_by", gb}, {"tld_labels_stripped", c.tld_labels_stripped}}},
      {"mia",
       {{"attacks", attacks},
        {"k_fraction", c.k_fraction},
        {"dc_pdd_clamp", opt_num(c.dc_pdd_clamp)},
        {"dc_pdd_epsilon", opt_num(c.dc_pdd_epsilon)},
        {"n_neighbors", c.n_neighbors},
        {"mask_fraction", c.mask_fraction},
        {"max_span", c.max_span},
        {"fprs", c.fprs},
        {"frequency_corpora", freq},
        {"email_pool", opt_path(c.email_pool)},
        {"name_pool", opt_path(c.name_pool)}}},
      {"seed", c.seed},
      {"output_dir", c.output_dir.string()}};
}

std::unique_ptr<adapter::AdapterClient> connect(const std::string& endpoint, size_t max_in_flight,
                                                const fs::path& base_dir) {
  if (endpoint.empty()) throw ConfigError("no adapter endpoint configured (adapter.endpoint or CRM_ADAPTER_CMD)");
  std::unique_ptr<adapter::Transport> transport;
  const std::string builtin = "builtin-mock:";
  if (endpoint.rfind(builtin, 0) == 0) {
    mock::MockModelConfig mc;
    std::vector<std::string> corpora;
    for (const auto& kv : split(endpoint.substr(builtin.size()), ';')) {
      if (kv.empty()) continue;
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("bad builtin-mock option: " + kv);
      const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
      if (k == "corpus") {
        for (const auto& p : split(v, ',')) {
          if (!p.empty()) corpora.push_back(resolve(base_dir, p).string());
        }
      } else if (k == "model_id") {
        mc.model_id = v;
      } else if (k == "copy_rule") {
        mc.copy_rule = v != "0";
      } else {
        throw ConfigError("unknown builtin-mock option: " + k);
      }
    }
    std::vector<std::string> texts;
    try {
      texts = mock::load_training_texts(corpora);
    } catch (const DataError& e) {
      throw ConfigError(std::string("builtin-mock: ") + e.what());
    }
    auto server = std::make_shared<mock::MockAdapterServer>(std::make_shared<const mock::MockModel>(texts, mc));
    transport = std::make_unique<adapter::LoopbackTransport>(
        [server](const std::string& line) { return server->handle_line(line); });
  } else {
    transport = adapter::open_transport(endpoint);
  }
  adapter::ClientOptions opts;
  opts.max_in_flight = max_in_flight;
  return std::make_unique<adapter::AdapterClient>(std::move(transport), opts);
}

// ---- extract ----

void cmd_extract(const RunConfig& c, adapter::AdapterClient& client, StageLog& log) {
  const auto table = corpus::CountryCodeTable::load(c.country_codes);
  for (const auto& lang : c.languages) table.codes_for(lang);
  const std::set<std::string> langs(c.languages.begin(), c.languages.end());

  std::optional<std::map<std::string, std::vector<std::string>>> sidecar;
  if (c.names_sidecar) sidecar = read_sidecar(*c.names_sidecar);

  std::vector<corpus::Document> docs;
  for (const auto& spec : c.corpora) {
    std::set<std::string> ids;
    jsonl::for_each(spec.path, [&](const Json& j, const std::string& where) {
      auto d = corpus::document_from_json(j, where, spec.member);
      if (!langs.contains(d.lang)) throw DataError(where + ": language '" + d.lang + "' is not configured");
      if (!ids.insert(d.doc_id).second) throw DataError(where + ": duplicate doc_id '" + d.doc_id + "'");
      docs.push_back(std::move(d));
    });
  }

  struct DocOut {
    std::vector<corpus::PiiTriplet> triplets;
    std::optional<corpus::MiaWindow> window;
    corpus::SkipReport report;
  };
  std::vector<DocOut> outs(docs.size());
  const corpus::TokenizeFn tokenize = [&client](const std::string& s) { return client.tokenize_text(s); };
  corpus::TripletOptions topts;
  topts.window_scalars = c.window_scalars;
  corpus::MiaWindowOptions wopts;
  wopts.min_tokens = c.mia_min_tokens;
  wopts.max_tokens = c.mia_max_tokens;
  wopts.target_tokens = c.mia_target_tokens;

  parallel_for(docs.size(), c.threads, [&](size_t i) {
    const auto& doc = docs[i];
    auto& out = outs[i];
    auto emails = corpus::scan_emails(doc);
    if (emails.empty()) {
      out.report.add(doc.lang, "no_email");
      return;
    }
    std::vector<corpus::PiiEntity> phones;
    for (auto& p : corpus::scan_phones(doc, table.codes_for(doc.lang))) {
      const bool clash = std::any_of(emails.begin(), emails.end(), [&](const auto& e) { return e.span.overlaps(p.span); });
      if (clash) {
        out.report.add(doc.lang, "phone_overlaps_email");
      } else {
        phones.push_back(std::move(p));
      }
    }
    std::vector<std::string> names;
    if (sidecar) {
      if (auto it = sidecar->find(doc.doc_id); it != sidecar->end()) names = it->second;
    } else {
      names = client.annotate_names(text::encode_utf8(doc.text), doc.lang);
    }
    std::vector<corpus::PiiEntity> blocked = emails;
    blocked.insert(blocked.end(), phones.begin(), phones.end());
    const auto located = corpus::locate_names(doc, names, blocked);
    out.triplets = corpus::build_triplets(doc, emails, phones, located, out.report, topts);
    for (auto& t : out.triplets) {
      try {
        t.verbatim_prefix_email = corpus::extract_verbatim_prefix(doc, t.email, tokenize, c.prefix_tokens);
      } catch (const PreconditionError&) {
        out.report.add(doc.lang, "empty_verbatim_prefix");
      }
      try {
        t.verbatim_prefix_phone = corpus::extract_verbatim_prefix(doc, t.phone, tokenize, c.prefix_tokens);
      } catch (const PreconditionError&) {
        out.report.add(doc.lang, "empty_verbatim_prefix");
      }
    }
    for (const auto& e : emails) {
      try {
        out.window = corpus::extract_mia_window(doc, e, tokenize, wopts);
        break;
      } catch (const WindowUnsatisfiable&) {
      }
    }
    if (!out.window) out.report.add(doc.lang, "mia_window_unsatisfiable");
  });

  std::vector<corpus::PiiTriplet> triplets;
  std::vector<corpus::MiaWindow> windows;
  corpus::SkipReport report;
  for (auto& o : outs) {
    for (auto& t : o.triplets) triplets.push_back(std::move(t));
    if (o.window) windows.push_back(std::move(*o.window));
    report.merge(o.report);
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
    return std::tie(a.doc_id, a.email.span.begin, a.member) < std::tie(b.doc_id, b.email.span.begin, b.member);
  });
  std::stable_sort(windows.begin(), windows.end(),
                   [](const auto& a, const auto& b) { return std::tie(a.doc_id, a.member) < std::tie(b.doc_id, b.member); });

  fs::create_directories(c.output_dir);
  jsonl::Writer tw(c.output_dir / kTriplets);
  for (const auto& t : triplets) tw.write(corpus::to_json(t));
  tw.commit();
  jsonl::Writer ww(c.output_dir / kWindows);
  for (const auto& w : windows) ww.write(corpus::to_json(w));
  ww.commit();

  Json drops = Json::object();
  for (const auto& lang : c.languages) {
    for (const char* r : kSkipReasons) drops[lang][r] = 0;
  }
  const Json counted = report.to_json();
  for (const auto& [lang, reasons] : counted.items()) {
    for (const auto& [r, n] : reasons.items()) drops[lang][r] = n;
  }
  Json summary{{"model", client.info().model_id},
               {"tokenizer", client.info().tokenizer_id},
               {"documents", docs.size()},
               {"triplets", triplets.size()},
               {"mia_windows", windows.size()},
               {"drops", drops}};
  jsonl::write_text_file(c.output_dir / kSkipReport, summary.dump(2) + "\n");
  log.info("extract: " + std::to_string(docs.size()) + " documents, " + std::to_string(triplets.size()) +
           " triplets, " + std::to_string(windows.size()) + " MIA windows");
}

// ---- probe ----

void cmd_probe(const RunConfig& c, StageLog& log) {
  require_input(c.output_dir / kTriplets, "probe");
  const auto templates = prompting::load_templates(c.templates);
  for (const auto& lang : c.languages) {
    if (!templates.contains(lang)) throw SchemaError("templates: no entry for language '" + lang + "'");
  }
  const auto triplets = read_triplets(c.output_dir / kTriplets);
  jsonl::Writer w(c.output_dir / kProbes);
  size_t n = 0, skipped = 0;
  for (const auto& t : triplets) {
    auto it = templates.find(t.lang);
    if (it == templates.end()) throw SchemaError("templates: no entry for language '" + t.lang + "'");
    for (const auto& p : prompting::instantiate_all(t, it->second, &skipped)) {
      w.write(prompting::to_json(p));
      ++n;
    }
  }
  size_t cuefree = 0;
  if (c.cuefree_n > 0) {
    std::optional<corpus::CountryCodeTable> table;
    for (const auto& lang : c.languages) {
      auto ts = templates.at(lang);
      if (ts.phone_cc_prefix.empty()) {
        if (!table) table = corpus::CountryCodeTable::load(c.country_codes);
        ts.phone_cc_prefix = "+" + table->codes_for(lang).front();
      }
      for (PiiKind kind : {PiiKind::email, PiiKind::phone}) {
        if (!ts.cuefree.contains(kind)) continue;
        for (const auto& p : prompting::instantiate_cuefree(ts, kind, c.cuefree_n)) {
          w.write(prompting::to_json(p));
          ++cuefree;
        }
      }
    }
  }
  w.commit();
  log.info("probe: " + std::to_string(n) + " targeted probes (" + std::to_string(skipped) + " skipped), " +
           std::to_string(cuefree) + " cue-free probes");
}

// ---- score ----

void cmd_score(const RunConfig& c, adapter::AdapterClient& client, StageLog& log) {
  require_input(c.output_dir / kProbes, "score");
  std::vector<prompting::ProbeInstance> probes;
  jsonl::for_each(c.output_dir / kProbes,
                  [&](const Json& j, const std::string& where) { probes.push_back(prompting::probe_from_json(j, where)); });
  const std::string model = client.info().model_id;

  // Completed work from a previous (possibly interrupted) run of this model.
  std::map<std::string, memo::ScoredProbe> done;
  for (const char* name : {kScored, kScoredPartial}) {
    const fs::path p = c.output_dir / name;
    if (!fs::exists(p)) continue;
    jsonl::for_each(p, [&](const Json& j, const std::string& where) {
      auto s = memo::scored_probe_from_json(j, where);
      if (s.model == model) done.insert_or_assign(s.probe.probe_id, std::move(s));
    });
  }
  std::vector<size_t> todo;
  for (size_t i = 0; i < probes.size(); ++i) {
    if (!done.contains(probes[i].probe_id)) todo.push_back(i);
  }

  cue::EmailCueOptions copts;
  copts.tld_labels_stripped = c.tld_labels_stripped;
  std::mutex mu;
  std::ofstream partial(c.output_dir / kScoredPartial, std::ios::app | std::ios::binary);
  if (!partial) throw DataError("cannot open " + (c.output_dir / kScoredPartial).string());
  std::vector<std::pair<std::string, std::string>> failures;

  parallel_for(todo.size(), c.threads, [&](size_t k) {
    const auto& p = probes[todo[k]];
    memo::ScoredProbe s;
    s.probe = p;
    s.model = model;
    try {
      if (p.target) {
        s.trace = client.score_target(p.prompt, *p.target, false);
        s.generation = client.generate_greedy(p.prompt, c.greedy_max_new_tokens);
        s.cue = cue::pii_cue(p.pii_kind, *p.target, p.prompt, copts);
        s.recon_logprob = memo::recon_logprob(*s.trace);
        s.hit = memo::exact_hit(*p.target, s.generation->text);
      } else {
        s.generation = client.generate_sample(p.prompt, item_seed(c.seed, p.probe_id), c.sample_max_new_tokens, c.top_k);
      }
    } catch (const AdapterError& e) {
      std::lock_guard<std::mutex> lk(mu);
      failures.emplace_back(p.probe_id, e.what());
      return;
    }
    const std::string line = jsonl::dump(memo::to_json(s));
    std::lock_guard<std::mutex> lk(mu);
    partial << line << '\n';
    partial.flush();
    done.insert_or_assign(p.probe_id, std::move(s));
  });
  partial.close();

  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end());
    jsonl::Writer fw(c.output_dir / kScoreFailures);
    for (const auto& [id, why] : failures) fw.write(Json{{"probe_id", id}, {"model", model}, {"error", why}});
    fw.commit();
    throw AdapterError(std::to_string(failures.size()) + " probes failed; manifest in " +
                       (c.output_dir / kScoreFailures).string() + "; rerun to resume");
  }
  jsonl::Writer w(c.output_dir / kScored);
  for (const auto& p : probes) w.write(memo::to_json(done.at(p.probe_id)));
  w.commit();
  fs::remove(c.output_dir / kScoredPartial);
  fs::remove(c.output_dir / kScoreFailures);
  log.info("score: " + std::to_string(probes.size()) + " probes (" + std::to_string(todo.size()) + " newly scored) with " +
           model);
}

// ---- eval ----

void cmd_eval(const RunConfig& c, StageLog& log) {
  require_input(c.output_dir / kScored, "eval");
  const auto probes = read_scored(c.output_dir / kScored);
  std::vector<memo::CrmSummary> summaries;
  write_crm_csvs(c, probes, &summaries);
  write_cuefree_csv(c, probes);
  log.info("eval: " + std::to_string(summaries.size()) + " group summaries over " + std::to_string(probes.size()) +
           " scored probes");
}

// ---- mia ----

void cmd_mia(const RunConfig& c, adapter::AdapterClient& client, adapter::AdapterClient* reference, StageLog& log) {
  require_input(c.output_dir / kWindows, "mia");
  if (c.wants(mia::Attack::ref) && reference == nullptr) throw ConfigError("attack 'ref' needs a reference adapter");
  std::vector<corpus::MiaWindow> windows;
  jsonl::for_each(c.output_dir / kWindows,
                  [&](const Json& j, const std::string& where) { windows.push_back(corpus::window_from_json(j, where)); });
  const std::string model = client.info().model_id;
  const corpus::TokenizeFn tokenize = [&client](const std::string& s) { return client.tokenize_text(s); };

  std::map<std::string, mia::TokenFrequencyTable> freq;
  if (c.wants(mia::Attack::dc_pdd)) {
    std::set<std::string> langs;
    for (const auto& w : windows) langs.insert(w.lang);
    for (const auto& lang : langs) {
      auto it = c.frequency_corpora.find(lang);
      if (it == c.frequency_corpora.end()) {
        throw MissingFrequencyTable("no frequency corpora configured for language '" + lang + "'");
      }
      std::vector<std::string> texts;
      for (const auto& p : it->second) {
        jsonl::for_each(p, [&](const Json& j, const std::string& where) {
          if (jsonl::get_string_or(j, "lang", lang) == lang) texts.push_back(jsonl::get_string(j, "text", where));
        });
      }
      auto table = mia::build_frequency_table(texts, tokenize, lang, client.info().tokenizer_id, c.dc_pdd_epsilon);
      table.save(c.output_dir / ("freq_" + lang + ".jsonl"));
      freq.emplace(lang, std::move(table));
    }
  }

  mia::NeighborPools pools;
  std::optional<std::map<std::string, std::vector<std::string>>> sidecar;
  std::optional<corpus::CountryCodeTable> table;
  if (c.wants(mia::Attack::ne_pii)) {
    pools = mia::NeighborPools::load(*c.email_pool, *c.name_pool);
    if (c.names_sidecar) sidecar = read_sidecar(*c.names_sidecar);
    table = corpus::CountryCodeTable::load(c.country_codes);
  }
  const bool stats = c.wants(mia::Attack::min_k_pp);
  mia::AttackParams params;
  params.k_fraction = c.k_fraction;
  params.dc_pdd_clamp = c.dc_pdd_clamp;

  std::vector<mia::MiaRecord> records(windows.size());
  parallel_for(windows.size(), c.threads, [&](size_t i) {
    const auto& w = windows[i];
    auto& r = records[i];
    r.window = w;
    r.model = model;
    const std::string key = w.doc_id + (w.member ? "/member" : "/nonmember");
    r.traces["self"] = {client.score_target("", w.text, stats)};
    if (c.wants(mia::Attack::ref)) r.traces["reference"] = {reference->score_target("", w.text, false)};
    auto score_all = [&](const std::vector<std::string>& texts) {
      std::vector<std::future<Json>> fut;
      for (const auto& t : texts) {
        fut.push_back(client.submit(adapter::RequestKind::score_target,
                                    adapter::AdapterClient::score_payload("", t, false)));
      }
      std::vector<adapter::ScoreTrace> out;
      for (auto& f : fut) out.push_back(adapter::AdapterClient::parse_score(f.get()));
      return out;
    };
    if (c.wants(mia::Attack::ne_ran)) {
      auto nb = client.infill_neighbors(w.text, item_seed(c.seed, "ne_ran/" + key), c.n_neighbors, c.mask_fraction,
                                        c.max_span);
      r.traces["ne_ran"] = score_all(nb);
      r.neighbor_texts["ne_ran"] = std::move(nb);
    }
    if (c.wants(mia::Attack::ne_pii)) {
      std::vector<std::string> names;
      if (sidecar) {
        if (auto it = sidecar->find(w.doc_id); it != sidecar->end()) names = it->second;
      } else {
        names = client.annotate_names(w.text, w.lang);
      }
      std::vector<std::string> codes;
      if (table->has(w.lang)) codes = table->codes_for(w.lang);
      auto nb = mia::nepii_substitute(w, pools, item_seed(c.seed, "ne_pii/" + key), names, codes, c.n_neighbors);
      r.nepii_substituted = nb.substituted;
      r.traces["ne_pii"] = score_all(nb.variants);
      r.neighbor_texts["ne_pii"] = std::move(nb.variants);
    }
    auto fit = freq.find(w.lang);
    r.scores = mia::score_record(r, c.attacks, params, fit == freq.end() ? nullptr : &fit->second);
  });

  jsonl::Writer out(c.output_dir / kMiaRecords);
  for (const auto& r : records) out.write(mia::to_json(r));
  out.commit();
  const auto rows = write_mia_roc(c, records);
  log.info("mia: " + std::to_string(records.size()) + " windows, " + std::to_string(rows.size()) + " ROC rows");
}

// ---- report ----

void cmd_report(const RunConfig& c, StageLog& log) {
  fs::create_directories(c.output_dir);
  size_t figures = 0;
  const fs::path scored = c.output_dir / kScored;
  if (fs::exists(scored)) {
    const auto probes = read_scored(scored);
    write_crm_csvs(c, probes, nullptr);
    write_cuefree_csv(c, probes);
    memo::SummaryOptions opts;
    opts.taus = c.taus;
    opts.bin_width = c.bin_width;

    // Per-language HR over the tau grid.
    using G = memo::GroupField;
    std::vector<report::Series> hr;
    double hr_max = 0.0;
    for (const auto& s : memo::summarize(probes, {G::model, G::lang}, opts)) {
      report::Series ser;
      ser.label = s.key[0].second + "/" + s.key[1].second;
      for (const auto& t : s.tau_rows) {
        ser.x.push_back(t.tau);
        ser.y.push_back(t.hr);
        if (t.hr) hr_max = std::max(hr_max, *t.hr);
      }
      hr.push_back(std::move(ser));
    }
    report::Axes a{"Hit rate below cue threshold", "tau", "HR(tau)", 0.0, 1.0, 0.0, hr_max > 0 ? hr_max : 1.0};
    jsonl::write_text_file(c.output_dir / "fig_hr_tau.svg", report::line_chart_svg(a, hr));

    // Mean reconstruction log-probability per cue bin, per paradigm.
    std::vector<report::Series> bins;
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (const auto& s : memo::summarize(probes, {G::model, G::paradigm}, opts)) {
      report::Series ser;
      ser.label = s.key[0].second + "/" + s.key[2].second;
      for (const auto& b : s.bins) {
        ser.x.push_back((b.lo + b.hi) / 2);
        ser.y.push_back(b.mean_recon);
        if (b.mean_recon) {
          lo = any ? std::min(lo, *b.mean_recon) : *b.mean_recon;
          hi = any ? std::max(hi, *b.mean_recon) : *b.mean_recon;
          any = true;
        }
      }
      bins.push_back(std::move(ser));
    }
    if (!any || lo == hi) {
      lo -= 1.0;
      hi += 1.0;
    }
    report::Axes b{"Reconstruction log-likelihood by cue bin", "cue", "mean log p(target)", 0.0, 1.0, lo, hi};
    jsonl::write_text_file(c.output_dir / "fig_cue_bins.svg", report::line_chart_svg(b, bins));
    figures += 2;
  } else {
    log.info("report: no scored probes, CRM figures skipped");
  }

  const fs::path mrec = c.output_dir / kMiaRecords;
  if (fs::exists(mrec)) {
    const auto records = read_mia(mrec);
    const auto rows = write_mia_roc(c, records);
    std::vector<report::BoxGroup> groups;
    for (auto a : c.attacks) {
      report::BoxGroup g{std::string(mia::to_string(a)), {}};
      for (const auto& r : rows) {
        if (r.lang != "all" && r.result.attack == g.label) g.values.push_back(r.result.auroc_norm);
      }
      groups.push_back(std::move(g));
    }
    report::Axes a{"Normalized AUROC across languages", "attack", "AUROC_norm", 0.0, 1.0, 0.5, 1.0};
    jsonl::write_text_file(c.output_dir / "fig_mia_auroc.svg", report::box_chart_svg(a, groups));
    ++figures;
  } else {
    log.info("report: no MIA records, MIA figure skipped");
  }
  log.info("report: " + std::to_string(figures) + " figures");
}

void cmd_all(const RunConfig& c, StageLog& log) {
  auto client = connect(c.adapter, c.max_in_flight, c.base_dir);
  std::unique_ptr<adapter::AdapterClient> reference;
  if (c.reference_adapter && c.wants(mia::Attack::ref)) {
    reference = connect(*c.reference_adapter, c.max_in_flight, c.base_dir);
  }
  cmd_extract(c, *client, log);
  cmd_probe(c, log);
  cmd_score(c, *client, log);
  cmd_eval(c, log);
  cmd_mia(c, *client, reference.get(), log);
  cmd_report(c, log);
}

}  // namespace crm::pipeline
