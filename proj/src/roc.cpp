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

#include "crm/roc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "crm/error.hpp"

namespace crm::roc {
namespace {

struct Labeled {
  double score;
  bool positive;
};

std::vector<Labeled> pooled(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw EmptyClass("ROC analysis needs both classes (got " + std::to_string(positives.size()) + " positive, " +
                     std::to_string(negatives.size()) + " negative)");
  }
  std::vector<Labeled> all;
  all.reserve(positives.size() + negatives.size());
  for (double s : positives) all.push_back({s, true});
  for (double s : negatives) all.push_back({s, false});
  for (const auto& l : all) {
    if (std::isnan(l.score)) throw DataError("NaN score in ROC input");
  }
  return all;
}

}  // namespace

double auroc(std::span<const double> positives, std::span<const double> negatives) {
  std::vector<Labeled> all = pooled(positives, negatives);
  std::sort(all.begin(), all.end(), [](const Labeled& a, const Labeled& b) { return a.score < b.score; });
  // Doubled midrank of a tie block [i, j) with 1-based ranks i+1..j is i+j+1.
  std::int64_t doubled_rank_sum = 0;
  size_t i = 0;
  while (i < all.size()) {
    size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    std::int64_t doubled = static_cast<std::int64_t>(i + j + 1);
    for (size_t k = i; k < j; ++k) {
      if (all[k].positive) doubled_rank_sum += doubled;
    }
    i = j;
  }
  const auto n1 = static_cast<std::int64_t>(positives.size());
  const auto n0 = static_cast<std::int64_t>(negatives.size());
  std::int64_t doubled_u = doubled_rank_sum - n1 * (n1 + 1);
  return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(n1) * static_cast<double>(n0));
}

std::vector<RocPoint> roc_curve(std::span<const double> positives, std::span<const double> negatives) {
  std::vector<Labeled> all = pooled(positives, negatives);
  std::sort(all.begin(), all.end(), [](const Labeled& a, const Labeled& b) { return a.score > b.score; });
  const double np = static_cast<double>(positives.size());
  const double nn = static_cast<double>(negatives.size());
  std::vector<RocPoint> pts;
  pts.push_back({INFINITY, 0.0, 0.0});
  size_t tp = 0;
  size_t fp = 0;
  size_t i = 0;
  while (i < all.size()) {
    size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) {
      (all[j].positive ? tp : fp) += 1;
      ++j;
    }
    pts.push_back({all[i].score, static_cast<double>(fp) / nn, static_cast<double>(tp) / np});
    i = j;
  }
  return pts;
}

double tpr_at_fpr(std::span<const double> positives, std::span<const double> negatives, double fpr) {
  std::vector<Labeled> all = pooled(positives, negatives);
  std::sort(all.begin(), all.end(), [](const Labeled& a, const Labeled& b) { return a.score > b.score; });
  const double allowed = fpr * static_cast<double>(negatives.size());
  size_t tp = 0;
  size_t fp = 0;
  size_t best_tp = 0;
  size_t i = 0;
  while (i < all.size()) {
    size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) {
      (all[j].positive ? tp : fp) += 1;
      ++j;
    }
    if (static_cast<double>(fp) > allowed) break;
    best_tp = tp;
    i = j;
  }
  return static_cast<double>(best_tp) / static_cast<double>(positives.size());
}

RocResult evaluate(std::string attack, std::span<const double> members, std::span<const double> nonmembers,
                   std::span<const double> fprs) {
  RocResult r;
  r.attack = std::move(attack);
  r.auroc = auroc(members, nonmembers);
  r.auroc_norm = std::max(r.auroc, 1.0 - r.auroc);
  r.n_members = members.size();
  r.n_nonmembers = nonmembers.size();
  for (double f : fprs) r.tpr_at.emplace_back(f, tpr_at_fpr(members, nonmembers, f));
  return r;
}

}  // namespace crm::roc
