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

#include <span>
#include <string>
#include <utility>
#include <vector>

// Rank statistics for two-class score separation. Scores are oriented so
// that larger means "positive" (member, or hit).
namespace crm::roc {

// Mann-Whitney AUROC with midranks for ties, i.e.
// (#(p > n) + 0.5 #(p == n)) / (|P| |N|). Computed from doubled integer
// ranks, so the value is exact up to the final division. Throws EmptyClass
// if either side is empty and DataError on NaN.
double auroc(std::span<const double> positives, std::span<const double> negatives);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

// Empirical ROC, one point per distinct threshold (predict positive when
// score >= threshold), from (0,0) to (1,1).
std::vector<RocPoint> roc_curve(std::span<const double> positives, std::span<const double> negatives);

// Largest TPR over thresholds whose empirical FPR does not exceed `fpr`.
// Step function, no interpolation.
double tpr_at_fpr(std::span<const double> positives, std::span<const double> negatives, double fpr);

struct RocResult {
  std::string attack;
  double auroc = 0.5;
  double auroc_norm = 0.5;  // max(auroc, 1 - auroc)
  std::vector<std::pair<double, double>> tpr_at;  // (fpr, tpr)
  size_t n_members = 0;
  size_t n_nonmembers = 0;
};

RocResult evaluate(std::string attack, std::span<const double> members, std::span<const double> nonmembers,
                   std::span<const double> fprs);

}  // namespace crm::roc
