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
#include <vector>

// CSV and minimal SVG emission.
namespace crm::report {

std::string csv_escape(const std::string& field);
std::string csv_row(const std::vector<std::string>& fields);
// Shortest round-trip decimal; "" for nullopt.
std::string fmt(double v);
std::string fmt(const std::optional<double>& v);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<std::optional<double>> y;  // gaps for nullopt
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
};

std::string line_chart_svg(const Axes& axes, const std::vector<Series>& series);

struct BoxGroup {
  std::string label;
  std::vector<double> values;
};
std::string box_chart_svg(const Axes& axes, const std::vector<BoxGroup>& groups);

}  // namespace crm::report
