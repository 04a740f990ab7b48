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

#include "crm/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace crm::report {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_escape(fields[i]);
  }
  out += '\n';
  return out;
}

std::string fmt(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 60, kRight = 160, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Frame {
  Axes a;
  double px(double x) const {
    const double span = a.x_max - a.x_min;
    return kLeft + (span > 0 ? (x - a.x_min) / span : 0.5) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    const double span = a.y_max - a.y_min;
    return kHeight - kBottom - (span > 0 ? (y - a.y_min) / span : 0.5) * (kHeight - kTop - kBottom);
  }
};

void open_svg(std::ostringstream& o, const Frame& f) {
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << xml_escape(f.a.title) << "</text>\n";
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  o << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.a.y_min + (f.a.y_max - f.a.y_min) * i / 4.0;
    o << "<text x=\"" << x0 - 6 << "\" y=\"" << num(f.py(yv) + 4)
      << "\" text-anchor=\"end\" font-size=\"11\">" << num(yv) << "</text>\n";
  }
  o << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12
    << "\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(f.a.x_label) << "</text>\n"
    << "<text x=\"16\" y=\"" << (y0 + y1) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
    << (y0 + y1) / 2 << ")\">" << xml_escape(f.a.y_label) << "</text>\n";
}

void legend(std::ostringstream& o, size_t i, const std::string& label) {
  const double y = kTop + 16.0 * static_cast<double>(i);
  const double x = kWidth - kRight + 12;
  o << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[i % 10]
    << "\"/>\n<text x=\"" << x + 14 << "\" y=\"" << y + 9 << "\" font-size=\"11\">" << xml_escape(label)
    << "</text>\n";
}

}  // namespace

std::string line_chart_svg(const Axes& axes, const std::vector<Series>& series) {
  Frame f{axes};
  std::ostringstream o;
  open_svg(o, f);
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % 10];
    std::string path;
    bool pen_down = false;
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!s.y[i]) {
        pen_down = false;
        continue;
      }
      path += pen_down ? " L " : (path.empty() ? "M " : " M ");
      path += num(f.px(s.x[i])) + ' ' + num(f.py(*s.y[i]));
      pen_down = true;
      o << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\"" << num(f.py(*s.y[i])) << "\" r=\"3\" fill=\""
        << color << "\"/>\n";
    }
    if (!path.empty()) {
      o << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    }
    legend(o, si, s.label);
  }
  o << "</svg>\n";
  return o.str();
}

std::string box_chart_svg(const Axes& axes, const std::vector<BoxGroup>& groups) {
  Axes a = axes;
  a.x_min = 0;
  a.x_max = static_cast<double>(std::max<size_t>(groups.size(), 1));
  Frame f{a};
  std::ostringstream o;
  open_svg(o, f);
  auto quantile = [](const std::vector<double>& v, double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
  };
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    std::vector<double> v = groups[gi].values;
    const double cx = f.px(static_cast<double>(gi) + 0.5);
    o << "<text x=\"" << num(cx) << "\" y=\"" << kHeight - kBottom + 16
      << "\" text-anchor=\"middle\" font-size=\"11\">" << xml_escape(groups[gi].label) << "</text>\n";
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    const double q1 = quantile(v, 0.25), med = quantile(v, 0.5), q3 = quantile(v, 0.75);
    const double hw = 0.3 * (f.px(1) - f.px(0));
    const char* color = kPalette[gi % 10];
    o << "<line x1=\"" << num(cx) << "\" y1=\"" << num(f.py(v.front())) << "\" x2=\"" << num(cx) << "\" y2=\""
      << num(f.py(v.back())) << "\" stroke=\"black\"/>\n"
      << "<rect x=\"" << num(cx - hw) << "\" y=\"" << num(f.py(q3)) << "\" width=\"" << num(2 * hw)
      << "\" height=\"" << num(std::max(f.py(q1) - f.py(q3), 1.0)) << "\" fill=\"" << color
      << "\" fill-opacity=\"0.6\" stroke=\"black\"/>\n"
      << "<line x1=\"" << num(cx - hw) << "\" y1=\"" << num(f.py(med)) << "\" x2=\"" << num(cx + hw)
      << "\" y2=\"" << num(f.py(med)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace crm::report
