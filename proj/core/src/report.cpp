// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace nerfcc {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report file: " + path);
  return out;
}

}  // namespace

std::string format_report_text(const std::vector<MetricReport>& rows) {
  size_t method_width = 6;  // "Method"
  for (const MetricReport& r : rows) method_width = std::max(method_width, r.method.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s  %12s  %12s  %10s\n", static_cast<int>(method_width),
                "Method", "CD", "GL", "T(s)");
  out << buf;
  for (const MetricReport& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s  %12.6g  %12.6g  %10.3f\n",
                  static_cast<int>(method_width), r.method.c_str(), r.cd, r.gl, r.wall_seconds);
    out << buf;
  }
  return out.str();
}

void write_report_text(const std::vector<MetricReport>& rows, const std::string& path) {
  std::ofstream out = open_out(path);
  out << format_report_text(rows);
  if (!out) throw DataError("write failure on report: " + path);
}

void write_report_csv(const std::vector<MetricReport>& rows, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "Method,CD,GL,T(s)\n";
  char buf[256];
  for (const MetricReport& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.6f\n", r.method.c_str(), r.cd, r.gl,
                  r.wall_seconds);
    out << buf;
  }
  if (!out) throw DataError("write failure on report: " + path);
}

void write_pairs_csv(const std::vector<MetricReport>& rows, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "Method,i,j,weight,delta_h,contribution\n";
  char buf[256];
  for (const MetricReport& r : rows)
    for (const PairContribution& p : r.pairs) {
      std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.17g,%.17g,%.17g\n", r.method.c_str(), p.i, p.j,
                    p.weight, p.delta_h, p.contribution);
      out << buf;
    }
  if (!out) throw DataError("write failure on pair report: " + path);
}

}  // namespace nerfcc
