// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/metrics.hpp"

#include <string>
#include <vector>

namespace nerfcc {

/// Aligned plain-text table with columns Method, CD, GL, T(s).
std::string format_report_text(const std::vector<MetricReport>& rows);
void write_report_text(const std::vector<MetricReport>& rows, const std::string& path);

/// CSV with header exactly "Method,CD,GL,T(s)"; CD/GL carry full precision.
void write_report_csv(const std::vector<MetricReport>& rows, const std::string& path);

/// Per-pair CD breakdown: "Method,i,j,weight,delta_h,contribution".
void write_pairs_csv(const std::vector<MetricReport>& rows, const std::string& path);

}  // namespace nerfcc
