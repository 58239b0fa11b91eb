#pragma once

// Serializations of a MetricsReport. Outputs carry no timestamps, so equal
// reports give byte-identical files.

#include <string>
#include <vector>

#include <json.hpp>

#include "aord/metrics.hpp"

namespace aord {

// key=value lines, one aggregate or per-class value each.
std::string metrics_kv(const MetricsReport& r, const std::string& head);
nlohmann::json metrics_json(const MetricsReport& r, const std::string& head);
// class,support,correct_pct,adjacent_pct,other_pct
std::string breakdown_csv(const MetricsReport& r);
// Stacked correct/adjacent/other bars per class; self-contained SVG.
std::string breakdown_svg(const MetricsReport& r, const std::string& title);
std::string metrics_table(const MetricsReport& r, const std::string& head);

struct ComparisonRow {
  std::string name;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double invalid_sequence_rate = 0.0;
};

// Reads the aggregate fields of a document produced by metrics_json.
ComparisonRow comparison_row(const nlohmann::json& metrics, const std::string& name);
std::string comparison_markdown(const std::vector<ComparisonRow>& rows);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);

}  // namespace aord
