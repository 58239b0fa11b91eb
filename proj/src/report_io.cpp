#include "aord/report_io.hpp"

#include <cstdio>
#include <sstream>

#include "aord/errors.hpp"

namespace aord {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

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

}  // namespace

std::string metrics_kv(const MetricsReport& r, const std::string& head) {
  std::ostringstream out;
  out << "head=" << head << '\n'
      << "num_classes=" << r.num_classes << '\n'
      << "total=" << r.total << '\n'
      << "classes_present=" << r.classes_present << '\n'
      << "accuracy=" << fixed(r.accuracy) << '\n'
      << "macro_f1=" << fixed(r.macro_f1) << '\n'
      << "sensitivity=" << fixed(r.sensitivity) << '\n'
      << "specificity=" << fixed(r.specificity) << '\n'
      << "invalid_sequence_rate=" << fixed(r.invalid_sequence_rate) << '\n';
  for (int c = 0; c < r.num_classes; ++c) {
    const auto& m = r.per_class[static_cast<std::size_t>(c)];
    const std::string p = "class" + std::to_string(c) + ".";
    out << p << "support=" << m.support << '\n'
        << p << "precision=" << fixed(m.precision) << '\n'
        << p << "recall=" << fixed(m.recall) << '\n'
        << p << "specificity=" << fixed(m.specificity) << '\n'
        << p << "f1=" << fixed(m.f1) << '\n'
        << p << "correct_pct=" << fixed(m.correct_pct, 4) << '\n'
        << p << "adjacent_pct=" << fixed(m.adjacent_pct, 4) << '\n'
        << p << "other_pct=" << fixed(m.other_pct, 4) << '\n';
  }
  return out.str();
}

json metrics_json(const MetricsReport& r, const std::string& head) {
  json classes = json::array();
  for (int c = 0; c < r.num_classes; ++c) {
    const auto& m = r.per_class[static_cast<std::size_t>(c)];
    classes.push_back({{"class", c},
                       {"present", m.present},
                       {"support", m.support},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"specificity", m.specificity},
                       {"f1", m.f1},
                       {"correct_pct", m.correct_pct},
                       {"adjacent_pct", m.adjacent_pct},
                       {"other_pct", m.other_pct}});
  }
  json matrix = json::array();
  for (int t = 0; t < r.num_classes; ++t) {
    json row = json::array();
    for (int p = 0; p < r.num_classes; ++p) row.push_back(r.matrix.at(t, p));
    matrix.push_back(row);
  }
  return {{"head", head},
          {"num_classes", r.num_classes},
          {"total", r.total},
          {"classes_present", r.classes_present},
          {"accuracy", r.accuracy},
          {"macro_f1", r.macro_f1},
          {"sensitivity", r.sensitivity},
          {"specificity", r.specificity},
          {"invalid_sequence_rate", r.invalid_sequence_rate},
          {"per_class", classes},
          {"confusion_matrix", matrix},
          {"conventions",
           "macro averages over classes present in the truth; precision 0 when a class is never predicted; "
           "sensitivity and specificity are one-vs-rest"}};
}

std::string breakdown_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "class,support,correct_pct,adjacent_pct,other_pct\n";
  for (int c = 0; c < r.num_classes; ++c) {
    const auto& m = r.per_class[static_cast<std::size_t>(c)];
    out << c << ',' << m.support << ',' << fixed(m.correct_pct, 4) << ',' << fixed(m.adjacent_pct, 4) << ','
        << fixed(m.other_pct, 4) << '\n';
  }
  return out.str();
}

std::string breakdown_svg(const MetricsReport& r, const std::string& title) {
  constexpr int kBar = 48;
  constexpr int kGap = 24;
  constexpr int kLeft = 56;
  constexpr int kTop = 40;
  constexpr int kPlot = 240;
  const int width = kLeft + r.num_classes * (kBar + kGap) + 140;
  const int height = kTop + kPlot + 56;
  struct Part {
    const char* label;
    const char* color;
  };
  constexpr Part parts[] = {{"correct", "#4c9a2a"}, {"adjacent", "#f2b134"}, {"other", "#c0392b"}};

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kLeft << "\" y=\"22\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  for (int pct = 0; pct <= 100; pct += 25) {
    const int y = kTop + kPlot - pct * kPlot / 100;
    out << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << y << "\" x2=\"" << width - 140 << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << pct << "%</text>\n";
  }
  for (int c = 0; c < r.num_classes; ++c) {
    const auto& m = r.per_class[static_cast<std::size_t>(c)];
    const int x = kLeft + kGap / 2 + c * (kBar + kGap);
    const double values[] = {m.correct_pct, m.adjacent_pct, m.other_pct};
    double base = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double top = base + values[i];
      const double y0 = kTop + kPlot - top * kPlot / 100.0;
      const double h = values[i] * kPlot / 100.0;
      out << "<rect x=\"" << x << "\" y=\"" << fixed(y0, 2) << "\" width=\"" << kBar << "\" height=\"" << fixed(h, 2)
          << "\" fill=\"" << parts[i].color << "\"><title>class " << c << ' ' << parts[i].label << ' '
          << fixed(values[i], 2) << "%</title></rect>\n";
      base = top;
    }
    out << "<text x=\"" << x + kBar / 2 << "\" y=\"" << kTop + kPlot + 18 << "\" text-anchor=\"middle\">" << c
        << "</text>\n";
    out << "<text x=\"" << x + kBar / 2 << "\" y=\"" << kTop + kPlot + 34
        << "\" text-anchor=\"middle\" fill=\"#666\">n=" << m.support << "</text>\n";
  }
  for (int i = 0; i < 3; ++i) {
    const int y = kTop + 10 + i * 20;
    out << "<rect x=\"" << width - 124 << "\" y=\"" << y - 10 << "\" width=\"12\" height=\"12\" fill=\""
        << parts[i].color << "\"/>\n";
    out << "<text x=\"" << width - 106 << "\" y=\"" << y << "\">" << parts[i].label << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string metrics_table(const MetricsReport& r, const std::string& head) {
  std::ostringstream out;
  char line[160];
  out << "head " << head << ", " << r.total << " examples, " << r.classes_present << "/" << r.num_classes
      << " classes present\n";
  std::snprintf(line, sizeof line, "ACC %.4f  macro-F1 %.4f  Sen %.4f  Spec %.4f  invalid %.4f\n", r.accuracy,
                r.macro_f1, r.sensitivity, r.specificity, r.invalid_sequence_rate);
  out << line;
  std::snprintf(line, sizeof line, "%5s %8s %9s %7s %7s %7s %9s %9s %7s\n", "class", "support", "precision", "recall",
                "spec", "f1", "correct%", "adjacent%", "other%");
  out << line;
  for (int c = 0; c < r.num_classes; ++c) {
    const auto& m = r.per_class[static_cast<std::size_t>(c)];
    std::snprintf(line, sizeof line, "%5d %8lld %9.4f %7.4f %7.4f %7.4f %9.2f %9.2f %7.2f\n", c,
                  static_cast<long long>(m.support), m.precision, m.recall, m.specificity, m.f1, m.correct_pct,
                  m.adjacent_pct, m.other_pct);
    out << line;
  }
  out << "confusion (rows truth, columns predicted)\n";
  for (int t = 0; t < r.num_classes; ++t) {
    for (int p = 0; p < r.num_classes; ++p) {
      std::snprintf(line, sizeof line, "%7lld", static_cast<long long>(r.matrix.at(t, p)));
      out << line;
    }
    out << '\n';
  }
  return out.str();
}

ComparisonRow comparison_row(const json& metrics, const std::string& name) {
  try {
    ComparisonRow row;
    row.name = name.empty() ? metrics.at("head").get<std::string>() : name;
    row.accuracy = metrics.at("accuracy").get<double>();
    row.macro_f1 = metrics.at("macro_f1").get<double>();
    row.sensitivity = metrics.at("sensitivity").get<double>();
    row.specificity = metrics.at("specificity").get<double>();
    row.invalid_sequence_rate = metrics.at("invalid_sequence_rate").get<double>();
    return row;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("metrics document: ") + e.what());
  }
}

std::string comparison_markdown(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "| head | ACC | macro-F1 | Sen | Spec | invalid |\n"
      << "|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out << "| " << r.name << " | " << fixed(r.accuracy, 4) << " | " << fixed(r.macro_f1, 4) << " | "
        << fixed(r.sensitivity, 4) << " | " << fixed(r.specificity, 4) << " | " << fixed(r.invalid_sequence_rate, 4)
        << " |\n";
  }
  return out.str();
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "head,accuracy,macro_f1,sensitivity,specificity,invalid_sequence_rate\n";
  for (const auto& r : rows) {
    out << r.name << ',' << fixed(r.accuracy) << ',' << fixed(r.macro_f1) << ',' << fixed(r.sensitivity) << ','
        << fixed(r.specificity) << ',' << fixed(r.invalid_sequence_rate) << '\n';
  }
  return out.str();
}

}  // namespace aord
