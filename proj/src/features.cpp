#include "aord/features.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

#include "aord/errors.hpp"

namespace aord {

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.num_classes = num_classes;
  out.inputs.resize(inputs.rows(), static_cast<Eigen::Index>(rows.size()));
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.col(static_cast<Eigen::Index>(i)) = inputs.col(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

Encoder::Encoder(const EncoderConfig& cfg) : cfg_(cfg) {
  if (cfg.input_dim < 1) throw ConfigError("encoder input_dim must be >= 1");
  if (cfg.kind == EncoderKind::Mlp) {
    if (cfg.hidden_dim < 1 || cfg.output_dim < 1) {
      throw ConfigError("encoder hidden_dim and output_dim must be >= 1");
    }
    l1_ = Linear("encoder.fc1", cfg.input_dim, cfg.hidden_dim);
    l2_ = Linear("encoder.fc2", cfg.hidden_dim, cfg.output_dim);
  } else {
    cfg_.output_dim = cfg.input_dim;
    cfg_.trainable = false;
  }
}

int Encoder::output_dim() const { return cfg_.output_dim; }

void Encoder::init(Rng& rng) {
  if (cfg_.kind != EncoderKind::Mlp) return;
  l1_.init(rng);
  l2_.init(rng);
}

void Encoder::check_input(const Matrix& raw) const {
  if (raw.rows() != cfg_.input_dim) {
    throw ConfigError("encoder expects input dimension " + std::to_string(cfg_.input_dim) +
                      ", got " + std::to_string(raw.rows()));
  }
}

Matrix Encoder::encode(const Matrix& raw) const {
  EncoderCache cache;
  return forward(raw, cache);
}

Matrix Encoder::forward(const Matrix& raw, EncoderCache& cache) const {
  check_input(raw);
  if (cfg_.kind == EncoderKind::Identity) return raw;
  cache.input = raw;
  cache.pre_activation = l1_.forward(raw);
  cache.hidden = cache.pre_activation.array().tanh().matrix();
  return l2_.forward(cache.hidden);
}

void Encoder::backward(const EncoderCache& cache, const Matrix& dfeatures) {
  if (cfg_.kind == EncoderKind::Identity || !cfg_.trainable) return;
  Matrix dhidden = l2_.backward(cache.hidden, dfeatures);
  Matrix dpre = (dhidden.array() * (1.0 - cache.hidden.array().square())).matrix();
  l1_.backward_params(cache.input, dpre);
}

void Encoder::collect(ParamRefs& out) {
  if (cfg_.trainable) collect_all(out);
}

void Encoder::collect_all(ParamRefs& out) {
  if (cfg_.kind != EncoderKind::Mlp) return;
  l1_.collect(out);
  l2_.collect(out);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && !s.empty();
}

bool parse_header_field(std::string_view token, std::string_view key, int& out) {
  if (token.size() <= key.size() + 1 || token.substr(0, key.size()) != key ||
      token[key.size()] != '=') {
    return false;
  }
  return parse_number(token.substr(key.size() + 1), out);
}

}  // namespace

Dataset parse_feature_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string raw_line;
  std::size_t line_no = 0;
  bool have_header = false;
  int dim = 0;
  Dataset data;
  std::vector<double> values;

  while (std::getline(in, raw_line)) {
    ++line_no;
    const auto line = trim(raw_line);
    if (line.empty() || line.front() == '#') continue;

    if (!have_header) {
      std::istringstream hs{std::string(line)};
      std::string a, b, extra;
      hs >> a >> b;
      if (!(hs >> extra).fail() || !parse_header_field(a, "D", dim) ||
          !parse_header_field(b, "K", data.num_classes)) {
        throw IngestionError(source, line_no, "malformed header, expected 'D=<int> K=<int>'");
      }
      if (dim < 1) throw IngestionError(source, line_no, "header D must be >= 1");
      if (data.num_classes < 2) throw IngestionError(source, line_no, "header K must be >= 2");
      have_header = true;
      continue;
    }

    std::size_t fields = 0;
    int label = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const auto field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
      if (fields == 0) {
        if (!parse_number(field, label)) throw IngestionError(source, line_no, "label is not an integer");
        if (label < 0 || label >= data.num_classes) {
          throw IngestionError(source, line_no, "label " + std::to_string(label) + " outside [0, " +
                                                    std::to_string(data.num_classes - 1) + "]");
        }
      } else {
        double v = 0.0;
        if (!parse_number(field, v)) {
          throw IngestionError(source, line_no, "value " + std::to_string(fields) + " is not a number");
        }
        if (!std::isfinite(v)) {
          throw IngestionError(source, line_no, "value " + std::to_string(fields) + " is not finite");
        }
        values.push_back(v);
      }
      ++fields;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields != static_cast<std::size_t>(dim) + 1) {
      throw IngestionError(source, line_no, "expected " + std::to_string(dim) + " values, found " +
                                                std::to_string(fields - 1));
    }
    data.labels.push_back(label);
  }
  if (!have_header) throw IngestionError(source, line_no, "missing 'D=<int> K=<int>' header");

  data.inputs = Eigen::Map<Matrix>(values.data(), dim, static_cast<Eigen::Index>(data.labels.size()));
  return data;
}

Dataset load_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_feature_text(ss.str(), path.string());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_feature_text(const Dataset& data, const std::string& comment) {
  std::string out;
  if (!comment.empty()) out += "# " + comment + "\n";
  out += "D=" + std::to_string(data.dim()) + " K=" + std::to_string(data.num_classes) + "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += std::to_string(data.labels[i]);
    for (Eigen::Index r = 0; r < data.dim(); ++r) {
      out += ',';
      out += format_double(data.inputs(r, static_cast<Eigen::Index>(i)));
    }
    out += '\n';
  }
  return out;
}

void write_feature_file(const std::filesystem::path& path, const Dataset& data, const std::string& comment) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format_feature_text(data, comment);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace aord
