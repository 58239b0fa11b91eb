#pragma once

// Global feature vectors x for the ordinal decoder.
//
// The encoder is a small two-layer perceptron (in -> hidden -> out, tanh on the
// hidden layer) standing in for an image backbone. With `EncoderKind::Identity`
// rows of a precomputed feature file are used as x directly.

#include <filesystem>
#include <string>
#include <vector>

#include "aord/nn.hpp"

namespace aord {

// Column i of `inputs` carries example i; labels[i] is its class.
struct Dataset {
  int num_classes = 2;
  Matrix inputs;
  std::vector<int> labels;

  Eigen::Index dim() const { return inputs.rows(); }
  std::size_t size() const { return labels.size(); }
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

enum class EncoderKind { Mlp, Identity };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::Mlp;
  int input_dim = 1;
  int hidden_dim = 64;
  int output_dim = 64;
  bool trainable = true;
};

struct EncoderCache {
  Matrix input;
  Matrix pre_activation;
  Matrix hidden;
};

class Encoder {
 public:
  Encoder() = default;
  explicit Encoder(const EncoderConfig& cfg);

  const EncoderConfig& config() const { return cfg_; }
  int output_dim() const;

  void init(Rng& rng);
  Matrix encode(const Matrix& raw) const;
  Matrix forward(const Matrix& raw, EncoderCache& cache) const;
  // No-op for frozen or identity encoders.
  void backward(const EncoderCache& cache, const Matrix& dfeatures);

  // Trainable parameters only; empty when frozen.
  void collect(ParamRefs& out);
  // Every parameter, for checkpoints.
  void collect_all(ParamRefs& out);

  Linear& layer1() { return l1_; }
  Linear& layer2() { return l2_; }

 private:
  void check_input(const Matrix& raw) const;

  EncoderConfig cfg_;
  Linear l1_;
  Linear l2_;
};

// Feature file:
//   D=<int> K=<int>
//   <label>,<v1>,...,<vD>
// Lines starting with '#' and blank lines are skipped.
Dataset load_feature_file(const std::filesystem::path& path);
Dataset parse_feature_text(const std::string& text, const std::string& source = "<memory>");
void write_feature_file(const std::filesystem::path& path, const Dataset& data,
                        const std::string& comment = {});
std::string format_feature_text(const Dataset& data, const std::string& comment = {});

// 17 significant digits, so the text parses back to exactly `v`.
std::string format_double(double v);

}  // namespace aord
