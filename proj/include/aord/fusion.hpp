#pragma once

// Conditioning of each autoregressive step on the image feature and the
// prediction history.
//
// History: every consumed token (BOS, then earlier bits) is embedded and its
// learnable position embedding added, giving one W-vector per slot. The image
// feature is projected to width W by `fc`, then
//
//   affine:           C = fc(x) * mean_i(h_i) + fc(x)
//   cross-attention:  C = sum_i softmax_i(<Wq fc(x), Wk h_i> / sqrt(W)) Wv h_i
//                         (+ fc(x) when attention_residual is set)
//
// Without the residual, x only moves the attention weights, so the step-1
// condition (history = BOS alone) cannot depend on x at all.
//
// All batch items passed together must share one prefix length.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aord/nn.hpp"
#include "aord/ordinal_codec.hpp"

namespace aord {

enum class FusionMode { Affine, CrossAttention };

std::string to_string(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& s);

struct FusionConfig {
  int feature_dim = 64;
  int width = 64;
  int num_classes = 5;
  FusionMode mode = FusionMode::CrossAttention;
  bool attention_residual = true;
};

// seq[i] is the W x B block of slot i across the batch.
struct HistoryEmbedding {
  std::vector<Matrix> seq;
  std::size_t length() const { return seq.size(); }
};

struct FusionCache {
  Matrix x;
  Matrix projected;  // fc(x)
  std::vector<std::vector<Token>> tokens;  // tokens[i][b]
  HistoryEmbedding history;
  // affine
  Matrix pooled;
  // cross-attention
  Matrix query;
  std::vector<Matrix> keys;
  std::vector<Matrix> values;
  Matrix weights;  // L x B, columns sum to one
};

// Called with every batch of prefixes and the resulting conditions.
using FusionObserver = std::function<void(std::span<const TokenSequence> prefixes, const Matrix& conditions)>;

class Fusion {
 public:
  Fusion() = default;
  explicit Fusion(const FusionConfig& cfg);

  const FusionConfig& config() const { return cfg_; }
  int width() const { return cfg_.width; }

  void init(Rng& rng);

  HistoryEmbedding embed_history(std::span<const TokenSequence> prefixes) const;

  Matrix affine_fuse(const Matrix& x, const HistoryEmbedding& hist) const;
  Matrix cross_attention_fuse(const Matrix& x, const HistoryEmbedding& hist, Matrix* weights = nullptr) const;

  // Embeds the prefixes and fuses with x according to the configured mode.
  Matrix forward(const Matrix& x, std::span<const TokenSequence> prefixes, FusionCache& cache) const;
  Matrix condition(const Matrix& x, std::span<const TokenSequence> prefixes) const;
  // Accumulates parameter gradients; returns d(loss)/dx.
  Matrix backward(const FusionCache& cache, const Matrix& dconditions);

  void collect(ParamRefs& out);

  Param& token_embedding() { return token_embedding_; }
  Param& position_embedding() { return position_embedding_; }
  Linear& projection() { return fc_; }
  Param& query_weight() { return wq_; }
  Param& key_weight() { return wk_; }
  Param& value_weight() { return wv_; }

  void set_observer(FusionObserver observer) { observer_ = std::move(observer); }

 private:
  std::vector<std::vector<Token>> check_prefixes(std::span<const TokenSequence> prefixes) const;
  HistoryEmbedding embed(const std::vector<std::vector<Token>>& tokens) const;
  Matrix attend(const Matrix& projected, const HistoryEmbedding& hist, FusionCache& cache) const;

  FusionConfig cfg_;
  Param token_embedding_;     // W x 3: columns for tokens 0, 1, BOS
  Param position_embedding_;  // W x K
  Linear fc_;
  Param wq_;
  Param wk_;
  Param wv_;
  FusionObserver observer_;
};

}  // namespace aord
