#include "aord/fusion.hpp"

#include <cmath>

#include "aord/errors.hpp"

namespace aord {

std::string to_string(FusionMode mode) {
  return mode == FusionMode::Affine ? "affine" : "cross_attention";
}

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "affine") return FusionMode::Affine;
  if (s == "cross_attention" || s == "cross-attention") return FusionMode::CrossAttention;
  throw ConfigError("fusion: expected 'affine' or 'cross_attention', got '" + s + "'");
}

Fusion::Fusion(const FusionConfig& cfg)
    : cfg_(cfg),
      token_embedding_("fusion.token_embedding", cfg.width, 3),
      position_embedding_("fusion.position_embedding", cfg.width, cfg.num_classes),
      fc_("fusion.fc", cfg.feature_dim, cfg.width),
      wq_("fusion.w_q", cfg.width, cfg.width),
      wk_("fusion.w_k", cfg.width, cfg.width),
      wv_("fusion.w_v", cfg.width, cfg.width) {
  if (cfg.width < 1 || cfg.feature_dim < 1) throw ConfigError("fusion width and feature_dim must be >= 1");
  if (cfg.num_classes < 2) throw ConfigError("fusion num_classes must be >= 2");
}

void Fusion::init(Rng& rng) {
  init_normal(token_embedding_, 1.0, rng);
  init_normal(position_embedding_, 1.0, rng);
  fc_.init(rng);
  init_fan_in(wq_, cfg_.width, rng);
  init_fan_in(wk_, cfg_.width, rng);
  init_fan_in(wv_, cfg_.width, rng);
}

void Fusion::collect(ParamRefs& out) {
  out.push_back(&token_embedding_);
  out.push_back(&position_embedding_);
  fc_.collect(out);
  if (cfg_.mode == FusionMode::CrossAttention) {
    out.push_back(&wq_);
    out.push_back(&wk_);
    out.push_back(&wv_);
  }
}

std::vector<std::vector<Token>> Fusion::check_prefixes(std::span<const TokenSequence> prefixes) const {
  if (prefixes.empty()) throw std::invalid_argument("fusion: empty batch");
  const std::size_t len = prefixes.front().size();
  if (len == 0) throw std::invalid_argument("fusion: empty history");
  if (len > static_cast<std::size_t>(cfg_.num_classes)) {
    throw std::invalid_argument("fusion: prefix longer than K");
  }
  std::vector<std::vector<Token>> tokens(len, std::vector<Token>(prefixes.size()));
  for (std::size_t b = 0; b < prefixes.size(); ++b) {
    const auto& p = prefixes[b];
    if (p.size() != len) throw std::invalid_argument("fusion: prefixes in a batch must share one length");
    if (p.front() != Token::Bos) throw std::invalid_argument("fusion: prefix must start with BOS");
    for (std::size_t i = 0; i < len; ++i) {
      if (p[i] == Token::Eos) throw std::invalid_argument("fusion: EOS is not a valid history token");
      if (i > 0 && p[i] == Token::Bos) throw std::invalid_argument("fusion: BOS only allowed at position 0");
      tokens[i][b] = p[i];
    }
  }
  return tokens;
}

HistoryEmbedding Fusion::embed(const std::vector<std::vector<Token>>& tokens) const {
  HistoryEmbedding hist;
  hist.seq.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    Matrix slot(cfg_.width, static_cast<Eigen::Index>(tokens[i].size()));
    for (std::size_t b = 0; b < tokens[i].size(); ++b) {
      slot.col(static_cast<Eigen::Index>(b)) =
          token_embedding_.value.col(static_cast<int>(tokens[i][b])) +
          position_embedding_.value.col(static_cast<Eigen::Index>(i));
    }
    hist.seq.push_back(std::move(slot));
  }
  return hist;
}

HistoryEmbedding Fusion::embed_history(std::span<const TokenSequence> prefixes) const {
  return embed(check_prefixes(prefixes));
}

Matrix Fusion::affine_fuse(const Matrix& x, const HistoryEmbedding& hist) const {
  if (hist.seq.empty()) throw std::invalid_argument("affine_fuse: empty history");
  const Matrix f = fc_.forward(x);
  Matrix pooled = Matrix::Zero(f.rows(), f.cols());
  for (const auto& h : hist.seq) pooled += h;
  pooled /= static_cast<double>(hist.seq.size());
  return (f.array() * pooled.array() + f.array()).matrix();
}

Matrix Fusion::attend(const Matrix& projected, const HistoryEmbedding& hist, FusionCache& cache) const {
  const auto len = static_cast<Eigen::Index>(hist.seq.size());
  const Eigen::Index batch = projected.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.width));

  cache.query = wq_.value * projected;
  cache.keys.clear();
  cache.values.clear();
  Matrix logits(len, batch);
  for (Eigen::Index i = 0; i < len; ++i) {
    cache.keys.push_back(wk_.value * hist.seq[static_cast<std::size_t>(i)]);
    cache.values.push_back(wv_.value * hist.seq[static_cast<std::size_t>(i)]);
    logits.row(i) = (cache.query.array() * cache.keys.back().array()).colwise().sum() * scale;
  }
  cache.weights.resize(len, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double mx = logits.col(b).maxCoeff();
    const auto e = (logits.col(b).array() - mx).exp();
    cache.weights.col(b) = e / e.sum();
  }
  Matrix out = Matrix::Zero(cfg_.width, batch);
  for (Eigen::Index i = 0; i < len; ++i) {
    out += (cache.values[static_cast<std::size_t>(i)].array().rowwise() * cache.weights.row(i).array()).matrix();
  }
  return out;
}

Matrix Fusion::cross_attention_fuse(const Matrix& x, const HistoryEmbedding& hist, Matrix* weights) const {
  if (hist.seq.empty()) throw std::invalid_argument("cross_attention_fuse: empty history");
  FusionCache cache;
  const Matrix projected = fc_.forward(x);
  Matrix out = attend(projected, hist, cache);
  if (cfg_.attention_residual) out += projected;
  if (weights) *weights = cache.weights;
  return out;
}

Matrix Fusion::forward(const Matrix& x, std::span<const TokenSequence> prefixes, FusionCache& cache) const {
  cache.tokens = check_prefixes(prefixes);
  if (x.cols() != static_cast<Eigen::Index>(prefixes.size())) {
    throw std::invalid_argument("fusion: feature batch and prefix batch differ in size");
  }
  cache.x = x;
  cache.history = embed(cache.tokens);
  cache.projected = fc_.forward(x);
  Matrix out;
  if (cfg_.mode == FusionMode::Affine) {
    cache.pooled = Matrix::Zero(cache.projected.rows(), cache.projected.cols());
    for (const auto& h : cache.history.seq) cache.pooled += h;
    cache.pooled /= static_cast<double>(cache.history.length());
    out = (cache.projected.array() * cache.pooled.array() + cache.projected.array()).matrix();
  } else {
    out = attend(cache.projected, cache.history, cache);
    if (cfg_.attention_residual) out += cache.projected;
  }
  if (observer_) observer_(prefixes, out);
  return out;
}

Matrix Fusion::condition(const Matrix& x, std::span<const TokenSequence> prefixes) const {
  FusionCache cache;
  return forward(x, prefixes, cache);
}

Matrix Fusion::backward(const FusionCache& cache, const Matrix& dconditions) {
  const auto len = cache.history.length();
  const Eigen::Index batch = dconditions.cols();
  Matrix dprojected;
  std::vector<Matrix> dhist(len);

  if (cfg_.mode == FusionMode::Affine) {
    dprojected = (dconditions.array() * (cache.pooled.array() + 1.0)).matrix();
    const Matrix dpooled = (dconditions.array() * cache.projected.array()).matrix() / static_cast<double>(len);
    for (auto& d : dhist) d = dpooled;
  } else {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.width));
    Matrix dweights(static_cast<Eigen::Index>(len), batch);
    for (std::size_t i = 0; i < len; ++i) {
      dweights.row(static_cast<Eigen::Index>(i)) =
          (dconditions.array() * cache.values[i].array()).colwise().sum();
    }
    // softmax backward, per column
    const Eigen::RowVectorXd expected = (dweights.array() * cache.weights.array()).colwise().sum();
    const Matrix dlogits =
        (cache.weights.array() * (dweights.array().rowwise() - expected.array())).matrix() * scale;

    Matrix dquery = Matrix::Zero(cfg_.width, batch);
    for (std::size_t i = 0; i < len; ++i) {
      const auto row = dlogits.row(static_cast<Eigen::Index>(i)).array();
      const Matrix dvalue = (dconditions.array().rowwise() *
                             cache.weights.row(static_cast<Eigen::Index>(i)).array()).matrix();
      const Matrix dkey = (cache.query.array().rowwise() * row).matrix();
      dquery += (cache.keys[i].array().rowwise() * row).matrix();
      wv_.grad.noalias() += dvalue * cache.history.seq[i].transpose();
      wk_.grad.noalias() += dkey * cache.history.seq[i].transpose();
      dhist[i] = wv_.value.transpose() * dvalue + wk_.value.transpose() * dkey;
    }
    wq_.grad.noalias() += dquery * cache.projected.transpose();
    dprojected = wq_.value.transpose() * dquery;
    if (cfg_.attention_residual) dprojected += dconditions;
  }

  for (std::size_t i = 0; i < len; ++i) {
    position_embedding_.grad.col(static_cast<Eigen::Index>(i)) += dhist[i].rowwise().sum();
    for (Eigen::Index b = 0; b < batch; ++b) {
      token_embedding_.grad.col(static_cast<int>(cache.tokens[i][static_cast<std::size_t>(b)])) += dhist[i].col(b);
    }
  }
  return fc_.backward(cache.x, dprojected);
}

}  // namespace aord
