#include <doctest.h>

#include <cmath>

#include "aord/baselines.hpp"
#include "gradcheck.hpp"

using namespace aord;

namespace {

ModelConfig small(HeadKind head, int K = 5, int D = 3) {
  ModelConfig cfg;
  cfg.head = head;
  cfg.num_classes = K;
  cfg.input_dim = D;
  cfg.encoder_hidden = 6;
  cfg.feature_dim = 5;
  cfg.width = 8;
  cfg.depth = 1;
  cfg.t_train = 100;
  cfg.inference_steps = 10;
  return cfg;
}

Dataset random_dataset(Rng& rng, int K, int D, int n) {
  Dataset d;
  d.num_classes = K;
  d.inputs = Matrix::Random(D, n);
  for (int i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(rng() % static_cast<unsigned>(K)));
  return d;
}

}  // namespace

TEST_CASE("binary cross-entropy examples") {
  CHECK(bce_with_logit(0.0, 1.0) == doctest::Approx(std::log(2.0)));
  CHECK(bce_with_logit(0.0, 0.0) == doctest::Approx(std::log(2.0)));
  CHECK(bce_with_logit(50.0, 1.0) < 1e-20);
  CHECK(bce_with_logit(-50.0, 0.0) < 1e-20);
  CHECK(std::isfinite(bce_with_logit(-1000.0, 1.0)));
  CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("ar_ce gradients match finite differences") {
  Rng rng(1);
  for (FusionMode mode : {FusionMode::CrossAttention, FusionMode::Affine}) {
    ModelConfig cfg = small(HeadKind::ArCe);
    cfg.fusion = mode;
    ModelBundle bundle(cfg);
    bundle.init(1);
    const Dataset batch = random_dataset(rng, 5, 3, 4);
    const ParamRefs params = bundle.trainable_params();
    zero_grads(params);
    const auto stats = ce_ar_loss(batch, bundle, true);
    CHECK(stats.terms == 16);
    CHECK(stats.step_loss.size() == 4);
    testing::check_gradients(params, [&] { return ce_ar_loss(batch, bundle, false).total_loss; }, rng);
  }
}

TEST_CASE("ar_ce prediction follows the logit sign and is deterministic") {
  ModelBundle bundle(small(HeadKind::ArCe));
  bundle.init(2);
  bundle.ce.logit.weight.value.setZero();
  bundle.ce.logit.bias.value.setConstant(3.0);
  const Vector x = Vector::Random(3);
  CHECK(ce_ar_predict(bundle, x).label == 4);
  bundle.ce.logit.bias.value.setConstant(-3.0);
  CHECK(ce_ar_predict(bundle, x).label == 0);
  bundle.ce.logit.bias.value.setZero();
  CHECK(ce_ar_predict(bundle, x).label == 4);  // p = 0.5 counts as 1

  bundle.init(3);
  const auto a = ce_ar_predict(bundle, x), b = ce_ar_predict(bundle, x);
  CHECK(a.bits == b.bits);
  CHECK(a.step_value == b.step_value);
}

TEST_CASE("ar_ce and diffusion heads see identical fusion outputs") {
  ModelBundle diff(small(HeadKind::Diffusion));
  ModelBundle ce(small(HeadKind::ArCe));
  diff.init(4);
  ce.init(4);
  std::vector<Matrix> from_diff, from_ce;
  diff.fusion.set_observer([&](std::span<const TokenSequence>, const Matrix& c) { from_diff.push_back(c); });
  ce.fusion.set_observer([&](std::span<const TokenSequence>, const Matrix& c) { from_ce.push_back(c); });
  const Vector x = Vector::Random(3);
  Rng rng(4);
  PredictOptions opts;
  opts.samples_per_step = 1;
  predict(diff, x, rng, opts);
  ce_ar_predict(ce, x);
  REQUIRE(!from_diff.empty());
  REQUIRE(!from_ce.empty());
  // step 1 shares the BOS-only prefix
  CHECK(from_diff[0] == from_ce[0]);
}

TEST_CASE("softmax head: tie rule and uniform loss") {
  Vector uniform = Vector::Zero(5);
  CHECK(argmax_smallest(uniform) == 0);
  Vector two = Vector::Zero(4);
  two(1) = two(3) = 2.0;
  CHECK(argmax_smallest(two) == 1);

  ModelBundle bundle(small(HeadKind::Softmax));
  bundle.init(5);
  bundle.softmax.logits.weight.value.setZero();
  bundle.softmax.logits.bias.value.setZero();
  Rng rng(5);
  const Dataset batch = random_dataset(rng, 5, 3, 10);
  CHECK(softmax_loss(batch, bundle, false) == doctest::Approx(std::log(5.0)));
  for (int p : softmax_predict(bundle, batch.inputs)) CHECK(p == 0);
}

TEST_CASE("softmax gradients match finite differences") {
  ModelBundle bundle(small(HeadKind::Softmax));
  bundle.init(6);
  Rng rng(6);
  const Dataset batch = random_dataset(rng, 5, 3, 6);
  const ParamRefs params = bundle.trainable_params();
  zero_grads(params);
  softmax_loss(batch, bundle, true);
  testing::check_gradients(params, [&] { return softmax_loss(batch, bundle, false); }, rng);
}

TEST_CASE("softmax separates a linearly separable two-class set") {
  Rng rng(7);
  Dataset train, test;
  for (Dataset* d : {&train, &test}) {
    d->num_classes = 2;
    d->inputs = Matrix::Random(2, 400);
    for (Eigen::Index i = 0; i < 400; ++i) {
      const int label = d->inputs(0, i) + 0.5 * d->inputs(1, i) > 0 ? 1 : 0;
      d->inputs(0, i) += label ? 0.2 : -0.2;  // margin
      d->labels.push_back(label);
    }
  }
  ModelBundle bundle(small(HeadKind::Softmax, 2, 2));
  bundle.init(7);
  AdamState adam;
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = 1e-2;
  const auto rep = softmax_train_and_predict(train, test, bundle, adam, adam_cfg, 40, 32, 7);
  CHECK(rep.accuracy >= 0.99);
}

TEST_CASE("all three heads train from one config schema") {
  Rng rng(8);
  const Dataset data = random_dataset(rng, 5, 3, 40);
  for (HeadKind head : {HeadKind::Diffusion, HeadKind::ArCe, HeadKind::Softmax}) {
    ModelBundle bundle(small(head));
    bundle.init(8);
    AdamState adam;
    const auto stats = train_epoch(data, bundle, adam, AdamConfig{}, 16, 8, 0);
    CHECK(std::isfinite(stats.total_loss));
    EvalOptions opts;
    opts.samples_per_step = 1;
    CHECK(evaluate(data, bundle, opts).report.total == 40);
  }
}
