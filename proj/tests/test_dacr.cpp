// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "testutil.hpp"
#include "weathercycle/dacr.hpp"
#include "weathercycle/errors.hpp"

using namespace weathercycle;
using wctest::random_tensor;

namespace {

RgbImage solid(double v) { return RgbImage(Tensor({3, 8, 8}, v)); }

// Deterministic test double: images map to hand-picked unit embeddings keyed
// by their mean value, prompts map to basis vectors. Lets tests pin exact
// cosine similarities.
class FakeBackend : public EmbeddingBackend {
 public:
  explicit FakeBackend(std::vector<std::pair<double, Tensor>> table) : table_(std::move(table)) {}
  std::string name() const override { return "fake"; }
  int dim() const override { return 4; }
  ad::Var embed_image(const ad::Var& rgb) const override {
    const double m = mean_value(rgb.value());
    for (const auto& [key, vec] : table_) {
      if (std::fabs(key - m) < 1e-6) return ad::Var::constant(vec);
    }
    throw DataError("FakeBackend: no embedding for mean " + std::to_string(m));
  }
  Tensor embed_text(const std::string& prompt) const override {
    Tensor e({4});
    if (prompt.find("clean") != std::string::npos) e[0] = 1;
    else if (prompt.find("mildly") != std::string::npos) e[1] = 1;
    else e[2] = 1;
    return e;
  }

 private:
  std::vector<std::pair<double, Tensor>> table_;
};

Tensor unit4(double a, double b, double c, double d) {
  Tensor t({4});
  t[0] = a;
  t[1] = b;
  t[2] = c;
  t[3] = d;
  const double n = std::sqrt(a * a + b * b + c * c + d * d);
  for (std::size_t i = 0; i < 4; ++i) t[i] /= n;
  return t;
}

DifficultyLabel label_of(Difficulty level) {
  DifficultyLabel l;
  l.level = level;
  return l;
}

}  // namespace

TEST_CASE("stub embeddings are unit-norm and deterministic") {
  wctest::Rng rng(41);
  StubEmbeddingBackend backend(64);
  RgbImage img(random_tensor({3, 16, 16}, rng));
  ad::Var e1 = backend.embed_image(ad::Var::constant(img.data));
  ad::Var e2 = backend.embed_image(ad::Var::constant(img.data));
  CHECK(max_abs_diff(e1.value(), e2.value()) == 0.0);
  double norm = 0;
  for (std::size_t i = 0; i < e1.value().size(); ++i) norm += e1.value()[i] * e1.value()[i];
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(static_cast<int>(e1.value().size()) == 64);
}

TEST_CASE("stub prompt embeddings are distinct unit basis vectors") {
  for (int dim : {8, 64}) {
    StubEmbeddingBackend backend(dim);
    std::vector<Tensor> embs;
    for (const std::string& p : default_prompts()) embs.push_back(backend.embed_text(p));
    for (std::size_t a = 0; a < embs.size(); ++a) {
      double norm = 0;
      for (std::size_t i = 0; i < embs[a].size(); ++i) norm += embs[a][i] * embs[a][i];
      CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));
      for (std::size_t b = a + 1; b < embs.size(); ++b) {
        double dot = 0;
        for (std::size_t i = 0; i < embs[a].size(); ++i) dot += embs[a][i] * embs[b][i];
        CHECK(std::fabs(dot) < 1e-9);  // orthogonal, so classification is unambiguous
      }
    }
  }
}

TEST_CASE("difficulty classification is the argmax with harder tie-break") {
  const std::vector<std::string> prompts = default_prompts();

  FakeBackend hard({{0.5, unit4(0.2, 0.9, 0.1, 0)}});
  DifficultyLabel l1 = classify_difficulty(hard, solid(0.5), prompts);
  CHECK(l1.level == Difficulty::kHardNeg);
  CHECK(l1.scores.size() == 3);
  CHECK(l1.scores[1] > l1.scores[0]);

  FakeBackend easy({{0.5, unit4(0.9, 0.2, 0.1, 0)}});
  CHECK(classify_difficulty(easy, solid(0.5), prompts).level == Difficulty::kEasyNeg);

  FakeBackend tie01({{0.5, unit4(1, 1, 0, 0)}});
  CHECK(classify_difficulty(tie01, solid(0.5), prompts).level == Difficulty::kHardNeg);

  FakeBackend tie_all({{0.5, unit4(1, 1, 1, 0)}});
  CHECK(classify_difficulty(tie_all, solid(0.5), prompts).level == Difficulty::kVeryHard);

  CHECK_THROWS_AS(classify_difficulty(easy, solid(0.5), {"one", "two"}), DataError);
}

TEST_CASE("classification level always matches its own reported scores") {
  wctest::Rng rng(42);
  StubEmbeddingBackend backend(16);
  const std::vector<std::string> prompts = default_prompts();
  for (int t = 0; t < 10; ++t) {
    RgbImage img(random_tensor({3, 8, 8}, rng));
    DifficultyLabel label = classify_difficulty(backend, img, prompts);
    int arg = 0;
    for (int i = 1; i < 3; ++i) {
      if (label.scores[static_cast<std::size_t>(i)] >=
          label.scores[static_cast<std::size_t>(arg)]) {
        arg = i;
      }
    }
    CHECK(static_cast<int>(label.level) == arg);
  }
}

TEST_CASE("difficulty weights follow the 1/3/5 mapping") {
  DacrWeights w;
  CHECK(weight_of(label_of(Difficulty::kEasyNeg), w) == 1.0);
  CHECK(weight_of(label_of(Difficulty::kHardNeg), w) == 3.0);
  CHECK(weight_of(label_of(Difficulty::kVeryHard), w) == 5.0);

  DacrWeights bad;
  bad.alpha = 0.5;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = DacrWeights{};
  bad.beta = bad.alpha;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = DacrWeights{};
  bad.tau = 0.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("loss matches a brute-force scalar oracle on small batches") {
  wctest::Rng rng(43);
  StubEmbeddingBackend backend(8);
  DacrWeights w;
  for (int batch : {1, 2, 4}) {
    std::vector<RgbImage> anchors, positives;
    std::vector<std::pair<RgbImage, DifficultyLabel>> negatives;
    std::vector<int> hard_set;
    for (int b = 0; b < batch; ++b) {
      anchors.emplace_back(random_tensor({3, 8, 8}, rng));
      positives.emplace_back(random_tensor({3, 8, 8}, rng));
      negatives.emplace_back(RgbImage(random_tensor({3, 8, 8}, rng)),
                             label_of(static_cast<Difficulty>(b % 3)));
      hard_set.push_back(b);
    }
    const double got = dacr_loss(backend, anchors, positives, negatives, w, hard_set);

    auto embed = [&](const RgbImage& img) {
      return backend.embed_image(ad::Var::constant(img.data)).value();
    };
    auto dot = [](const Tensor& a, const Tensor& b) {
      double acc = 0;
      for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
      return acc;
    };
    double expect = 0;
    for (int i : hard_set) {
      const Tensor za = embed(anchors[static_cast<std::size_t>(i)]);
      const double sim_pos = dot(za, embed(positives[static_cast<std::size_t>(i)]));
      double denom = 0;
      for (const auto& [neg, label] : negatives) {
        denom += weight_of(label, w) * std::exp(dot(za, embed(neg)) / w.tau);
      }
      expect += -std::log(std::exp(sim_pos / w.tau) / denom);
    }
    expect /= static_cast<double>(hard_set.size());
    CHECK(std::fabs(got - expect) < 1e-8);
  }
}

TEST_CASE("hand example: aligned positive and opposed easy negative give -20") {
  // anchor mean .1 -> e0; positive mean .2 -> e0 (sim 1); negative mean .3 -> -e0 (sim -1)
  FakeBackend backend({{0.1, unit4(1, 0, 0, 0)},
                       {0.2, unit4(1, 0, 0, 0)},
                       {0.3, unit4(-1, 0, 0, 0)}});
  DacrWeights w;  // tau = 0.1
  std::vector<RgbImage> anchors = {solid(0.1)};
  std::vector<RgbImage> positives = {solid(0.2)};
  std::vector<std::pair<RgbImage, DifficultyLabel>> negatives;
  negatives.emplace_back(solid(0.3), label_of(Difficulty::kEasyNeg));
  const double easy = dacr_loss(backend, anchors, positives, negatives, w, {0});
  CHECK(easy == doctest::Approx(-20.0).epsilon(1e-9));

  negatives[0].second = label_of(Difficulty::kVeryHard);
  const double very_hard = dacr_loss(backend, anchors, positives, negatives, w, {0});
  CHECK(very_hard - easy == doctest::Approx(std::log(5.0)).epsilon(1e-9));

  // equal similarities with one easy negative cancel exactly
  FakeBackend equal({{0.1, unit4(1, 0, 0, 0)},
                     {0.2, unit4(0, 1, 0, 0)},
                     {0.3, unit4(0, 1, 0, 0)}});
  negatives[0].second = label_of(Difficulty::kEasyNeg);
  CHECK(dacr_loss(equal, anchors, positives, negatives, w, {0}) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("upgrading any negative raises the loss; better alignment lowers it") {
  DacrWeights w;
  std::vector<RgbImage> anchors = {solid(0.1)};
  std::vector<std::pair<RgbImage, DifficultyLabel>> negatives;
  negatives.emplace_back(solid(0.3), label_of(Difficulty::kEasyNeg));
  negatives.emplace_back(solid(0.4), label_of(Difficulty::kEasyNeg));

  FakeBackend backend({{0.1, unit4(1, 0, 0, 0)},
                       {0.2, unit4(0.8, 0.6, 0, 0)},
                       {0.25, unit4(1, 0, 0, 0)},
                       {0.3, unit4(0.3, 0.9, 0.1, 0)},
                       {0.4, unit4(0.1, 0.2, 0.9, 0)}});

  const double base = dacr_loss(backend, anchors, {solid(0.2)}, negatives, w, {0});
  for (std::size_t j = 0; j < negatives.size(); ++j) {
    auto upgraded = negatives;
    upgraded[j].second = label_of(Difficulty::kHardNeg);
    CHECK(dacr_loss(backend, anchors, {solid(0.2)}, upgraded, w, {0}) > base);
    upgraded[j].second = label_of(Difficulty::kVeryHard);
    CHECK(dacr_loss(backend, anchors, {solid(0.2)}, upgraded, w, {0}) >
          dacr_loss(backend, anchors, {solid(0.2)},
                    [&] {
                      auto v = negatives;
                      v[j].second = label_of(Difficulty::kHardNeg);
                      return v;
                    }(),
                    w, {0}));
  }
  // positive sim 1 (mean .25) beats positive sim 0.8 (mean .2)
  CHECK(dacr_loss(backend, anchors, {solid(0.25)}, negatives, w, {0}) < base);
}

TEST_CASE("empty hard set flags and contributes nothing; empty negatives reject") {
  StubEmbeddingBackend backend(8);
  DacrWeights w;
  wctest::Rng rng(44);
  std::vector<RgbImage> anchors = {RgbImage(random_tensor({3, 8, 8}, rng))};
  std::vector<RgbImage> positives = {RgbImage(random_tensor({3, 8, 8}, rng))};
  std::vector<std::pair<RgbImage, DifficultyLabel>> negatives;
  negatives.emplace_back(RgbImage(random_tensor({3, 8, 8}, rng)),
                         label_of(Difficulty::kEasyNeg));

  bool empty_flag = false;
  CHECK(dacr_loss(backend, anchors, positives, negatives, w, {}, false, &empty_flag) == 0.0);
  CHECK(empty_flag);

  CHECK_THROWS_AS(dacr_loss(backend, anchors, positives, {}, w, {0}), DataError);
  CHECK_THROWS_AS(dacr_loss(backend, anchors, positives, negatives, w, {7}), DataError);
}

TEST_CASE("the conventional denominator variant adds the positive term") {
  FakeBackend backend({{0.1, unit4(1, 0, 0, 0)},
                       {0.2, unit4(1, 0, 0, 0)},
                       {0.3, unit4(-1, 0, 0, 0)}});
  DacrWeights w;
  std::vector<RgbImage> anchors = {solid(0.1)};
  std::vector<RgbImage> positives = {solid(0.2)};
  std::vector<std::pair<RgbImage, DifficultyLabel>> negatives;
  negatives.emplace_back(solid(0.3), label_of(Difficulty::kEasyNeg));
  const double got = dacr_loss(backend, anchors, positives, negatives, w, {0}, true);
  const double expect = -std::log(std::exp(10.0) / (std::exp(10.0) + std::exp(-10.0)));
  CHECK(got == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("anchor gradients match finite differences through the stub") {
  wctest::Rng rng(45);
  StubEmbeddingBackend backend(8);
  DacrWeights w;
  Tensor anchor = random_tensor({3, 8, 8}, rng, 0.2, 0.8);
  Tensor positive = random_tensor({3, 8, 8}, rng, 0.2, 0.8);
  Tensor negative = random_tensor({3, 8, 8}, rng, 0.2, 0.8);
  auto build = [&](const std::vector<ad::Var>& leaves) {
    std::vector<std::pair<ad::Var, DifficultyLabel>> negs;
    negs.emplace_back(leaves[2], label_of(Difficulty::kHardNeg));
    return dacr_loss_vars(backend, {leaves[0]}, {leaves[1]}, negs, w, {0});
  };
  auto res = wctest::grad_check(build, {anchor, positive, negative}, rng, 12);
  CHECK_MESSAGE(res.max_rel_err < 1e-3, res.worst);
}
