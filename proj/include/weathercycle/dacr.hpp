// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "weathercycle/autodiff.hpp"
#include "weathercycle/image.hpp"

namespace weathercycle {

// Feature/classifier backends. embed_image is differentiable when the input
// Var carries gradients (the anchor path); embed_text exists for the
// prompt-similarity difficulty classifier.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual ad::Var embed_image(const ad::Var& rgb) const = 0;  // unit-norm [d]
  virtual Tensor embed_text(const std::string& prompt) const = 0;  // unit-norm [d]
};

// Deterministic handcrafted features: a gh x gw adaptive-average-pooled
// luminance grid with luma contrast and mean chroma folded into the first
// three components, L2-normalized. Prompts map to fixed orthogonal basis
// vectors via a string hash.
class StubEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit StubEmbeddingBackend(int dim = 64);
  std::string name() const override { return "stub"; }
  int dim() const override { return dim_; }
  ad::Var embed_image(const ad::Var& rgb) const override;
  Tensor embed_text(const std::string& prompt) const override;

 private:
  int dim_;
  int grid_h_;
  int grid_w_;
};

// Adapter around an external executable (classification only, no gradient
// path): `<exe> embed-image <png-path>` and `<exe> embed-text <prompt>` must
// print whitespace-separated vector components to stdout.
class ExternalEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit ExternalEmbeddingBackend(std::string exe_path);
  std::string name() const override { return "external:" + exe_path_; }
  int dim() const override;
  ad::Var embed_image(const ad::Var& rgb) const override;
  Tensor embed_text(const std::string& prompt) const override;

 private:
  Tensor run_adapter(const std::string& args) const;
  std::string exe_path_;
  mutable int dim_ = 0;  // learned from the first call
};

// spec: "stub" or "external:<path>".
std::shared_ptr<EmbeddingBackend> make_backend(const std::string& spec, int stub_dim = 64);

enum class Difficulty { kEasyNeg = 0, kHardNeg = 1, kVeryHard = 2 };
const char* difficulty_name(Difficulty level);

struct DifficultyLabel {
  Difficulty level = Difficulty::kEasyNeg;
  std::vector<double> scores;  // per-prompt cosine similarities
};

struct DacrWeights {
  double alpha = 3.0;  // hard-negative weight, > 1
  double beta = 5.0;   // very-hard weight, > alpha
  double tau = 0.1;    // temperature, > 0
  void validate() const;
};

std::vector<std::string> default_prompts();

// Argmax over prompt similarities, ordered easy -> very-hard; ties break
// toward the harder level.
DifficultyLabel classify_difficulty(const EmbeddingBackend& backend, const RgbImage& image,
                                    const std::vector<std::string>& prompts);

double weight_of(const DifficultyLabel& label, const DacrWeights& w);

// Negated contrastive objective over embedding cosine similarities:
//   term_i = -log( exp(sim(za_i, zp_i)/tau) / sum_j w_j exp(sim(za_i, zn_j)/tau) )
// averaged over hard_set. The denominator holds only the weighted negatives;
// include_positive adds the positive term for the conventional form. An empty
// hard_set contributes zero loss and sets *empty_hard_set.
ad::Var dacr_loss_vars(const EmbeddingBackend& backend, const std::vector<ad::Var>& anchors,
                       const std::vector<ad::Var>& positives,
                       const std::vector<std::pair<ad::Var, DifficultyLabel>>& negatives,
                       const DacrWeights& w, const std::vector<int>& hard_set,
                       bool include_positive = false, bool* empty_hard_set = nullptr);

double dacr_loss(const EmbeddingBackend& backend, const std::vector<RgbImage>& anchors,
                 const std::vector<RgbImage>& positives,
                 const std::vector<std::pair<RgbImage, DifficultyLabel>>& negatives,
                 const DacrWeights& w, const std::vector<int>& hard_set,
                 bool include_positive = false, bool* empty_hard_set = nullptr);

}  // namespace weathercycle
