// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/dacr.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "weathercycle/colorspace.hpp"
#include "weathercycle/errors.hpp"
#include "weathercycle/image_io.hpp"
#include "weathercycle/rng.hpp"

namespace weathercycle {

namespace {
std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}
}  // namespace

StubEmbeddingBackend::StubEmbeddingBackend(int dim) : dim_(dim) {
  if (dim < 4) throw DataError("StubEmbeddingBackend: dim must be >= 4");
  // Largest divisor pair gh*gw = dim with gh <= gw keeps the grid near-square.
  grid_h_ = 1;
  for (int d = 1; d * d <= dim; ++d) {
    if (dim % d == 0) grid_h_ = d;
  }
  grid_w_ = dim / grid_h_;
}

ad::Var StubEmbeddingBackend::embed_image(const ad::Var& rgb) const {
  YcbcrVars ycc = rgb_to_ycbcr_vars(rgb);
  ad::Var v = ad::reshape(ad::adaptive_avg_pool(ycc.y, grid_h_, grid_w_), {dim_});
  ad::Var m = ad::mean(ycc.y);
  ad::Var luma_std =
      ad::sqrt_(ad::add_scalar(ad::sub(ad::mean(ad::mul(ycc.y, ycc.y)), ad::mul(m, m)), 1e-8));
  v = ad::axpy_basis(v, 0, luma_std);
  v = ad::axpy_basis(v, 1, ad::add_scalar(ad::mean(ycc.cb), -0.5));
  v = ad::axpy_basis(v, 2, ad::add_scalar(ad::mean(ycc.cr), -0.5));
  return ad::l2_normalize(v);
}

Tensor StubEmbeddingBackend::embed_text(const std::string& prompt) const {
  // One splitmix round separates strings that collide under the raw hash mod d.
  Rng mixer(fnv1a64(prompt));
  Tensor t({dim_});
  t[static_cast<int>(mixer.next_u64() % static_cast<std::uint64_t>(dim_))] = 1.0;
  return t;
}

ExternalEmbeddingBackend::ExternalEmbeddingBackend(std::string exe_path)
    : exe_path_(std::move(exe_path)) {
  if (exe_path_.empty()) throw DataError("ExternalEmbeddingBackend: empty adapter path");
}

Tensor ExternalEmbeddingBackend::run_adapter(const std::string& args) const {
  const std::string cmd = "'" + exe_path_ + "' " + args;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw DataError("embedding backend " + name() + ": cannot launch adapter");
  std::string output;
  char buf[512];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, got);
  const int status = pclose(pipe);
  if (status != 0) {
    throw DataError("embedding backend " + name() + ": adapter exited with status " +
                    std::to_string(status));
  }
  std::istringstream is(output);
  std::vector<double> values;
  double v;
  while (is >> v) values.push_back(v);
  if (values.empty()) throw DataError("embedding backend " + name() + ": adapter produced no vector");
  if (dim_ == 0) dim_ = static_cast<int>(values.size());
  if (static_cast<int>(values.size()) != dim_) {
    throw DataError("embedding backend " + name() + ": inconsistent vector dimension");
  }
  Tensor t({dim_});
  double norm = 0.0;
  for (int i = 0; i < dim_; ++i) norm += values[i] * values[i];
  norm = std::sqrt(norm);
  if (norm <= 0 || !std::isfinite(norm)) {
    throw DataError("embedding backend " + name() + ": non-normalizable vector");
  }
  for (int i = 0; i < dim_; ++i) t[i] = values[i] / norm;
  return t;
}

int ExternalEmbeddingBackend::dim() const {
  if (dim_ == 0) throw DataError("embedding backend " + name() + ": dimension unknown before first call");
  return dim_;
}

ad::Var ExternalEmbeddingBackend::embed_image(const ad::Var& rgb) const {
  if (rgb.requires_grad()) {
    throw NumericError("embedding backend " + name() +
                       ": classification only, no gradient path through an external adapter");
  }
  static int counter = 0;
  const std::string tmp =
      "/tmp/weathercycle_embed_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) +
      ".png";
  save_image(RgbImage(rgb.value()), tmp);
  Tensor t;
  try {
    t = run_adapter("embed-image '" + tmp + "'");
  } catch (...) {
    std::remove(tmp.c_str());
    throw;
  }
  std::remove(tmp.c_str());
  return ad::Var::constant(std::move(t));
}

Tensor ExternalEmbeddingBackend::embed_text(const std::string& prompt) const {
  std::string quoted;
  for (char c : prompt) {
    if (c == '\'') {
      quoted += "'\\''";
    } else {
      quoted += c;
    }
  }
  return run_adapter("embed-text '" + quoted + "'");
}

std::shared_ptr<EmbeddingBackend> make_backend(const std::string& spec, int stub_dim) {
  if (spec == "stub") return std::make_shared<StubEmbeddingBackend>(stub_dim);
  if (spec.rfind("external:", 0) == 0) {
    return std::make_shared<ExternalEmbeddingBackend>(spec.substr(9));
  }
  throw DataError("unknown embedding backend spec: " + spec);
}

const char* difficulty_name(Difficulty level) {
  switch (level) {
    case Difficulty::kEasyNeg:
      return "easy-neg";
    case Difficulty::kHardNeg:
      return "hard-neg";
    case Difficulty::kVeryHard:
      return "very-hard";
  }
  return "unknown";
}

void DacrWeights::validate() const {
  if (!(beta > alpha && alpha > 1.0)) throw DataError("DacrWeights: require beta > alpha > 1");
  if (!(tau > 0.0)) throw DataError("DacrWeights: require tau > 0");
}

std::vector<std::string> default_prompts() {
  return {"a clean sharp photo", "a mildly degraded photo", "a severely degraded photo"};
}

DifficultyLabel classify_difficulty(const EmbeddingBackend& backend, const RgbImage& image,
                                    const std::vector<std::string>& prompts) {
  if (prompts.size() != 3) throw DataError("classify_difficulty: expected 3 prompts, easy -> very-hard");
  Tensor img_emb;
  try {
    img_emb = backend.embed_image(ad::Var::constant(image.data)).value();
  } catch (const DataError& e) {
    throw DataError("embedding backend " + backend.name() + " failed: " + e.what());
  }
  DifficultyLabel label;
  double best = -2.0;
  for (std::size_t k = 0; k < prompts.size(); ++k) {
    const Tensor text_emb = backend.embed_text(prompts[k]);
    if (!text_emb.same_shape(img_emb)) {
      throw DataError("embedding backend " + backend.name() + ": image/text dimension mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < img_emb.size(); ++i) s += img_emb[i] * text_emb[i];
    label.scores.push_back(s);
    if (s >= best) {  // >= so ties land on the harder (later) level
      best = s;
      label.level = static_cast<Difficulty>(k);
    }
  }
  return label;
}

double weight_of(const DifficultyLabel& label, const DacrWeights& w) {
  w.validate();
  switch (label.level) {
    case Difficulty::kEasyNeg:
      return 1.0;
    case Difficulty::kHardNeg:
      return w.alpha;
    case Difficulty::kVeryHard:
      return w.beta;
  }
  throw DataError("weight_of: invalid difficulty level");
}

ad::Var dacr_loss_vars(const EmbeddingBackend& backend, const std::vector<ad::Var>& anchors,
                       const std::vector<ad::Var>& positives,
                       const std::vector<std::pair<ad::Var, DifficultyLabel>>& negatives,
                       const DacrWeights& w, const std::vector<int>& hard_set,
                       bool include_positive, bool* empty_hard_set) {
  w.validate();
  if (negatives.empty()) throw DataError("dacr_loss: empty negative list");
  if (anchors.size() != positives.size()) throw DataError("dacr_loss: anchors/positives size mismatch");
  if (empty_hard_set) *empty_hard_set = hard_set.empty();
  if (hard_set.empty()) return ad::Var::scalar(0.0);

  std::vector<ad::Var> neg_embs;
  std::vector<double> neg_weights;
  neg_embs.reserve(negatives.size());
  for (const auto& [img, label] : negatives) {
    neg_embs.push_back(backend.embed_image(img));
    neg_weights.push_back(weight_of(label, w));
  }

  const double inv_tau = 1.0 / w.tau;
  ad::Var acc;
  for (std::size_t n = 0; n < hard_set.size(); ++n) {
    const int i = hard_set[n];
    if (i < 0 || static_cast<std::size_t>(i) >= anchors.size()) {
      throw DataError("dacr_loss: hard_set index out of range");
    }
    ad::Var za = backend.embed_image(anchors[static_cast<std::size_t>(i)]);
    ad::Var zp = backend.embed_image(positives[static_cast<std::size_t>(i)]);
    ad::Var sim_pos = ad::mul_scalar(ad::dot(za, zp), inv_tau);
    ad::Var denom;
    for (std::size_t j = 0; j < neg_embs.size(); ++j) {
      ad::Var e =
          ad::mul_scalar(ad::exp_(ad::mul_scalar(ad::dot(za, neg_embs[j]), inv_tau)), neg_weights[j]);
      denom = j == 0 ? e : ad::add(denom, e);
    }
    if (include_positive) denom = ad::add(denom, ad::exp_(sim_pos));
    ad::Var term = ad::sub(ad::log_(denom), sim_pos);
    acc = n == 0 ? term : ad::add(acc, term);
  }
  return ad::mul_scalar(acc, 1.0 / static_cast<double>(hard_set.size()));
}

double dacr_loss(const EmbeddingBackend& backend, const std::vector<RgbImage>& anchors,
                 const std::vector<RgbImage>& positives,
                 const std::vector<std::pair<RgbImage, DifficultyLabel>>& negatives,
                 const DacrWeights& w, const std::vector<int>& hard_set, bool include_positive,
                 bool* empty_hard_set) {
  std::vector<ad::Var> a, p;
  std::vector<std::pair<ad::Var, DifficultyLabel>> n;
  for (const RgbImage& img : anchors) a.push_back(ad::Var::constant(img.data));
  for (const RgbImage& img : positives) p.push_back(ad::Var::constant(img.data));
  for (const auto& [img, label] : negatives) n.emplace_back(ad::Var::constant(img.data), label);
  return dacr_loss_vars(backend, a, p, n, w, hard_set, include_positive, empty_hard_set).item();
}

}  // namespace weathercycle
