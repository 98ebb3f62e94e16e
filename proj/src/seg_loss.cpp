#include "dimap/seg_loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dimap/errors.hpp"

namespace dimap::loss {

namespace {

void validate(const LossInstance& inst, const LossParams& p) {
  if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) throw InputError("alpha must lie in [0, 1]");
  if (p.weights.size() != inst.classes()) {
    throw InputError("expected " + std::to_string(inst.classes()) + " class weights, got " +
                     std::to_string(p.weights.size()));
  }
  for (double w : p.weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InputError("class weights must be positive and finite");
  }
}

// Row-wise softmax via log-sum-exp.
std::vector<double> softmax(const LossInstance& inst) {
  const std::size_t n = inst.pixels();
  const std::size_t k = inst.classes();
  std::vector<double> p(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    double m = inst.score(i, 0);
    for (std::size_t c = 1; c < k; ++c) m = std::max(m, inst.score(i, c));
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(inst.score(i, c) - m);
    for (std::size_t c = 0; c < k; ++c) p[i * k + c] = std::exp(inst.score(i, c) - m) / z;
  }
  return p;
}

double log_softmax(const LossInstance& inst, std::size_t i, std::size_t c) {
  double m = inst.score(i, 0);
  for (std::size_t j = 1; j < inst.classes(); ++j) m = std::max(m, inst.score(i, j));
  double z = 0.0;
  for (std::size_t j = 0; j < inst.classes(); ++j) z += std::exp(inst.score(i, j) - m);
  return inst.score(i, c) - m - std::log(z);
}

std::vector<double> memberships(const LossInstance& inst, const LossParams& params,
                                const std::vector<double>& probs) {
  if (params.jaccard == JaccardInput::Softmax) return probs;
  std::vector<double> q(inst.scores().begin(), inst.scores().end());
  for (auto& v : q) v = std::exp(v);
  return q;
}

struct JaccardSums {
  std::vector<double> inter;
  std::vector<double> uni;
};

JaccardSums jaccard_sums(const LossInstance& inst, const std::vector<double>& q) {
  const std::size_t k = inst.classes();
  JaccardSums s{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)};
  for (std::size_t i = 0; i < inst.pixels(); ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const double t = inst.one_hot(i, c);
      const double v = q[i * k + c];
      s.inter[c] += v * t;
      s.uni[c] += v + t - v * t;
    }
  }
  return s;
}

}  // namespace

LossInstance::LossInstance(std::size_t pixels, std::size_t classes, std::vector<double> scores,
                           std::vector<std::size_t> targets)
    : pixels_(pixels), classes_(classes), scores_(std::move(scores)), targets_(std::move(targets)) {
  if (pixels_ < 1) throw InputError("loss instance needs at least one pixel");
  if (classes_ < 2) throw InputError("loss instance needs at least two classes");
  if (scores_.size() != pixels_ * classes_) throw InputError("score grid size does not match pixels x classes");
  if (targets_.size() != pixels_) throw InputError("one target class per pixel expected");
  for (double v : scores_) {
    if (!std::isfinite(v)) throw InputError("scores must be finite");
  }
  for (std::size_t t : targets_) {
    if (t >= classes_) throw InputError("target class " + std::to_string(t) + " out of range");
  }
}

std::vector<double> class_weights(std::span<const double> counts) {
  if (counts.empty()) throw InputError("class weights need at least one class count");
  double total = 0.0;
  for (double s : counts) {
    if (!(s > 0.0)) throw InputError("class sample counts must be > 0");
    total += s;
  }
  const double c = static_cast<double>(counts.size());
  std::vector<double> w;
  w.reserve(counts.size());
  for (double s : counts) w.push_back(total / (c * s));
  return w;
}

double seg_loss(const LossInstance& inst, const LossParams& params) {
  validate(inst, params);
  const std::size_t n = inst.pixels();
  const std::size_t k = inst.classes();
  const auto p = softmax(inst);

  double ce = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = inst.target(i);
    ce -= params.weights[t] * log_softmax(inst, i, t);
  }
  ce /= static_cast<double>(n);

  double jac = 0.0;
  if (params.alpha > 0.0) {
    const auto sums = jaccard_sums(inst, memberships(inst, params, p));
    for (std::size_t c = 0; c < k; ++c) jac -= std::log(std::max(sums.inter[c] / sums.uni[c], kLogFloor));
  }
  return (1.0 - params.alpha) * ce + params.alpha * jac;
}

std::vector<double> seg_loss_grad(const LossInstance& inst, const LossParams& params) {
  validate(inst, params);
  const std::size_t n = inst.pixels();
  const std::size_t k = inst.classes();
  const auto p = softmax(inst);
  std::vector<double> grad(n * k, 0.0);

  // Cross entropy: d/do_ij [-w_t log p_it] = w_t (p_ij - t_ij).
  const double ce_scale = (1.0 - params.alpha) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = inst.target(i);
    for (std::size_t c = 0; c < k; ++c) {
      grad[i * k + c] += ce_scale * params.weights[t] * (p[i * k + c] - inst.one_hot(i, c));
    }
  }

  if (params.alpha == 0.0) return grad;

  const auto q = memberships(inst, params, p);
  const auto sums = jaccard_sums(inst, q);
  // g_ic = dL/dq_ic = -alpha * (t/I_c - (1 - t)/U_c), zero where the log is floored.
  std::vector<double> g(n * k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    if (sums.inter[c] / sums.uni[c] <= kLogFloor) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = inst.one_hot(i, c);
      g[i * k + c] = -params.alpha * (t / sums.inter[c] - (1.0 - t) / sums.uni[c]);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (params.jaccard == JaccardInput::Exponential) {
      for (std::size_t c = 0; c < k; ++c) grad[i * k + c] += g[i * k + c] * q[i * k + c];
      continue;
    }
    // Softmax Jacobian: dp_ic/do_ij = p_ic (delta_cj - p_ij).
    double dot = 0.0;
    for (std::size_t c = 0; c < k; ++c) dot += g[i * k + c] * p[i * k + c];
    for (std::size_t j = 0; j < k; ++j) grad[i * k + j] += p[i * k + j] * (g[i * k + j] - dot);
  }
  return grad;
}

}  // namespace dimap::loss
