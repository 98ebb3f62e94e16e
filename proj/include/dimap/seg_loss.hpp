#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dimap::loss {

// Per-pixel class scores (pre-activation) with one-hot targets given as the
// target class index of each pixel.
class LossInstance {
 public:
  // scores is row-major pixels x classes; targets[i] in [0, classes).
  LossInstance(std::size_t pixels, std::size_t classes, std::vector<double> scores,
               std::vector<std::size_t> targets);

  std::size_t pixels() const { return pixels_; }
  std::size_t classes() const { return classes_; }
  double score(std::size_t i, std::size_t c) const { return scores_[i * classes_ + c]; }
  std::size_t target(std::size_t i) const { return targets_[i]; }
  double one_hot(std::size_t i, std::size_t c) const { return targets_[i] == c ? 1.0 : 0.0; }
  std::span<const double> scores() const { return scores_; }

  LossInstance with_scores(std::vector<double> scores) const {
    return LossInstance(pixels_, classes_, std::move(scores), targets_);
  }

 private:
  std::size_t pixels_;
  std::size_t classes_;
  std::vector<double> scores_;
  std::vector<std::size_t> targets_;
};

// How the Jaccard term turns scores into soft memberships.
enum class JaccardInput {
  Softmax,      // p_ic = softmax(o_i)_c, bounded in [0, 1]
  Exponential,  // raw e^{o_ic}, the literal reading
};

struct LossParams {
  double alpha = 0.0;
  std::vector<double> weights;  // one positive weight per class
  JaccardInput jaccard = JaccardInput::Softmax;
};

inline constexpr double kLogFloor = 1e-12;

// w_k = (sum_c S_c) / (C * S_k).
std::vector<double> class_weights(std::span<const double> counts);

// (1 - alpha) * weighted cross entropy averaged over pixels
// - alpha * sum_c log(soft intersection_c / soft union_c).
double seg_loss(const LossInstance& inst, const LossParams& params);

// Analytic dL/do, row-major pixels x classes.
std::vector<double> seg_loss_grad(const LossInstance& inst, const LossParams& params);

}  // namespace dimap::loss
