#pragma once

#include <span>
#include <vector>

namespace lpld {

// Class probabilities over C foreground classes plus background.
// Background is always the LAST slot, index classes().
struct ScoreVector {
  std::vector<double> probs;

  int classes() const { return static_cast<int>(probs.size()) - 1; }
  double background() const { return probs.back(); }
  double foreground_mass() const;
  // Largest raw foreground probability (background slot excluded).
  double max_foreground() const;
  // Index of the largest foreground probability; ties go to the lower index.
  int argmax_foreground() const;
};

// Probabilities over the C foreground classes only (background removed and
// the remainder renormalized).
struct ForegroundDist {
  std::vector<double> probs;

  int classes() const { return static_cast<int>(probs.size()); }
  double max() const;
  int argmax() const;
};

// Probability floor applied to both kl_div arguments before the log, so
// targets carrying exact zeros keep the loss and its gradient finite.
inline constexpr double kProbEpsilon = 1e-12;

// Max-shifted softmax over C+1 logits.
ScoreVector softmax(std::span<const double> logits);

// Drops the background slot and divides the foreground scores by their
// L1 norm. Throws ZeroForegroundMass when the background probability is
// exactly 1.
ForegroundDist amplify(const ScoreVector& s);

// KL(p || q) = sum_c p_c * ln(p_c / q_c) with both arguments floored at
// kProbEpsilon inside the log. Non-negative; 0 iff p == q.
double kl_div(const ForegroundDist& p, const ForegroundDist& q);

// d kl_div / d p_c for the clamped formula above (q constant).
std::vector<double> kl_div_grad_p(const ForegroundDist& p, const ForegroundDist& q);

// Pulls a gradient w.r.t. softmax outputs back to the logits:
// gz_a = p_a * (gp_a - sum_k gp_k * p_k).
std::vector<double> softmax_vjp(std::span<const double> p, std::span<const double> gp);

int argmax(std::span<const double> v);

}  // namespace lpld
