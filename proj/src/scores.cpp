#include "lpld/scores.hpp"

#include <algorithm>
#include <cmath>

#include "lpld/errors.hpp"

namespace lpld {

int argmax(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

double ScoreVector::foreground_mass() const {
  double m = 0.0;
  for (size_t i = 0; i + 1 < probs.size(); ++i) m += probs[i];
  return m;
}

double ScoreVector::max_foreground() const {
  double m = 0.0;
  for (size_t i = 0; i + 1 < probs.size(); ++i) m = std::max(m, probs[i]);
  return m;
}

int ScoreVector::argmax_foreground() const {
  return argmax(std::span<const double>(probs.data(), probs.size() - 1));
}

double ForegroundDist::max() const {
  return *std::max_element(probs.begin(), probs.end());
}

int ForegroundDist::argmax() const { return lpld::argmax(probs); }

ScoreVector softmax(std::span<const double> logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  ScoreVector out;
  out.probs.resize(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out.probs[i] = std::exp(logits[i] - m);
    sum += out.probs[i];
  }
  for (double& p : out.probs) p /= sum;
  return out;
}

ForegroundDist amplify(const ScoreVector& s) {
  double mass = s.foreground_mass();
  if (mass <= 0.0) throw ZeroForegroundMass();
  ForegroundDist out;
  out.probs.resize(s.probs.size() - 1);
  for (size_t i = 0; i + 1 < s.probs.size(); ++i) out.probs[i] = s.probs[i] / mass;
  return out;
}

double kl_div(const ForegroundDist& p, const ForegroundDist& q) {
  double v = 0.0;
  for (size_t i = 0; i < p.probs.size(); ++i) {
    double pc = std::max(p.probs[i], kProbEpsilon);
    double qc = std::max(q.probs[i], kProbEpsilon);
    v += p.probs[i] * (std::log(pc) - std::log(qc));
  }
  return std::max(0.0, v);
}

std::vector<double> kl_div_grad_p(const ForegroundDist& p, const ForegroundDist& q) {
  std::vector<double> g(p.probs.size());
  for (size_t i = 0; i < p.probs.size(); ++i) {
    double pc = std::max(p.probs[i], kProbEpsilon);
    double qc = std::max(q.probs[i], kProbEpsilon);
    g[i] = std::log(pc) - std::log(qc) + (p.probs[i] >= kProbEpsilon ? 1.0 : 0.0);
  }
  return g;
}

std::vector<double> softmax_vjp(std::span<const double> p, std::span<const double> gp) {
  double dot = 0.0;
  for (size_t i = 0; i < p.size(); ++i) dot += gp[i] * p[i];
  std::vector<double> gz(p.size());
  for (size_t i = 0; i < p.size(); ++i) gz[i] = p[i] * (gp[i] - dot);
  return gz;
}

}  // namespace lpld
