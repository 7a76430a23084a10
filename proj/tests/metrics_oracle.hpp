#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "emreason/metrics.hpp"

namespace emtest {

// Exact non-negative rational.
struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Rational of(std::uint64_t n, std::uint64_t d) {
    if (d == 0) return {0, 1};
    const auto g = std::gcd(n, d);
    return g == 0 ? Rational{0, 1} : Rational{n / g, d / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend Rational operator*(Rational a, Rational b) { return of(a.num * b.num, a.den * b.den); }
  friend Rational operator+(Rational a, Rational b) { return of(a.num * b.den + b.num * a.den, a.den * b.den); }
  friend Rational operator/(Rational a, Rational b) { return of(a.num * b.den, a.den * b.num); }
};

struct OracleScores {
  em::ConfusionCounts counts;
  Rational precision, recall, f1;
};

// Recount from scratch: look every prediction's gold up by id and apply the
// textbook definitions, with f1 as the harmonic mean of the two ratios.
inline OracleScores oracle_scores(const std::vector<em::MatchPrediction>& predictions,
                                  const std::vector<em::LabeledGold>& golds) {
  std::map<std::string, int> gold_of;
  for (const auto& g : golds) gold_of[g.pair_id] = g.label.value;
  OracleScores s;
  for (const auto& p : predictions) {
    const bool said = p.decision == em::Decision::kMatch;
    const bool truth = gold_of.at(p.pair_id) == 1;
    if (said && truth) ++s.counts.tp;
    if (said && !truth) ++s.counts.fp;
    if (!said && truth) ++s.counts.fn;
    if (!said && !truth) ++s.counts.tn;
  }
  const auto& c = s.counts;
  if (c.tp == 0) return s;
  s.precision = Rational::of(c.tp, c.tp + c.fp);
  s.recall = Rational::of(c.tp, c.tp + c.fn);
  s.f1 = Rational::of(2, 1) * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

}  // namespace emtest
