#pragma once

#include "ironic/corpus.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>

namespace ironic {

// Binary confusion counts with Sarcastic as the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }

  void add(Label gold, Label pred) {
    if (gold == Label::Sarcastic) {
      pred == Label::Sarcastic ? ++tp : ++fn;
    } else {
      pred == Label::Sarcastic ? ++fp : ++tn;
    }
  }

  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(
    std::span<const std::pair<Label, Label>> pairs) {
  ConfusionMatrix cm;
  for (const auto& [gold, pred] : pairs) cm.add(gold, pred);
  return cm;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct MetricsBlock {
  double accuracy = 0.0;
  double precision_w = 0.0;
  double recall_w = 0.0;  // equals accuracy for single-label binary scoring
  double f1_w = 0.0;
  ClassMetrics sarcastic;
  ClassMetrics non_sarcastic;
  std::uint64_t invalid_parse = 0;  // filled by the caller from parse flags
  int zero_divisions = 0;           // 0/0 cases resolved to 0 by convention
};

inline MetricsBlock weighted_metrics(const ConfusionMatrix& cm) {
  const std::uint64_t n = cm.total();
  if (n == 0) throw std::invalid_argument("empty confusion matrix");

  MetricsBlock m;
  auto ratio = [&m](std::uint64_t num, std::uint64_t den) {
    if (den == 0) {
      ++m.zero_divisions;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  auto f1_of = [&m](double p, double r) {
    if (p + r == 0.0) {
      ++m.zero_divisions;
      return 0.0;
    }
    return 2.0 * p * r / (p + r);
  };

  m.sarcastic.support = cm.tp + cm.fn;
  m.sarcastic.precision = ratio(cm.tp, cm.tp + cm.fp);
  m.sarcastic.recall = ratio(cm.tp, cm.tp + cm.fn);
  m.sarcastic.f1 = f1_of(m.sarcastic.precision, m.sarcastic.recall);

  m.non_sarcastic.support = cm.tn + cm.fp;
  m.non_sarcastic.precision = ratio(cm.tn, cm.tn + cm.fn);
  m.non_sarcastic.recall = ratio(cm.tn, cm.tn + cm.fp);
  m.non_sarcastic.f1 = f1_of(m.non_sarcastic.precision, m.non_sarcastic.recall);

  const double ws = static_cast<double>(m.sarcastic.support);
  const double wn = static_cast<double>(m.non_sarcastic.support);
  const double total = static_cast<double>(n);
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / total;
  m.precision_w =
      (ws * m.sarcastic.precision + wn * m.non_sarcastic.precision) / total;
  // Support-weighted recall telescopes to (tp+tn)/N; the telescoped form is
  // exact where the weighted sum can drift by an ulp.
  m.recall_w = m.accuracy;
  m.f1_w = (ws * m.sarcastic.f1 + wn * m.non_sarcastic.f1) / total;
  return m;
}

}  // namespace ironic
