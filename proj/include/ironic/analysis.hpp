#pragma once

#include "ironic/metrics.hpp"
#include "ironic/parse.hpp"
#include "ironic/records.hpp"
#include "ironic/strategies.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace ironic {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cross-tab of predicted coherence relations against gold labels. Unparsed
// (no relation named, typically a truncated rationale) is tracked separately
// so the named-relation cells stay clean while nothing is silently dropped.
struct CrDistribution {
  std::map<CoherenceRelation, std::array<std::uint64_t, 2>> counts;
  std::array<std::uint64_t, 2> unparsed{0, 0};

  void add(CoherenceRelation cr, Label gold) {
    const std::size_t col = static_cast<std::size_t>(label_code(gold));
    if (cr == CoherenceRelation::Unparsed) {
      ++unparsed[col];
    } else {
      ++counts[cr][col];
    }
  }

  std::uint64_t cell(CoherenceRelation cr, Label gold) const {
    const std::size_t col = static_cast<std::size_t>(label_code(gold));
    if (cr == CoherenceRelation::Unparsed) return unparsed[col];
    auto it = counts.find(cr);
    return it == counts.end() ? 0 : it->second[col];
  }

  std::uint64_t label_total(Label gold) const {
    const std::size_t col = static_cast<std::size_t>(label_code(gold));
    std::uint64_t sum = unparsed[col];
    for (const auto& [cr, row] : counts) sum += row[col];
    return sum;
  }

  std::uint64_t total() const {
    return label_total(Label::NonSarcastic) + label_total(Label::Sarcastic);
  }
};

inline CrDistribution cr_distribution(std::span<const RunRecord> runs) {
  CrDistribution dist;
  for (const RunRecord& r : runs) {
    if (r.strategy != StrategyId::Ironic) {
      throw AnalysisError("coherence distribution requires IRONIC runs; got " +
                          std::string(strategy_name(r.strategy)) +
                          " for sample " + r.sample_id);
    }
    if (r.failed) continue;
    dist.add(r.relation.value_or(CoherenceRelation::Unparsed), r.gold);
  }
  return dist;
}

// Fixed row order for the distribution tables; Unparsed always last.
inline constexpr std::array<CoherenceRelation, 6> kCrReportOrder = {
    CoherenceRelation::Insertion,      CoherenceRelation::Extension,
    CoherenceRelation::Concretization, CoherenceRelation::Projection,
    CoherenceRelation::Restatement,    CoherenceRelation::Unparsed,
};

// Fixed-point rendering with four decimals, ties to even; pinned so reports
// are byte-identical across platforms.
inline std::string format_metric(double v) {
  const long long scaled = std::llrint(v * 10000.0);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%04lld", scaled / 10000,
                scaled % 10000);
  return buf;
}

inline std::string format_temperature(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

struct GroupKey {
  std::string dataset;
  std::string model;
  StrategyId strategy = StrategyId::ZeroShot;

  auto tie() const {
    return std::tuple(dataset, model, static_cast<int>(strategy));
  }
  bool operator<(const GroupKey& o) const { return tie() < o.tie(); }
  bool operator==(const GroupKey& o) const { return tie() == o.tie(); }
};

struct GroupReport {
  GroupKey key;
  MetricsBlock metrics;
  std::uint64_t samples = 0;  // records seen (scored + failed)
  std::uint64_t scored = 0;
  std::uint64_t failed = 0;
  std::uint64_t truncated_rationales = 0;
  DecodingParams params;
  std::string backend_kind;
  std::optional<CrDistribution> cr;  // IRONIC groups only
};

struct EvalReport {
  std::vector<GroupReport> groups;
  std::uint64_t duplicate_records = 0;
};

struct ReportOptions {
  // Records spanning several datasets are refused unless explicitly allowed.
  bool group_datasets = false;
};

inline EvalReport build_eval_report(std::span<const RunRecord> records,
                                    const ReportOptions& opts = {}) {
  EvalReport report;

  std::set<std::string> datasets;
  for (const RunRecord& r : records) {
    datasets.insert(std::string(dataset_name(r.dataset)));
  }
  if (datasets.size() > 1 && !opts.group_datasets) {
    std::string names;
    for (const auto& d : datasets) names += (names.empty() ? "" : ", ") + d;
    throw AnalysisError(
        "records span multiple datasets (" + names +
        "); pass --group-datasets to aggregate them into one report");
  }

  // Last record wins per (group, sample): reruns append, they never rewrite.
  std::map<GroupKey, std::map<std::string, RunRecord>> grouped;
  for (const RunRecord& r : records) {
    GroupKey key{std::string(dataset_name(r.dataset)), r.model, r.strategy};
    auto [it, inserted] = grouped[key].insert_or_assign(r.sample_id, r);
    if (!inserted) ++report.duplicate_records;
  }

  for (auto& [key, by_sample] : grouped) {
    GroupReport g;
    g.key = key;
    ConfusionMatrix cm;
    std::uint64_t invalid = 0;
    std::vector<RunRecord> ironic_records;
    for (auto& [id, rec] : by_sample) {
      ++g.samples;
      g.params = rec.params;
      g.backend_kind = rec.backend_kind;
      if (rec.failed || !rec.prediction) {
        ++g.failed;
        continue;
      }
      ++g.scored;
      cm.add(rec.gold, rec.prediction->label);
      if (!rec.prediction->valid) ++invalid;
      if (rec.rationale_truncated) ++g.truncated_rationales;
      if (rec.strategy == StrategyId::Ironic) ironic_records.push_back(rec);
    }
    if (g.scored > 0) {
      g.metrics = weighted_metrics(cm);
      g.metrics.invalid_parse = invalid;
    }
    if (key.strategy == StrategyId::Ironic && !ironic_records.empty()) {
      g.cr = cr_distribution(ironic_records);
    }
    report.groups.push_back(std::move(g));
  }
  // std::map ordering already sorts by dataset, model, strategy rank.
  return report;
}

inline std::string render_report(const EvalReport& report) {
  std::string out = "# Evaluation Report\n";
  if (report.groups.empty()) {
    out += "\nNo records.\n";
    return out;
  }

  out += "\n## Results\n\n";
  out += "| Dataset | Model | Type | Accuracy | Precision | Recall | F1 |\n";
  out += "| --- | --- | --- | --- | --- | --- | --- |\n";
  for (const GroupReport& g : report.groups) {
    out += "| " + g.key.dataset + " | " + g.key.model + " | " +
           std::string(strategy_display_name(g.key.strategy)) + " | ";
    if (g.scored == 0) {
      out += "- | - | - | - |\n";
      continue;
    }
    out += format_metric(g.metrics.accuracy) + " | " +
           format_metric(g.metrics.precision_w) + " | " +
           format_metric(g.metrics.recall_w) + " | " +
           format_metric(g.metrics.f1_w) + " |\n";
  }

  out += "\n## Runs\n\n";
  out +=
      "| Dataset | Model | Type | Samples | Scored | Failed | Invalid "
      "parses | Truncated rationales | Temperature | Max tokens | Seed | "
      "Backend |\n";
  out += "| --- | --- | --- | --- | --- | --- | --- | --- | --- | --- | --- "
         "| --- |\n";
  for (const GroupReport& g : report.groups) {
    std::string backend = g.backend_kind;
    if (backend == "live") backend += " (nondeterministic)";
    out += "| " + g.key.dataset + " | " + g.key.model + " | " +
           std::string(strategy_display_name(g.key.strategy)) + " | " +
           std::to_string(g.samples) + " | " + std::to_string(g.scored) +
           " | " + std::to_string(g.failed) + " | " +
           std::to_string(g.metrics.invalid_parse) + " | " +
           std::to_string(g.truncated_rationales) + " | " +
           format_temperature(g.params.temperature) + " | " +
           std::to_string(g.params.max_tokens) + " | " +
           std::to_string(g.params.seed) + " | " + backend + " |\n";
  }

  for (const GroupReport& g : report.groups) {
    if (!g.cr) continue;
    out += "\n## Coherence Relations: " + g.key.dataset + " / " +
           g.key.model + "\n\n";
    out += "| CR | Non-Sarcastic | Sarcastic |\n";
    out += "| --- | --- | --- |\n";
    for (CoherenceRelation cr : kCrReportOrder) {
      out += "| " + std::string(relation_name(cr)) + " | " +
             std::to_string(g.cr->cell(cr, Label::NonSarcastic)) + " | " +
             std::to_string(g.cr->cell(cr, Label::Sarcastic)) + " |\n";
    }
  }
  return out;
}

}  // namespace ironic
