// Command-line entry point: run evaluations, replay archives, render
// reports, validate manifests, and (re)generate the offline fixture tree.

#include "ironic/analysis.hpp"
#include "ironic/config.hpp"
#include "ironic/corpus.hpp"
#include "ironic/fixtures.hpp"
#include "ironic/runner.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct RunFlags {
  std::string config_path;
  std::optional<std::string> manifest;
  std::optional<std::string> strategy;
  std::optional<std::string> model;
  std::optional<std::string> backend;
  std::optional<std::string> out;
  std::optional<std::string> mock_script;
  std::optional<std::string> archive;
  std::optional<std::string> cache;
  std::optional<std::string> endpoint;
  std::optional<std::string> fallback_endpoint;
  std::optional<long> limit;
  std::optional<int> max_in_flight;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config_path,
                  "Config file (flat TOML-style key = value)");
  cmd->add_option("--manifest", flags.manifest, "Manifest JSONL path");
  cmd->add_option("--strategy", flags.strategy,
                  "zero-shot | zero-shot-cot | s3-cot | ironic");
  cmd->add_option("--model", flags.model, "Model name sent to the endpoint");
  cmd->add_option("--backend", flags.backend, "live | mock | replay");
  cmd->add_option("--out", flags.out, "Records output path (JSONL)");
  cmd->add_option("--mock-script", flags.mock_script,
                  "Mock script JSONL (mock backend)");
  cmd->add_option("--archive", flags.archive,
                  "Recorded archive (replay backend / cache source)");
  cmd->add_option("--cache", flags.cache, "Completion cache path");
  cmd->add_option("--endpoint", flags.endpoint,
                  "Chat-completions URL (live backend)");
  cmd->add_option("--fallback-endpoint", flags.fallback_endpoint,
                  "Fallback URL for content-filtered requests");
  cmd->add_option("--limit", flags.limit, "Evaluate only the first N samples");
  cmd->add_option("--max-in-flight", flags.max_in_flight,
                  "Concurrent sample machines");
}

ironic::RunConfig build_config(const RunFlags& flags) {
  ironic::RunConfig cfg;
  if (!flags.config_path.empty()) {
    cfg = ironic::run_config_from_file(flags.config_path);
  }
  if (flags.manifest) cfg.manifest = *flags.manifest;
  if (flags.strategy) cfg.strategy = ironic::strategy_from_name(*flags.strategy);
  if (flags.model) cfg.model = *flags.model;
  if (flags.backend) cfg.backend = ironic::backend_kind_from_name(*flags.backend);
  if (flags.out) cfg.out = *flags.out;
  if (flags.mock_script) cfg.mock_script = *flags.mock_script;
  if (flags.archive) cfg.archive = *flags.archive;
  if (flags.cache) cfg.cache = *flags.cache;
  if (flags.endpoint) cfg.endpoint = *flags.endpoint;
  if (flags.fallback_endpoint) cfg.fallback_endpoint = *flags.fallback_endpoint;
  if (flags.limit) cfg.limit = *flags.limit;
  if (flags.max_in_flight) cfg.max_in_flight = *flags.max_in_flight;
  return cfg;
}

int do_run(const ironic::RunConfig& cfg) {
  ironic::RunSummary s = ironic::run(cfg);
  std::cout << "manifest samples: " << s.manifest_samples << "\n"
            << "targeted:         " << s.targeted << "\n"
            << "skipped (resume): " << s.skipped_resume << "\n"
            << "completed:        " << s.completed << "\n"
            << "failed:           " << s.failed << "\n"
            << "backend calls:    " << s.backend_calls << "\n"
            << "records:          " << s.records_path << "\n";
  return s.failed == 0 ? 0 : 1;
}

int do_report(const std::vector<std::string>& record_paths,
              const std::string& out_path, bool group_datasets) {
  std::vector<ironic::RunRecord> records;
  for (const std::string& path : record_paths) {
    ironic::RecordsFile rf = ironic::load_records(path);
    if (rf.torn_tail) {
      std::cerr << "warning: " << path
                << " ends in a torn record; it was ignored\n";
    }
    records.insert(records.end(), rf.records.begin(), rf.records.end());
  }
  ironic::ReportOptions opts;
  opts.group_datasets = group_datasets;
  const std::string doc =
      ironic::render_report(ironic::build_eval_report(records, opts));
  if (out_path.empty()) {
    std::cout << doc;
  } else {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return 2;
    }
    out << doc;
  }
  return 0;
}

int do_validate(const std::string& manifest_path,
                const std::string& dataset_tag) {
  ironic::Dataset dataset = ironic::dataset_from_name(dataset_tag);
  ironic::Manifest manifest = ironic::load_manifest(
      manifest_path, {.check_images = true});
  for (const std::string& w : manifest.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  std::map<ironic::Label, std::uint64_t> actual;
  for (const auto& s : manifest.samples) ++actual[s.gold];
  std::cout << "samples: " << manifest.samples.size() << "\n";

  auto expected = ironic::expected_counts(dataset);
  if (!expected) {
    for (auto label : {ironic::Label::Sarcastic, ironic::Label::NonSarcastic}) {
      std::cout << "label " << ironic::label_code(label) << ": "
                << actual[label] << "\n";
    }
    std::cout << "dataset \"custom\": no reference counts to check\n";
    return 0;
  }
  ironic::CountReport report =
      ironic::validate_counts(manifest.samples, *expected);
  for (const auto& row : report.rows) {
    std::cout << "label " << ironic::label_code(row.label) << ": expected "
              << row.expected << ", actual " << row.actual
              << (row.expected == row.actual ? "" : "  <-- mismatch") << "\n";
  }
  std::cout << (report.pass ? "PASS" : "FAIL") << "\n";
  return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coherence-aware multi-modal sarcasm evaluation harness"};
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "Execute an evaluation run");
  add_run_flags(run_cmd, run_flags);

  RunFlags replay_flags;
  CLI::App* replay_cmd = app.add_subcommand(
      "replay", "Re-run against a recorded completion archive");
  add_run_flags(replay_cmd, replay_flags);

  std::vector<std::string> report_inputs;
  std::string report_out;
  bool group_datasets = false;
  CLI::App* report_cmd =
      app.add_subcommand("report", "Render a report from records files");
  report_cmd->add_option("records", report_inputs, "Records JSONL files");
  report_cmd->add_option("--out", report_out,
                         "Write the report here instead of stdout");
  report_cmd->add_flag("--group-datasets", group_datasets,
                       "Allow records from multiple datasets in one report");

  std::string validate_manifest;
  std::string validate_dataset = "custom";
  CLI::App* validate_cmd = app.add_subcommand(
      "validate", "Check a manifest against reference class counts");
  validate_cmd->add_option("--manifest", validate_manifest, "Manifest path")
      ->required();
  validate_cmd->add_option("--dataset", validate_dataset,
                           "mmsd2 | redeval | custom");

  std::string fixtures_out = "fixtures";
  CLI::App* fixtures_cmd = app.add_subcommand(
      "fixtures", "Generate the deterministic offline fixture tree");
  fixtures_cmd->add_option("--out", fixtures_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return do_run(build_config(run_flags));
    if (*replay_cmd) {
      ironic::RunConfig cfg = build_config(replay_flags);
      cfg.backend = ironic::BackendKind::Replay;
      return do_run(cfg);
    }
    if (*report_cmd) return do_report(report_inputs, report_out, group_datasets);
    if (*validate_cmd) return do_validate(validate_manifest, validate_dataset);
    if (*fixtures_cmd) {
      ironic::generate_fixtures(fixtures_out);
      std::cout << "fixtures written to " << fixtures_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
