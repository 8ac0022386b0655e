#pragma once

// Command-line front end. Kept in a header so tests can drive it in-process.
// Exit codes: 0 success, 1 I/O or parse failure, 2 domain-validation failure.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "owr.hpp"

namespace owr::cli {

inline constexpr int kOk = 0;
inline constexpr int kIoFailure = 1;
inline constexpr int kDomainFailure = 2;

namespace detail {

struct TrainFlags {
  std::optional<std::uint64_t> seed;
  double step_size = 0.01;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double l2 = 0.0;
  std::string weighting = "balanced";
  std::size_t hidden = kDefaultHiddenWidth;
  std::string metric = "euclidean";
  bool allow_overlap = false;
  bool l2_normalize = false;
  std::string backbone = "unknown";

  void add_to(CLI::App& cmd, bool with_training) {
    cmd.add_option("--seed", seed, "Seed for every random choice (default: manifest seed, else 0)");
    cmd.add_option("--metric", metric, "Distance metric")->check(CLI::IsMember({"euclidean", "cosine"}));
    cmd.add_flag("--allow-overlap", allow_overlap, "Run even if the manifest has class overlaps");
    cmd.add_flag("--l2-normalize", l2_normalize, "Scale every embedding to unit L2 norm first");
    if (!with_training) return;
    cmd.add_option("--step-size", step_size, "Gradient descent step size")->check(CLI::PositiveNumber);
    cmd.add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
    cmd.add_option("--batch-size", batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    cmd.add_option("--l2", l2, "L2 penalty on weights")->check(CLI::NonNegativeNumber);
    cmd.add_option("--class-weighting", weighting, "Loss weighting")->check(CLI::IsMember({"none", "balanced"}));
    cmd.add_option("--hidden", hidden, "FC2 hidden width")->check(CLI::PositiveNumber);
  }

  RunOptions options(const ScenarioManifest& m) const {
    RunOptions o;
    o.metric = parse_metric(metric);
    o.allow_overlap = allow_overlap;
    o.l2_normalize = l2_normalize;
    o.backbone = backbone;
    o.train.seed = seed.value_or(m.seed.value_or(0));
    o.train.step_size = step_size;
    o.train.epochs = epochs;
    o.train.batch_size = batch_size;
    o.train.l2_penalty = l2;
    o.train.class_weighting = weighting == "none" ? ClassWeighting::none : ClassWeighting::balanced;
    o.train.hidden_width = hidden;
    return o;
  }
};

inline StoreFormat parse_store_format(const std::string& s, const std::filesystem::path& path) {
  if (s.empty()) return format_from_extension(path);
  if (s == "csv") return StoreFormat::csv;
  if (s == "binary" || s == "emb1") return StoreFormat::binary;
  throw FormatError("unknown store format '" + s + "' (expected binary or csv)");
}

inline void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  owr::detail::write_file(path, text);
}

inline void print_violations(const std::vector<Violation>& violations, std::ostream& err) {
  for (const auto& v : violations) err << "violation: " << v.message() << "\n";
}

inline nlohmann::json hierarchy_json(const PartitionHierarchy& h, Metric metric, const EmbeddingStore& store) {
  nlohmann::json parts = nlohmann::json::array();
  for (const auto& p : h.partitions) parts.push_back({{"k", p.k}, {"assignment", p.assignment}});
  std::vector<std::string> ids;
  for (const auto& r : store.rows()) ids.push_back(r.sample_id);
  const auto& selected = select_partition(h);
  const auto level = static_cast<std::size_t>(&selected - h.partitions.data());
  return {{"metric", to_string(metric)}, {"n_points", store.n_rows()}, {"sample_ids", ids},
          {"k_sequence", h.k_sequence()}, {"selected_level", level}, {"partitions", parts}};
}

}  // namespace detail

/// Runs one invocation. `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-world domain identification: FINCH clustering, NCM and linear-head classifiers, BACCU"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "owr 1.0.0");

  // convert
  std::string conv_in, conv_out, conv_from, conv_to;
  auto* convert = app.add_subcommand("convert", "Translate a store between CSV and EMB1");
  convert->add_option("-i,--input", conv_in, "Input store")->required();
  convert->add_option("-o,--output", conv_out, "Output store")->required();
  convert->add_option("--from", conv_from, "Input format (binary|csv; default from extension)");
  convert->add_option("--to", conv_to, "Output format (binary|csv; default from extension)");

  // validate
  std::string val_store, val_manifest, val_from;
  std::vector<std::string> val_exclude;
  auto* validate = app.add_subcommand("validate", "Check a store, and optionally a manifest against it");
  validate->add_option("-s,--store", val_store, "Store to check")->required();
  validate->add_option("-m,--manifest", val_manifest, "Manifest to validate against the store");
  validate->add_option("--format", val_from, "Store format (binary|csv; default from extension)");
  validate->add_option("--exclude-class", val_exclude, "Extra class to exclude from the test side");

  // cluster
  std::string cl_in, cl_out, cl_metric = "euclidean";
  auto* cluster = app.add_subcommand("cluster", "Run FINCH on a store and write the partition hierarchy");
  cluster->add_option("-i,--input", cl_in, "Input store")->required();
  cluster->add_option("-o,--output", cl_out, "Hierarchy JSON");
  cluster->add_option("--metric", cl_metric, "Distance metric")->check(CLI::IsMember({"euclidean", "cosine"}));

  // fit
  std::string fit_manifest, fit_store, fit_approach, fit_out;
  detail::TrainFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "Fit a classifier on a scenario's training side");
  fit->add_option("-m,--manifest", fit_manifest, "Scenario manifest")->required();
  fit->add_option("-s,--store", fit_store, "Embedding store")->required();
  fit->add_option("-a,--approach", fit_approach, "ncm, ncm+finch, fc1 or fc2")->required();
  fit->add_option("-o,--output", fit_out, "Model file (OWRM1)")->required();
  fit_flags.add_to(*fit, true);

  // evaluate
  std::string ev_manifest, ev_store, ev_approach, ev_model, ev_out;
  detail::TrainFlags ev_flags;
  auto* evaluate = app.add_subcommand("evaluate", "Fit (or load) a classifier and score a scenario");
  evaluate->add_option("-m,--manifest", ev_manifest, "Scenario manifest")->required();
  evaluate->add_option("-s,--store", ev_store, "Embedding store")->required();
  auto* ev_approach_opt = evaluate->add_option("-a,--approach", ev_approach, "ncm, ncm+finch, fc1 or fc2");
  evaluate->add_option("--model", ev_model, "Score a previously fitted model instead of fitting")
      ->excludes(ev_approach_opt);
  evaluate->add_option("-o,--output", ev_out, "Report JSON");
  evaluate->add_option("--backbone", ev_flags.backbone, "Backbone tag recorded in the report");
  ev_flags.add_to(*evaluate, true);

  // predict
  std::string pr_model, pr_store, pr_out;
  bool pr_normalize = false;
  auto* predict = app.add_subcommand("predict", "Apply a fitted model to every row of a store");
  predict->add_option("--model", pr_model, "Model file (OWRM1)")->required();
  predict->add_option("-s,--store", pr_store, "Embedding store")->required();
  predict->add_option("-o,--output", pr_out, "CSV of sample_id,prediction");
  predict->add_flag("--l2-normalize", pr_normalize, "Scale every embedding to unit L2 norm first");

  // report
  std::vector<std::string> rep_files;
  std::string rep_format = "text", rep_out;
  auto* report = app.add_subcommand("report", "Tabulate report files by backbone and approach");
  report->add_option("reports", rep_files, "Report JSON files")->required();
  report->add_option("-f,--format", rep_format, "text, csv or json")->check(CLI::IsMember({"text", "csv", "json"}));
  report->add_option("-o,--output", rep_out, "Write the table here instead of stdout");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kIoFailure;
  }

  try {
    if (*convert) {
      const auto store = load_store(conv_in, detail::parse_store_format(conv_from, conv_in));
      save_store(store, conv_out, detail::parse_store_format(conv_to, conv_out));
      out << "converted " << store.n_rows() << " rows x " << store.n_dims() << " dims to " << conv_out << "\n";
      return kOk;
    }

    if (*validate) {
      const auto store = load_store(val_store, detail::parse_store_format(val_from, val_store));
      std::map<std::string, std::map<std::string, std::size_t>> census;
      for (const auto& r : store.rows()) ++census[r.dataset_name][r.class_label];
      out << "rows=" << store.n_rows() << " dims=" << store.n_dims() << "\n";
      for (const auto& [ds, classes] : census)
        for (const auto& [cls, count] : classes) out << ds << "," << cls << "," << count << "\n";
      if (val_manifest.empty()) return kOk;
      auto manifest = load_manifest(val_manifest);
      manifest.exclude_classes.insert(manifest.exclude_classes.end(), val_exclude.begin(), val_exclude.end());
      const auto violations = validate_manifest(manifest, store);
      detail::print_violations(violations, err);
      out << "manifest " << manifest.name << ": " << violations.size() << " violation(s)\n";
      return violations.empty() ? kOk : kDomainFailure;
    }

    if (*cluster) {
      const auto store = load_store(cl_in);
      const Metric metric = parse_metric(cl_metric);
      const auto h = finch(store.matrix(), metric);
      const auto ks = h.k_sequence();
      out << "k_sequence=[";
      for (std::size_t i = 0; i < ks.size(); ++i) out << (i ? "," : "") << ks[i];
      out << "]\n";
      if (!cl_out.empty()) owr::detail::write_file(cl_out, detail::hierarchy_json(h, metric, store).dump(2) + "\n");
      return kOk;
    }

    if (*fit) {
      const auto manifest = load_manifest(fit_manifest);
      const auto store = load_store(fit_store);
      const auto options = fit_flags.options(manifest);
      const auto split = prepare_scenario(manifest, store, options);
      const auto clf = fit_scenario(split, parse_approach(fit_approach), options);
      save_model(clf, fit_out);
      out << "fitted " << approach_tag(clf.approach()) << " on " << split.train_id.n_rows() << " ID + "
          << split.train_ood.n_rows() << " OOD rows\n";
      return kOk;
    }

    if (*evaluate) {
      if (ev_model.empty() && ev_approach.empty()) throw DomainError("evaluate needs --approach or --model");
      const auto manifest = load_manifest(ev_manifest);
      const auto store = load_store(ev_store);
      const auto options = ev_flags.options(manifest);
      const auto split = prepare_scenario(manifest, store, options);
      const auto clf = ev_model.empty() ? fit_scenario(split, parse_approach(ev_approach), options)
                                        : load_model(ev_model);
      const auto rep = score_scenario(manifest, split, clf, options);
      if (!ev_out.empty()) owr::detail::write_file(ev_out, report_to_string(rep));
      out << "baccu=" << format_score(rep.baccu) << "\n";
      return kOk;
    }

    if (*predict) {
      const auto clf = load_model(pr_model);
      auto store = load_store(pr_store);
      if (pr_normalize) store = l2_normalized(store);
      std::string csv = "sample_id,prediction\n";
      std::size_t n_id = 0;
      for (std::size_t i = 0; i < store.n_rows(); ++i) {
        const int p = clf.predict(store.row(i));
        n_id += static_cast<std::size_t>(p);
        owr::detail::csv_append_field(csv, store.meta(i).sample_id);
        csv += p ? ",1\n" : ",0\n";
      }
      if (!pr_out.empty()) owr::detail::write_file(pr_out, csv);
      out << "predicted " << store.n_rows() << " rows: " << n_id << " ID, " << store.n_rows() - n_id << " OOD\n";
      return kOk;
    }

    if (*report) {
      std::vector<EvaluationReport> reports;
      for (const auto& f : rep_files) reports.push_back(load_report(f));
      detail::write_or_print(rep_out, render_report_table(reports, parse_table_format(rep_format)), out);
      return kOk;
    }
  } catch (const ManifestViolationError& e) {
    detail::print_violations(e.violations(), err);
    err << "error: " << e.what() << "\n";
    return kDomainFailure;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kDomainFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  }
  return kIoFailure;
}

}  // namespace owr::cli
