#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "owr/classifiers.hpp"
#include "owr/embedding_store.hpp"
#include "owr/error.hpp"
#include "owr/metrics.hpp"

namespace owr {

/// Named experiment: which datasets feed training and testing on each side.
/// `exclude_classes` drops the listed classes from the test side only.
struct ScenarioManifest {
  std::string name;
  std::vector<std::string> train_id;
  std::vector<std::string> train_ood;
  std::vector<std::string> test_id;
  std::vector<std::string> test_ood;
  std::vector<std::string> exclude_classes;
  std::optional<std::uint64_t> seed;

  bool operator==(const ScenarioManifest&) const = default;
};

inline ScenarioManifest manifest_from_json(const nlohmann::json& j) {
  try {
    ScenarioManifest m;
    m.name = j.at("name").get<std::string>();
    m.train_id = j.at("train").at("id").get<std::vector<std::string>>();
    m.train_ood = j.at("train").at("ood").get<std::vector<std::string>>();
    m.test_id = j.at("test").at("id").get<std::vector<std::string>>();
    m.test_ood = j.at("test").at("ood").get<std::vector<std::string>>();
    if (j.contains("exclude_classes")) m.exclude_classes = j.at("exclude_classes").get<std::vector<std::string>>();
    if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

inline nlohmann::json to_json(const ScenarioManifest& m) {
  nlohmann::json j{{"name", m.name},
                   {"train", {{"id", m.train_id}, {"ood", m.train_ood}}},
                   {"test", {{"id", m.test_id}, {"ood", m.test_ood}}}};
  if (!m.exclude_classes.empty()) j["exclude_classes"] = m.exclude_classes;
  if (m.seed) j["seed"] = *m.seed;
  return j;
}

inline ScenarioManifest load_manifest(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    return manifest_from_json(j);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  enum class Kind { empty_list, train_test_overlap, domain_overlap };

  Kind kind;
  std::string class_label;  // empty for empty_list
  std::string first_list;
  std::string second_list;  // empty for empty_list

  std::string message() const {
    if (kind == Kind::empty_list) return "dataset list " + first_list + " is empty";
    return "class '" + class_label + "' appears in both " + first_list + " and " + second_list;
  }

  bool operator==(const Violation&) const = default;
};

class ManifestViolationError : public DomainError {
public:
  explicit ManifestViolationError(std::vector<Violation> violations)
      : DomainError(summary(violations)), violations_(std::move(violations)) {}

  const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
  static std::string summary(const std::vector<Violation>& v) {
    std::string s = "manifest violates the class-disjointness rules (" + std::to_string(v.size()) + " violation" +
                    (v.size() == 1 ? "" : "s") + ")";
    if (!v.empty()) s += ": " + v.front().message();
    return s;
  }

  std::vector<Violation> violations_;
};

namespace detail {

struct SideLists {
  std::string_view label;
  const std::vector<std::string>* datasets;
  bool test_side;
};

inline std::array<SideLists, 4> side_lists(const ScenarioManifest& m) {
  return {{{"train.id", &m.train_id, false},
           {"train.ood", &m.train_ood, false},
           {"test.id", &m.test_id, true},
           {"test.ood", &m.test_ood, true}}};
}

}  // namespace detail

/// Checks the manifest against the class labels actually present in `store`.
/// Throws DomainError when a listed dataset has no rows in the store.
inline std::vector<Violation> validate_manifest(const ScenarioManifest& m, const EmbeddingStore& store) {
  const std::set<std::string> present = dataset_set(store);
  const std::set<std::string> excluded(m.exclude_classes.begin(), m.exclude_classes.end());
  const auto lists = detail::side_lists(m);

  std::vector<Violation> out;
  std::array<std::set<std::string>, 4> classes;
  for (std::size_t s = 0; s < lists.size(); ++s) {
    const auto& side = lists[s];
    if (side.datasets->empty()) out.push_back({Violation::Kind::empty_list, "", std::string(side.label), ""});
    for (const std::string& ds : *side.datasets)
      if (!present.count(ds))
        throw DomainError("dataset '" + ds + "' listed in " + std::string(side.label) + " is absent from the store");
    const std::set<std::string> names(side.datasets->begin(), side.datasets->end());
    for (const RowMeta& r : store.rows())
      if (names.count(r.dataset_name) && !(side.test_side && excluded.count(r.class_label)))
        classes[s].insert(r.class_label);
  }

  // Index pairs into side_lists: the two train/test splits, then every ID/OOD pairing.
  constexpr std::array<std::pair<std::size_t, std::size_t>, 6> pairs{{{0, 2}, {1, 3}, {0, 1}, {0, 3}, {2, 1}, {2, 3}}};
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [a, b] = pairs[p];
    const auto kind = p < 2 ? Violation::Kind::train_test_overlap : Violation::Kind::domain_overlap;
    std::vector<std::string> common;
    std::set_intersection(classes[a].begin(), classes[a].end(), classes[b].begin(), classes[b].end(),
                          std::back_inserter(common));
    for (std::string& c : common)
      out.push_back({kind, std::move(c), std::string(lists[a].label), std::string(lists[b].label)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct EvaluationReport {
  std::string scenario;
  std::string approach;
  std::string backbone;
  std::uint64_t seed = 0;
  ConfusionCounts confusion;
  double baccu = 0.0;
  std::map<std::string, ConfusionCounts> per_dataset;

  bool operator==(const EvaluationReport&) const = default;
};

inline nlohmann::json to_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"tn", c.tn}, {"p", c.p}, {"n", c.n}};
}

inline ConfusionCounts confusion_from_json(const nlohmann::json& j) {
  return {j.at("tp").get<std::uint64_t>(), j.at("tn").get<std::uint64_t>(), j.at("p").get<std::uint64_t>(),
          j.at("n").get<std::uint64_t>()};
}

inline nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [name, c] : r.per_dataset) per[name] = to_json(c);
  return {{"scenario", r.scenario}, {"approach", r.approach}, {"backbone", r.backbone}, {"seed", r.seed},
          {"confusion", to_json(r.confusion)}, {"baccu", r.baccu}, {"per_dataset", per}};
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  try {
    EvaluationReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.approach = j.at("approach").get<std::string>();
    r.backbone = j.at("backbone").get<std::string>();
    r.seed = j.value("seed", std::uint64_t{0});
    r.confusion = confusion_from_json(j.at("confusion"));
    r.baccu = j.at("baccu").get<double>();
    for (const auto& [name, c] : j.at("per_dataset").items()) r.per_dataset[name] = confusion_from_json(c);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

/// Canonical report serialization; equal reports produce identical bytes.
inline std::string report_to_string(const EvaluationReport& r) { return to_json(r).dump(2) + "\n"; }

inline EvaluationReport load_report(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  try {
    return report_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Scenario execution
// ---------------------------------------------------------------------------

struct RunOptions {
  Metric metric = Metric::euclidean;
  TrainConfig train;  // train.seed is the run seed
  std::string backbone = "unknown";
  bool allow_overlap = false;
  bool l2_normalize = false;
};

struct ScenarioSplit {
  EmbeddingStore train_id;
  EmbeddingStore train_ood;
  EmbeddingStore test;  // test.id rows then test.ood rows
  std::vector<int> truths;
};

namespace detail {

/// Rows sorted by sample_id, so results do not depend on the store's row order.
inline EmbeddingStore canonical_order(const EmbeddingStore& s) {
  std::vector<std::size_t> idx(s.n_rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return s.meta(a).sample_id < s.meta(b).sample_id; });
  return subset(s, idx);
}

inline std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace detail

/// Builds the train and test sides of a scenario. Excluded classes leave the test side.
inline ScenarioSplit split_scenario(const ScenarioManifest& m, const EmbeddingStore& store) {
  const std::set<std::string> excluded = detail::as_set(m.exclude_classes);
  const std::set<std::string> test_id = detail::as_set(m.test_id);
  const std::set<std::string> test_ood = detail::as_set(m.test_ood);
  ScenarioSplit s;
  s.train_id = detail::canonical_order(select_by_datasets(store, detail::as_set(m.train_id)));
  s.train_ood = detail::canonical_order(select_by_datasets(store, detail::as_set(m.train_ood)));
  const auto test_rows = [&](const std::set<std::string>& names, const std::set<std::string>& skip) {
    return detail::canonical_order(filter_rows(store, [&](const RowMeta& r) {
      return names.count(r.dataset_name) && !skip.count(r.dataset_name) && !excluded.count(r.class_label);
    }));
  };
  // A dataset listed on both test sides counts as ID.
  const EmbeddingStore id_rows = test_rows(test_id, {});
  const EmbeddingStore ood_rows = test_rows(test_ood, test_id);
  s.test = concat(id_rows, ood_rows);
  s.truths.assign(id_rows.n_rows(), 1);
  s.truths.insert(s.truths.end(), ood_rows.n_rows(), 0);
  return s;
}

/// Validated, optionally normalized split. Throws ManifestViolationError unless the
/// manifest is clean or `options.allow_overlap` is set.
inline ScenarioSplit prepare_scenario(const ScenarioManifest& m, const EmbeddingStore& store,
                                      const RunOptions& options) {
  std::vector<Violation> violations = validate_manifest(m, store);
  if (!violations.empty() && !options.allow_overlap) throw ManifestViolationError(std::move(violations));
  ScenarioSplit split = split_scenario(m, store);
  if (options.l2_normalize) {
    split.train_id = l2_normalized(split.train_id);
    split.train_ood = l2_normalized(split.train_ood);
    split.test = l2_normalized(split.test);
  }
  return split;
}

inline DomainClassifier fit_scenario(const ScenarioSplit& split, Approach approach, const RunOptions& options) {
  return fit_classifier(approach, split.train_id, split.train_ood, options.metric, options.train);
}

/// Scores every test row of the split. The classifier sees query vectors only.
inline EvaluationReport score_scenario(const ScenarioManifest& m, const ScenarioSplit& split,
                                       const DomainClassifier& clf, const RunOptions& options) {
  if (!split.test.empty() && split.test.n_dims() != clf.n_dims())
    throw DomainError("model expects " + std::to_string(clf.n_dims()) + " dims, store has " +
                      std::to_string(split.test.n_dims()));
  EvaluationReport report;
  report.scenario = m.name;
  report.approach = std::string(approach_tag(clf.approach()));
  report.backbone = options.backbone;
  report.seed = options.train.seed;
  for (std::size_t i = 0; i < split.test.n_rows(); ++i) {
    const int pred = clf.predict(split.test.row(i));
    report.confusion.add(pred, split.truths[i]);
    report.per_dataset[split.test.meta(i).dataset_name].add(pred, split.truths[i]);
  }
  ConfusionCounts total;
  for (const auto& [name, c] : report.per_dataset) total += c;
  if (!(total == report.confusion)) throw Error("per-dataset counts do not sum to the overall counts");
  report.baccu = baccu(report.confusion);
  return report;
}

/// Fits `approach` on the training side and scores every test row.
inline EvaluationReport run_scenario(const ScenarioManifest& m, const EmbeddingStore& store, Approach approach,
                                     const RunOptions& options = {}) {
  const ScenarioSplit split = prepare_scenario(m, store, options);
  return score_scenario(m, split, fit_scenario(split, approach, options), options);
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

enum class TableFormat { text, csv, json };

inline TableFormat parse_table_format(std::string_view s) {
  if (s == "text") return TableFormat::text;
  if (s == "csv") return TableFormat::csv;
  if (s == "json") return TableFormat::json;
  throw DomainError("unknown table format '" + std::string(s) + "' (expected text, csv or json)");
}

inline std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

/// One row per (backbone, scenario), sorted; one column per approach present, in
/// the order NCM, NCM+FINCH, FC1, FC2 (unknown tags after, sorted). A repeated
/// cell keeps the last report. JSON output is the report list itself.
inline std::string render_report_table(const std::vector<EvaluationReport>& reports, TableFormat format) {
  if (format == TableFormat::json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(to_json(r));
    return arr.dump(2) + "\n";
  }

  const std::vector<std::string> known{"NCM", "NCM+FINCH", "FC1", "FC2"};
  std::set<std::string> present;
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> cells;
  for (const auto& r : reports) {
    present.insert(r.approach);
    cells[{r.backbone, r.scenario}][r.approach] = r.baccu;
  }
  std::vector<std::string> columns;
  for (const auto& k : known)
    if (present.count(k)) columns.push_back(k);
  for (const auto& p : present)
    if (std::find(known.begin(), known.end(), p) == known.end()) columns.push_back(p);

  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"backbone", "scenario"};
  header.insert(header.end(), columns.begin(), columns.end());
  grid.push_back(header);
  for (const auto& [key, by_approach] : cells) {
    std::vector<std::string> line{key.first, key.second};
    for (const auto& c : columns) {
      auto it = by_approach.find(c);
      line.push_back(it == by_approach.end() ? "-" : format_score(it->second));
    }
    grid.push_back(std::move(line));
  }

  std::string out;
  if (format == TableFormat::csv) {
    for (const auto& line : grid) {
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (i) out.push_back(',');
        detail::csv_append_field(out, line[i]);
      }
      out.push_back('\n');
    }
    return out;
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : grid)
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  for (const auto& line : grid) {
    std::string text;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) text += "  ";
      text += line[i];
      if (i + 1 < line.size()) text.append(width[i] - line[i].size(), ' ');
    }
    out += text + "\n";
  }
  return out;
}

}  // namespace owr
