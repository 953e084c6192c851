// SPDX-License-Identifier: Apache-2.0

#include "dcca/eval.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "dcca/error.hpp"

namespace dcca {

void GroupedEvalSet::validate(std::size_t n_classes) const {
  images.validate();
  const auto m = static_cast<std::size_t>(images.matrix.rows());
  if (m == 0) throw_data("InvalidEvalSet", "evaluation set is empty");
  if (labels.size() != m || groups.size() != m) {
    throw_data("InvalidEvalSet", "eval set has " + std::to_string(m) + " images, " +
                                     std::to_string(labels.size()) + " labels and " +
                                     std::to_string(groups.size()) + " group ids");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] >= n_classes) {
      throw_data("InvalidEvalSet", "label " + std::to_string(labels[i]) + " at row " +
                                       std::to_string(i) + " is not below n = " +
                                       std::to_string(n_classes));
    }
    if (groups[i] >= group_names.size()) {
      throw_data("InvalidEvalSet", "group " + std::to_string(groups[i]) + " at row " +
                                       std::to_string(i) + " has no declared name");
    }
  }
}

MetricsReport MetricsReport::from_accuracies(double avg_acc, const std::vector<GroupMetrics>& groups) {
  MetricsReport r;
  r.avg_acc = avg_acc;
  r.groups = groups;
  r.aggregation = "none";
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& g : groups) {
    if (g.acc) worst = std::min(worst, *g.acc);
  }
  if (worst == std::numeric_limits<double>::infinity()) {
    throw_data("EmptyGroup", "no group has any samples");
  }
  r.worst_acc = worst;
  r.gap = r.avg_acc - r.worst_acc;
  return r;
}

std::vector<std::string> MetricsReport::empty_groups() const {
  std::vector<std::string> out;
  for (const auto& g : groups) {
    if (!g.acc) out.push_back(g.name);
  }
  return out;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json groups_json = nlohmann::json::array();
  for (const auto& g : groups) {
    if (!g.acc) continue;
    groups_json.push_back({{"name", g.name}, {"acc", *g.acc}, {"count", g.count}});
  }
  return {{"avg", avg_acc},
          {"worst", worst_acc},
          {"gap", gap},
          {"groups", groups_json},
          {"empty_groups", empty_groups()},
          {"aggregation", aggregation},
          {"config_digest", config_digest}};
}

std::size_t classify(const Matrix& w, const Eigen::Ref<const Vector>& f_v) {
  if (w.cols() != f_v.size()) {
    throw_data("ShapeMismatch", "head has " + std::to_string(w.cols()) +
                                    " columns, image embedding has " + std::to_string(f_v.size()));
  }
  const Vector scores = w * f_v;
  std::size_t best = 0;
  for (Index y = 1; y < scores.size(); ++y) {
    if (scores(y) > scores(static_cast<Index>(best))) best = static_cast<std::size_t>(y);
  }
  return best;
}

std::vector<std::size_t> classify_rows(const Matrix& w, const Matrix& images) {
  if (w.cols() != images.cols()) {
    throw_data("ShapeMismatch", "head has " + std::to_string(w.cols()) +
                                    " columns, images have " + std::to_string(images.cols()));
  }
  std::vector<std::size_t> out(static_cast<std::size_t>(images.rows()));
  for (Index i = 0; i < images.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = classify(w, images.row(i).transpose());
  }
  return out;
}

MetricsReport report_from_predictions(const std::vector<std::size_t>& predictions,
                                      const GroupedEvalSet& eval_set) {
  if (predictions.size() != eval_set.labels.size()) {
    throw_data("ShapeMismatch", "prediction count differs from label count");
  }
  std::vector<GroupMetrics> groups(eval_set.group_names.size());
  for (std::size_t g = 0; g < groups.size(); ++g) groups[g].name = eval_set.group_names[g];
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    auto& g = groups[eval_set.groups[i]];
    ++g.count;
    if (predictions[i] == eval_set.labels[i]) {
      ++g.correct;
      ++correct;
    }
  }
  for (auto& g : groups) {
    if (g.count > 0) g.acc = 100.0 * static_cast<double>(g.correct) / static_cast<double>(g.count);
  }
  const double avg = 100.0 * static_cast<double>(correct) / static_cast<double>(predictions.size());
  return MetricsReport::from_accuracies(avg, groups);
}

MetricsReport evaluate(const Matrix& w, const GroupedEvalSet& eval_set) {
  require_valid(w, "evaluate head");
  eval_set.validate(static_cast<std::size_t>(w.rows()));
  return report_from_predictions(classify_rows(w, eval_set.images.matrix), eval_set);
}

std::string_view aggregation_name(Aggregation a) { return a == Aggregation::Mean ? "mean" : "max"; }

Aggregation parse_aggregation(std::string_view name) {
  if (name == "max") return Aggregation::Max;
  if (name == "mean") return Aggregation::Mean;
  throw_usage("InvalidArgument", "unknown aggregation '" + std::string(name) + "'");
}

ExpandedClasses expand_with_attributes(const std::vector<std::string>& class_names,
                                       const AttributeSpec& attr) {
  if (class_names.size() < 2) throw_data("TooFewClasses", "need at least two classes");
  if (attr.attribute_values.empty()) throw_data("EmptyAttributes", "attribute list is empty");
  ExpandedClasses out;
  out.n_classes = class_names.size();
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    for (const auto& value : attr.attribute_values) {
      out.names.push_back(class_names[c] + " " + value);
      out.row_class.push_back(c);
    }
  }
  return out;
}

ExpandedClasses uniform_expansion(std::size_t n_classes, std::size_t attr_count) {
  if (attr_count == 0) throw_data("EmptyAttributes", "attribute count must be >= 1");
  ExpandedClasses out;
  out.n_classes = n_classes;
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t a = 0; a < attr_count; ++a) out.row_class.push_back(c);
  }
  return out;
}

Vector aggregate_scores(const Vector& expanded_scores, const ExpandedClasses& expanded,
                        Aggregation aggregation) {
  if (static_cast<std::size_t>(expanded_scores.size()) != expanded.row_class.size()) {
    throw_data("ShapeMismatch", "score vector does not match the expansion map");
  }
  Vector out = Vector::Constant(static_cast<Index>(expanded.n_classes),
                                aggregation == Aggregation::Max
                                    ? -std::numeric_limits<double>::infinity()
                                    : 0.0);
  std::vector<std::size_t> counts(expanded.n_classes, 0);
  for (std::size_t r = 0; r < expanded.row_class.size(); ++r) {
    const auto c = static_cast<Index>(expanded.row_class[r]);
    const double s = expanded_scores(static_cast<Index>(r));
    if (aggregation == Aggregation::Max) {
      out(c) = std::max(out(c), s);
    } else {
      out(c) += s;
    }
    ++counts[expanded.row_class[r]];
  }
  if (aggregation == Aggregation::Mean) {
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] > 0) out(static_cast<Index>(c)) /= static_cast<double>(counts[c]);
    }
  }
  return out;
}

std::vector<std::size_t> classify_rows_expanded(const Matrix& w_expanded, const Matrix& images,
                                                const ExpandedClasses& expanded,
                                                Aggregation aggregation) {
  if (static_cast<std::size_t>(w_expanded.rows()) != expanded.row_class.size()) {
    throw_data("ShapeMismatch", "expanded head has " + std::to_string(w_expanded.rows()) +
                                    " rows, expansion map has " +
                                    std::to_string(expanded.row_class.size()));
  }
  if (w_expanded.cols() != images.cols()) {
    throw_data("ShapeMismatch", "head and image dimensions differ");
  }
  const Matrix scores = images * w_expanded.transpose();
  std::vector<std::size_t> out(static_cast<std::size_t>(images.rows()));
  for (Index i = 0; i < images.rows(); ++i) {
    const Vector class_scores = aggregate_scores(scores.row(i).transpose(), expanded, aggregation);
    std::size_t best = 0;
    for (Index y = 1; y < class_scores.size(); ++y) {
      if (class_scores(y) > class_scores(static_cast<Index>(best))) best = static_cast<std::size_t>(y);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

LabelFile read_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("IoError", "cannot open " + path.string());
  LabelFile out;
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      out.labels = j.at("labels").get<std::vector<std::size_t>>();
      out.groups = j.at("groups").get<std::vector<std::size_t>>();
      if (j.contains("group_names")) out.group_names = j["group_names"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw_data("InputParseError", path.string() + ": " + e.what());
    }
    return out;
  }

  std::string line;
  if (!std::getline(in, line)) throw_data("InputParseError", path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "index,label,group") {
    throw_data("InputParseError", path.string() + ": expected header 'index,label,group'");
  }
  std::size_t expected_index = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t index = 0, label = 0, group = 0;
    char c1 = 0, c2 = 0;
    if (!(row >> index >> c1 >> label >> c2 >> group) || c1 != ',' || c2 != ',') {
      throw_data("InputParseError", path.string() + ": bad row '" + line + "'");
    }
    if (index != expected_index) {
      throw_data("InputParseError", path.string() + ": rows must be listed in index order");
    }
    ++expected_index;
    out.labels.push_back(label);
    out.groups.push_back(group);
  }
  return out;
}

void write_labels_csv(const LabelFile& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("IoError", "cannot open " + path.string() + " for writing");
  out << "index,label,group\n";
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    out << i << ',' << labels.labels[i] << ',' << labels.groups[i] << '\n';
  }
}

void write_labels_json(const LabelFile& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("IoError", "cannot open " + path.string() + " for writing");
  out << nlohmann::json{{"labels", labels.labels},
                        {"groups", labels.groups},
                        {"group_names", labels.group_names}}
             .dump()
      << '\n';
}

}  // namespace dcca
