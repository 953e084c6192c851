// SPDX-License-Identifier: Apache-2.0
//
// Zero-shot classification with a weight matrix and group-robustness metrics.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dcca/embedding_store.hpp"
#include "json.hpp"

namespace dcca {

struct GroupedEvalSet {
  EmbeddingMatrix images;  // m x d
  std::vector<std::size_t> labels;
  std::vector<std::size_t> groups;
  std::vector<std::string> group_names;

  /// Throws InvalidEvalSet when the arrays disagree or indices are out of range.
  void validate(std::size_t n_classes) const;
};

struct GroupMetrics {
  std::string name;
  std::optional<double> acc;  // percent; nullopt when the group has no samples
  std::size_t count = 0;
  std::size_t correct = 0;
};

struct MetricsReport {
  double avg_acc = 0.0;  // percent, sample-weighted
  double worst_acc = 0.0;
  double gap = 0.0;
  std::vector<GroupMetrics> groups;
  std::string config_digest;
  std::string aggregation;  // "none", "max" or "mean"

  /// Builds a report from already-known accuracies (percent). worst and gap
  /// follow from the per-group values.
  static MetricsReport from_accuracies(double avg_acc, const std::vector<GroupMetrics>& groups);

  std::vector<std::string> empty_groups() const;
  nlohmann::json to_json() const;
};

/// argmax_y (w f_v)_y; ties go to the lowest index.
std::size_t classify(const Matrix& w, const Eigen::Ref<const Vector>& f_v);

/// Predictions for every row of `images`.
std::vector<std::size_t> classify_rows(const Matrix& w, const Matrix& images);

MetricsReport report_from_predictions(const std::vector<std::size_t>& predictions,
                                      const GroupedEvalSet& eval_set);

MetricsReport evaluate(const Matrix& w, const GroupedEvalSet& eval_set);

// Contextual-attribute expansion.

enum class Aggregation { Max, Mean };

std::string_view aggregation_name(Aggregation a);
Aggregation parse_aggregation(std::string_view name);

struct AttributeSpec {
  std::vector<std::string> attribute_values;
  Aggregation aggregation = Aggregation::Max;
};

struct ExpandedClasses {
  std::vector<std::string> names;       // "<class> <attribute>", class-major
  std::vector<std::size_t> row_class;  // expanded row -> class index
  std::size_t n_classes = 0;
};

ExpandedClasses expand_with_attributes(const std::vector<std::string>& class_names,
                                       const AttributeSpec& attr);

/// Reduces expanded-row scores (one per expanded row) to class scores.
Vector aggregate_scores(const Vector& expanded_scores, const ExpandedClasses& expanded,
                        Aggregation aggregation);

/// Classification through an expanded head: scores rows, aggregates per
/// class, then argmax with the lowest-index tie rule.
std::vector<std::size_t> classify_rows_expanded(const Matrix& w_expanded, const Matrix& images,
                                                const ExpandedClasses& expanded,
                                                Aggregation aggregation);

/// Class-major expansion map for `n_classes` blocks of `attr_count` rows.
ExpandedClasses uniform_expansion(std::size_t n_classes, std::size_t attr_count);

// Label/group files: JSON {"labels": [...], "groups": [...], "group_names": [...]}
// or CSV with header "index,label,group".
struct LabelFile {
  std::vector<std::size_t> labels;
  std::vector<std::size_t> groups;
  std::vector<std::string> group_names;  // may be empty for CSV input
};

LabelFile read_labels(const std::filesystem::path& path);
void write_labels_csv(const LabelFile& labels, const std::filesystem::path& path);
void write_labels_json(const LabelFile& labels, const std::filesystem::path& path);

/// Group id for the label x attribute cross product.
inline std::size_t cross_group(std::size_t label, std::size_t attribute, std::size_t n_attributes) {
  return label * n_attributes + attribute;
}

}  // namespace dcca
