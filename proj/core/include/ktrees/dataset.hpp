#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ktrees/conllu.hpp"
#include "ktrees/matrix.hpp"
#include "ktrees/repr_store.hpp"

namespace ktrees::data {

using conllu::RelationLabel;
using repr::ProbingObject;

/// Raised instead of building a task that cannot be balanced.
class TaskSkipped : public std::runtime_error {
 public:
  enum class Reason { RelationAbsent, NoNegatives, NoPositives };
  TaskSkipped(Reason reason, const std::string& what) : std::runtime_error(what), reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

/// Maps (sentence_id, token_index) to a feature-matrix row.
class RowLookup {
 public:
  explicit RowLookup(const std::vector<repr::RowKey>& index);
  /// Throws DataError when the token has no row.
  std::uint32_t row(const std::string& sentence_id, int token_index) const;
  std::size_t size() const { return rows_.size(); }

 private:
  std::map<repr::RowKey, std::uint32_t, std::less<>> rows_;
};

/// Row selection and labels of one balanced task, independent of the probing
/// object. Rows point into the feature matrix of the split's bundle.
struct TaskRows {
  RelationLabel relation;
  Split split = Split::Train;
  std::vector<std::uint32_t> rows;
  Labels labels;
  std::size_t n_unique_positives = 0;
  std::size_t n_negatives = 0;

  std::size_t size() const { return rows.size(); }
};

/// Positives: every token bearing `relation`. Negatives: every other token of
/// the sentences holding at least one positive. Positives are duplicated
/// uniformly with replacement until both classes have n_negatives rows; the
/// final order is a seeded shuffle.
TaskRows build_task_rows(const std::vector<conllu::Sentence>& sentences, const RowLookup& lookup,
                         const RelationLabel& relation, std::uint64_t seed);

/// Balanced row count for a relation without touching any features.
std::size_t balanced_row_count(const std::vector<conllu::Sentence>& sentences, const RelationLabel& relation);

/// Shared, immutable feature matrix for one split and probing object.
struct FeatureSource {
  std::shared_ptr<const Matrix> matrix;
  ProbingObject kind = ProbingObject::Repr;
  std::string fingerprint;  // content hash of the underlying bundle
};

struct BalancedDataset {
  RelationLabel relation;
  ProbingObject kind = ProbingObject::Repr;
  Split split = Split::Train;
  Matrix features;
  Labels labels;
  std::size_t n_unique_positives = 0;
  std::size_t n_negatives = 0;

  std::size_t rows() const { return labels.size(); }
};

BalancedDataset materialize(const TaskRows& task, const FeatureSource& source);

BalancedDataset build_task_dataset(const std::vector<conllu::Sentence>& sentences, const FeatureSource& view,
                                   const RowLookup& lookup, const RelationLabel& relation, std::uint64_t seed);

/// Content hash of the dataset that materialize(task, source) would produce.
std::string fingerprint(const TaskRows& task, const FeatureSource& source);

enum class SizeBucket { Small, Medium, Large };
const char* to_string(SizeBucket b);
SizeBucket size_bucket_from_string(const std::string& name);

struct BucketRange {
  std::size_t min_rows = 0;
  std::size_t max_rows = 0;
  std::size_t members = 0;
};

struct BucketAssignment {
  std::map<RelationLabel, SizeBucket> bucket;
  std::map<SizeBucket, BucketRange> ranges;
};

/// Tertiles by train row count: sort by (rows, relation), the dataset at rank
/// i of n goes to bucket floor(3 (2i + 1) / (2n)). A single dataset is Medium.
BucketAssignment assign_buckets(const std::vector<std::pair<RelationLabel, std::size_t>>& cohort);

}  // namespace ktrees::data
