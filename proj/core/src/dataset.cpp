#include "ktrees/dataset.hpp"

#include <algorithm>
#include <random>

#include "ktrees/hashing.hpp"

namespace ktrees::data {

RowLookup::RowLookup(const std::vector<repr::RowKey>& index) {
  for (std::size_t i = 0; i < index.size(); ++i) rows_.emplace(index[i], static_cast<std::uint32_t>(i));
}

std::uint32_t RowLookup::row(const std::string& sentence_id, int token_index) const {
  const auto it = rows_.find(repr::RowKey{sentence_id, token_index});
  if (it == rows_.end()) {
    throw DataError("token (" + sentence_id + ", " + std::to_string(token_index) + ") has no representation row");
  }
  return it->second;
}

namespace {

struct TokenSplit {
  std::vector<const conllu::Token*> positives;
  std::vector<const conllu::Token*> negatives;
};

TokenSplit collect(const std::vector<conllu::Sentence>& sentences, const RelationLabel& relation) {
  TokenSplit out;
  for (const auto& s : sentences) {
    const bool has_positive =
        std::any_of(s.tokens.begin(), s.tokens.end(), [&](const conllu::Token& t) { return t.deprel == relation; });
    if (!has_positive) continue;
    for (const auto& t : s.tokens) (t.deprel == relation ? out.positives : out.negatives).push_back(&t);
  }
  return out;
}

}  // namespace

std::size_t balanced_row_count(const std::vector<conllu::Sentence>& sentences, const RelationLabel& relation) {
  return 2 * collect(sentences, relation).negatives.size();
}

TaskRows build_task_rows(const std::vector<conllu::Sentence>& sentences, const RowLookup& lookup,
                         const RelationLabel& relation, std::uint64_t seed) {
  const auto tokens = collect(sentences, relation);
  if (tokens.positives.empty()) {
    throw TaskSkipped(TaskSkipped::Reason::RelationAbsent, "relation '" + relation + "' does not occur");
  }
  if (tokens.negatives.empty()) {
    throw TaskSkipped(TaskSkipped::Reason::NoNegatives, "relation '" + relation + "' has no negative examples");
  }

  std::vector<std::uint32_t> positive_rows;
  for (const auto* t : tokens.positives) positive_rows.push_back(lookup.row(t->sentence_id, t->token_index));
  std::vector<std::uint32_t> negative_rows;
  for (const auto* t : tokens.negatives) negative_rows.push_back(lookup.row(t->sentence_id, t->token_index));

  std::mt19937_64 rng(seed);
  const auto n_neg = negative_rows.size();
  std::vector<std::uint32_t> balanced_pos;
  if (positive_rows.size() <= n_neg) {
    balanced_pos = positive_rows;
    std::uniform_int_distribution<std::size_t> pick(0, positive_rows.size() - 1);
    while (balanced_pos.size() < n_neg) balanced_pos.push_back(positive_rows[pick(rng)]);
  } else {
    // More positives than negatives: keep a seeded subset so every negative
    // still appears exactly once.
    balanced_pos = positive_rows;
    std::shuffle(balanced_pos.begin(), balanced_pos.end(), rng);
    balanced_pos.resize(n_neg);
  }

  std::vector<std::pair<std::uint32_t, std::uint8_t>> rows;
  rows.reserve(2 * n_neg);
  for (auto r : balanced_pos) rows.emplace_back(r, 1);
  for (auto r : negative_rows) rows.emplace_back(r, 0);
  std::shuffle(rows.begin(), rows.end(), rng);

  TaskRows out;
  out.relation = relation;
  out.split = sentences.empty() ? Split::Train : sentences.front().split;
  out.n_unique_positives = positive_rows.size();
  out.n_negatives = n_neg;
  out.rows.reserve(rows.size());
  out.labels.reserve(rows.size());
  for (const auto& [r, y] : rows) {
    out.rows.push_back(r);
    out.labels.push_back(y);
  }
  return out;
}

BalancedDataset materialize(const TaskRows& task, const FeatureSource& source) {
  BalancedDataset ds;
  ds.relation = task.relation;
  ds.kind = source.kind;
  ds.split = task.split;
  ds.labels = task.labels;
  ds.n_unique_positives = task.n_unique_positives;
  ds.n_negatives = task.n_negatives;
  const auto& m = *source.matrix;
  ds.features.resize(static_cast<Eigen::Index>(task.rows.size()), m.cols());
  for (std::size_t i = 0; i < task.rows.size(); ++i) {
    if (task.rows[i] >= m.rows()) throw DataError("task row out of range of the feature matrix");
    ds.features.row(static_cast<Eigen::Index>(i)) = m.row(task.rows[i]);
  }
  return ds;
}

BalancedDataset build_task_dataset(const std::vector<conllu::Sentence>& sentences, const FeatureSource& view,
                                   const RowLookup& lookup, const RelationLabel& relation, std::uint64_t seed) {
  return materialize(build_task_rows(sentences, lookup, relation, seed), view);
}

std::string fingerprint(const TaskRows& task, const FeatureSource& source) {
  Sha256 h;
  h.field("balanced-dataset/1")
      .field(source.fingerprint)
      .field(repr::to_string(source.kind))
      .field(task.relation)
      .field(ktrees::to_string(task.split))
      .field(static_cast<std::uint64_t>(task.rows.size()));
  h.pod(std::span<const std::uint32_t>(task.rows));
  h.pod(std::span<const std::uint8_t>(task.labels));
  return h.hex_digest();
}

const char* to_string(SizeBucket b) {
  switch (b) {
    case SizeBucket::Small: return "small";
    case SizeBucket::Medium: return "medium";
    case SizeBucket::Large: return "large";
  }
  return "?";
}

SizeBucket size_bucket_from_string(const std::string& name) {
  if (name == "small") return SizeBucket::Small;
  if (name == "medium") return SizeBucket::Medium;
  if (name == "large") return SizeBucket::Large;
  throw ConfigError("unknown size bucket '" + name + "'");
}

BucketAssignment assign_buckets(const std::vector<std::pair<RelationLabel, std::size_t>>& cohort) {
  auto sorted = cohort;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return std::tie(a.second, a.first) < std::tie(b.second, b.first); });
  BucketAssignment out;
  const auto n = sorted.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto tier = (3 * (2 * i + 1)) / (2 * n);
    const auto bucket = static_cast<SizeBucket>(std::min<std::size_t>(tier, 2));
    out.bucket[sorted[i].first] = bucket;
    auto [it, fresh] = out.ranges.try_emplace(bucket, BucketRange{sorted[i].second, sorted[i].second, 0});
    auto& range = it->second;
    range.min_rows = std::min(range.min_rows, sorted[i].second);
    range.max_rows = std::max(range.max_rows, sorted[i].second);
    ++range.members;
  }
  return out;
}

}  // namespace ktrees::data
