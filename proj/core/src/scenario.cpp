#include <sstream>

#include "ktrees/stats.hpp"

namespace ktrees::stats {

using data::SizeBucket;

std::vector<Scenario> preset_scenarios() {
  return {
      {"all_100", std::nullopt, std::nullopt},
      {"all_98", 0.98, std::nullopt},
      {"medium_98", 0.98, std::set{SizeBucket::Medium}},
      {"medium_large_98", 0.98, std::set{SizeBucket::Medium, SizeBucket::Large}},
      {"large_98", 0.98, std::set{SizeBucket::Large}},
  };
}

Scenario parse_scenario(const std::string& text) {
  for (auto& s : preset_scenarios())
    if (s.name == text) return s;
  const auto slash = text.find('/');
  if (slash == std::string::npos) throw ConfigError("unknown scenario '" + text + "'");
  Scenario out;
  out.name = text;
  const auto cap = text.substr(0, slash);
  if (cap != "none") {
    std::size_t used = 0;
    try {
      out.lr_cap = std::stod(cap, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != cap.size() || *out.lr_cap < 0.0 || *out.lr_cap > 1.0)
      throw ConfigError("scenario cap must be 'none' or a number in [0, 1]: '" + cap + "'");
  }
  const auto list = text.substr(slash + 1);
  if (list != "all") {
    std::set<SizeBucket> buckets;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, '+');) buckets.insert(data::size_bucket_from_string(item));
    if (buckets.empty()) throw ConfigError("scenario '" + text + "' lists no buckets");
    out.buckets = std::move(buckets);
  }
  return out;
}

AccuracyTable scenario_filter(const AccuracyTable& table, const Scenario& scenario,
                              const std::map<std::string, SizeBucket>& buckets) {
  const auto base = table.row_index(kBaselineName);
  if (!base) throw ConfigError("accuracy table has no " + std::string(kBaselineName) + " row");
  std::vector<std::size_t> keep;
  for (std::size_t t = 0; t < table.tasks.size(); ++t) {
    if (scenario.lr_cap && table.cells[*base][t] > *scenario.lr_cap) continue;
    if (scenario.buckets) {
      const auto it = buckets.find(table.tasks[t]);
      if (it == buckets.end()) throw DataError("task '" + table.tasks[t] + "' has no size bucket");
      if (!scenario.buckets->contains(it->second)) continue;
    }
    keep.push_back(t);
  }
  if (keep.size() < kMinTasks) {
    throw ScenarioTooSmall(keep.size(), "scenario " + scenario.name + " retains " + std::to_string(keep.size()) +
                                            " tasks, fewer than " + std::to_string(kMinTasks));
  }
  AccuracyTable out;
  out.rows = table.rows;
  for (auto t : keep) out.tasks.push_back(table.tasks[t]);
  out.cells.resize(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    for (auto t : keep) out.cells[r].push_back(table.cells[r][t]);
  return out;
}

}  // namespace ktrees::stats
