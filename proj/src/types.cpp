#include "watchsim/types.hpp"

#include <cmath>
#include <set>

#include "watchsim/errors.hpp"

namespace watchsim {

void validate_record(const InteractionRecord& rec) {
  if (rec.user_id.empty()) throw ValidationError("record field user_id is empty");
  if (rec.item_id.empty()) throw ValidationError("record field item_id is empty");
  if (!std::isfinite(rec.timestamp)) {
    throw ValidationError("record field timestamp is not finite");
  }
  if (!(rec.watch_time >= 0.0) || !std::isfinite(rec.watch_time)) {
    throw ValidationError("record field watch_time must be >= 0");
  }
  if (!(rec.video_length > 0.0) || !std::isfinite(rec.video_length)) {
    throw ValidationError("record field video_length must be > 0");
  }
  if (rec.click != 0 && rec.click != 1) {
    throw ValidationError("record field click must be 0 or 1");
  }
  if (rec.categories.empty() || rec.categories.size() > 3) {
    throw ValidationError("record field categories must hold 1-3 labels");
  }
  for (const auto& c : rec.categories) {
    if (c.empty()) throw ValidationError("record field categories holds an empty label");
  }
}

std::size_t Dataset::record_count() const {
  std::size_t n = 0;
  for (const auto& s : sessions) n += s.records.size();
  return n;
}

std::vector<std::string> Dataset::user_ids() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& s : sessions) {
    if (seen.insert(s.user_id).second) out.push_back(s.user_id);
  }
  return out;
}

std::map<std::string, std::size_t> Dataset::views_per_user() const {
  std::map<std::string, std::size_t> out;
  for (const auto& s : sessions) out[s.user_id] += s.records.size();
  return out;
}

std::vector<InteractionRecord> Dataset::flatten() const {
  std::vector<InteractionRecord> out;
  out.reserve(record_count());
  for (const auto& s : sessions) {
    out.insert(out.end(), s.records.begin(), s.records.end());
  }
  return out;
}

UserGroup classify_user_group(std::size_t views, const GroupThresholds& t) {
  if (views >= t.high_min) return UserGroup::high;
  if (views >= t.medium_min) return UserGroup::medium;
  return UserGroup::low;
}

const char* to_string(UserGroup g) {
  switch (g) {
    case UserGroup::low: return "low";
    case UserGroup::medium: return "medium";
    default: return "high";
  }
}

std::map<std::string, UserGroup> compute_user_groups(const Dataset& dataset,
                                                     const GroupThresholds& t) {
  std::map<std::string, UserGroup> out;
  for (const auto& [user, views] : dataset.views_per_user()) {
    out[user] = classify_user_group(views, t);
  }
  return out;
}

}  // namespace watchsim
