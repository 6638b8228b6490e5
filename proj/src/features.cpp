#include "watchsim/features.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "watchsim/errors.hpp"
#include "watchsim/rng.hpp"

namespace watchsim {

using nlohmann::json;

FeatureSpace FeatureSpace::build(const Dataset& dataset,
                                 GroupThresholds thresholds) {
  FeatureSpace space;
  space.thresholds_ = thresholds;
  space.user_groups_ = compute_user_groups(dataset, thresholds);

  std::set<std::string> categories;
  std::map<std::string, std::set<std::string>> attrs;
  for (const auto& session : dataset.sessions) {
    for (const auto& rec : session.records) {
      categories.insert(rec.top_category());
      for (const auto& [k, v] : rec.user_attrs) attrs[k].insert(v);
    }
  }
  space.categories_.assign(categories.begin(), categories.end());
  for (const auto& [name, values] : attrs) {
    space.attr_names_.push_back(name);
    space.attr_values_.emplace_back(values.begin(), values.end());
  }
  space.finalize();
  return space;
}

void FeatureSpace::finalize() {
  // Layout: [group: 3+oov][category: |vocab|+oov][bucket: 16][attr_i: |vals|+oov]...
  dim_ = 4 + categories_.size() + 1 + kItemBuckets;
  for (const auto& values : attr_values_) dim_ += values.size() + 1;
}

UserGroup FeatureSpace::group_of(const std::string& user_id) const {
  auto it = user_groups_.find(user_id);
  return it == user_groups_.end() ? UserGroup::low : it->second;
}

FeatureVector FeatureSpace::featurize(const InteractionRecord& rec) const {
  FeatureVector fv;
  std::size_t base = 0;

  auto it = user_groups_.find(rec.user_id);
  fv.indices.push_back(base + (it == user_groups_.end()
                                   ? 3
                                   : static_cast<std::size_t>(it->second)));
  base += 4;

  auto cat = std::lower_bound(categories_.begin(), categories_.end(),
                              rec.top_category());
  std::size_t cat_id = categories_.size();  // OOV slot
  if (cat != categories_.end() && *cat == rec.top_category()) {
    cat_id = static_cast<std::size_t>(cat - categories_.begin());
  }
  fv.indices.push_back(base + cat_id);
  base += categories_.size() + 1;

  fv.indices.push_back(base + stable_hash(rec.item_id) % kItemBuckets);
  base += kItemBuckets;

  for (std::size_t i = 0; i < attr_names_.size(); ++i) {
    const auto& values = attr_values_[i];
    std::size_t id = values.size();  // OOV slot
    auto attr = rec.user_attrs.find(attr_names_[i]);
    if (attr != rec.user_attrs.end()) {
      auto pos = std::lower_bound(values.begin(), values.end(), attr->second);
      if (pos != values.end() && *pos == attr->second) {
        id = static_cast<std::size_t>(pos - values.begin());
      }
    }
    fv.indices.push_back(base + id);
    base += values.size() + 1;
  }

  fv.values.assign(fv.indices.size(), 1.0);
  return fv;
}

std::string FeatureSpace::to_json() const {
  json obj;
  obj["medium_min"] = thresholds_.medium_min;
  obj["high_min"] = thresholds_.high_min;
  obj["categories"] = categories_;
  obj["attr_names"] = attr_names_;
  obj["attr_values"] = attr_values_;
  json groups = json::object();
  for (const auto& [user, group] : user_groups_) {
    groups[user] = static_cast<int>(group);
  }
  obj["user_groups"] = groups;
  return obj.dump();
}

FeatureSpace FeatureSpace::from_json(const std::string& payload) {
  json obj = json::parse(payload, nullptr, false);
  if (obj.is_discarded()) throw ValidationError("feature space: invalid JSON");
  FeatureSpace space;
  try {
    space.thresholds_.medium_min = obj.at("medium_min").get<std::size_t>();
    space.thresholds_.high_min = obj.at("high_min").get<std::size_t>();
    space.categories_ = obj.at("categories").get<std::vector<std::string>>();
    space.attr_names_ = obj.at("attr_names").get<std::vector<std::string>>();
    space.attr_values_ =
        obj.at("attr_values").get<std::vector<std::vector<std::string>>>();
    for (auto& [user, group] : obj.at("user_groups").items()) {
      space.user_groups_[user] = static_cast<UserGroup>(group.get<int>());
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("feature space: ") + e.what());
  }
  space.finalize();
  return space;
}

bool operator==(const FeatureSpace& a, const FeatureSpace& b) {
  return a.thresholds_.medium_min == b.thresholds_.medium_min &&
         a.thresholds_.high_min == b.thresholds_.high_min &&
         a.categories_ == b.categories_ && a.attr_names_ == b.attr_names_ &&
         a.attr_values_ == b.attr_values_ && a.user_groups_ == b.user_groups_;
}

}  // namespace watchsim
