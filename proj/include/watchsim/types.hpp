#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace watchsim {

// One logged watch event.
struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  double timestamp = 0.0;     // seconds since epoch, opaque
  double watch_time = 0.0;    // seconds, >= 0
  double video_length = 1.0;  // seconds, > 0
  int click = 0;              // 0 or 1
  std::vector<std::string> categories;  // 1-3 labels, coarsest first
  std::map<std::string, std::string> user_attrs;

  const std::string& top_category() const { return categories.front(); }
  double completion_rate() const { return watch_time / video_length; }

  bool operator==(const InteractionRecord&) const = default;
};

// Throws ValidationError naming the offending field.
void validate_record(const InteractionRecord& rec);

// A maximal run of one user's views with bounded inter-view gaps.
struct Session {
  std::string user_id;
  std::vector<InteractionRecord> records;  // time-ordered, non-decreasing

  std::size_t size() const { return records.size(); }
  bool operator==(const Session&) const = default;
};

struct Dataset {
  std::vector<Session> sessions;  // grouped by user, users in first-appearance order
  std::string provenance = "loaded";  // "loaded" | "synthetic"
  std::optional<std::uint64_t> seed;

  std::size_t record_count() const;
  // Unique user ids in first-appearance order.
  std::vector<std::string> user_ids() const;
  // Total views per user.
  std::map<std::string, std::size_t> views_per_user() const;
  std::vector<InteractionRecord> flatten() const;

  bool operator==(const Dataset& other) const {
    return sessions == other.sessions && provenance == other.provenance &&
           seed == other.seed;
  }
};

// Frequency buckets used by the heterogeneity analyses and policy context.
enum class UserGroup { low = 0, medium = 1, high = 2 };

struct GroupThresholds {
  std::size_t medium_min = 100;  // views below this are "low"
  std::size_t high_min = 300;    // views at or above this are "high"
};

UserGroup classify_user_group(std::size_t views, const GroupThresholds& t);
const char* to_string(UserGroup g);

std::map<std::string, UserGroup> compute_user_groups(const Dataset& dataset,
                                                     const GroupThresholds& t);

}  // namespace watchsim
