#include "watchsim/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "watchsim/errors.hpp"
#include "watchsim/io.hpp"
#include "watchsim/rng.hpp"

namespace watchsim {

using nlohmann::json;

LogFormat format_from_string(const std::string& s) {
  if (s == "csv") return LogFormat::csv;
  if (s == "jsonl") return LogFormat::jsonl;
  throw ValidationError("unknown log format: " + s);
}

LogFormat format_from_path(const std::string& path) {
  if (path.size() >= 6 && path.ends_with(".jsonl")) return LogFormat::jsonl;
  return LogFormat::csv;
}

namespace {

constexpr const char* kCsvHeader =
    "user_id,item_id,timestamp,watch_time,video_length,click,cat1,cat2,cat3,attrs_json";

double parse_double_field(const std::string& s, const char* field,
                          std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(std::string("field ") + field + " is not a number: '" + s + "'",
                     line);
  }
  return v;
}

int parse_click_field(const std::string& s, std::size_t line) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw ParseError("field click must be 0 or 1, got '" + s + "'", line);
}

InteractionRecord record_from_csv_row(const std::vector<std::string>& f,
                                      std::size_t line) {
  InteractionRecord rec;
  rec.user_id = f[0];
  rec.item_id = f[1];
  rec.timestamp = parse_double_field(f[2], "timestamp", line);
  rec.watch_time = parse_double_field(f[3], "watch_time", line);
  rec.video_length = parse_double_field(f[4], "video_length", line);
  rec.click = parse_click_field(f[5], line);
  for (int i = 6; i <= 8; ++i) {
    if (!f[i].empty()) rec.categories.push_back(f[i]);
  }
  if (!f[9].empty()) {
    json attrs = json::parse(f[9], nullptr, false);
    if (attrs.is_discarded() || !attrs.is_object()) {
      throw ParseError("field attrs_json is not a JSON object", line);
    }
    for (auto& [k, v] : attrs.items()) {
      if (!v.is_string()) {
        throw ParseError("attrs_json value for '" + k + "' is not a string", line);
      }
      rec.user_attrs[k] = v.get<std::string>();
    }
  }
  return rec;
}

InteractionRecord record_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) throw ParseError("row is not a JSON object", line);
  InteractionRecord rec;
  try {
    rec.user_id = obj.at("user_id").get<std::string>();
    rec.item_id = obj.at("item_id").get<std::string>();
    rec.timestamp = obj.at("timestamp").get<double>();
    rec.watch_time = obj.at("watch_time").get<double>();
    rec.video_length = obj.at("video_length").get<double>();
    rec.click = obj.at("click").get<int>();
    for (const auto& c : obj.at("categories")) {
      rec.categories.push_back(c.get<std::string>());
    }
    if (obj.contains("user_attrs")) {
      for (auto& [k, v] : obj.at("user_attrs").items()) {
        rec.user_attrs[k] = v.get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad row: ") + e.what(), line);
  }
  return rec;
}

void validate_with_line(const InteractionRecord& rec, std::size_t line) {
  try {
    validate_record(rec);
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line);
  }
}

}  // namespace

std::vector<InteractionRecord> load_interactions(const std::string& path,
                                                 LogFormat format) {
  const std::string content = read_file(path);
  if (content.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ValidationError("empty file: " + path);
  }
  std::vector<InteractionRecord> records;
  std::istringstream in(content);
  std::string line;
  std::size_t line_number = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (format == LogFormat::csv) {
      if (!saw_header) {
        if (line != kCsvHeader) {
          throw ParseError("bad CSV header, expected '" + std::string(kCsvHeader) + "'",
                           line_number);
        }
        saw_header = true;
        continue;
      }
      auto fields = split_csv_line(line, line_number);
      if (fields.size() != 10) {
        throw ParseError("expected 10 columns, got " + std::to_string(fields.size()),
                         line_number);
      }
      InteractionRecord rec = record_from_csv_row(fields, line_number);
      validate_with_line(rec, line_number);
      records.push_back(std::move(rec));
    } else {
      json obj = json::parse(line, nullptr, false);
      if (obj.is_discarded()) throw ParseError("invalid JSON", line_number);
      InteractionRecord rec = record_from_json(obj, line_number);
      validate_with_line(rec, line_number);
      records.push_back(std::move(rec));
    }
  }
  return records;
}

void save_interactions(const std::string& path, LogFormat format,
                       const std::vector<InteractionRecord>& records) {
  std::ostringstream out;
  if (format == LogFormat::csv) {
    out << kCsvHeader << '\n';
    for (const auto& rec : records) {
      out << csv_escape(rec.user_id) << ',' << csv_escape(rec.item_id) << ','
          << format_double(rec.timestamp) << ',' << format_double(rec.watch_time)
          << ',' << format_double(rec.video_length) << ',' << rec.click;
      for (std::size_t i = 0; i < 3; ++i) {
        out << ',';
        if (i < rec.categories.size()) out << csv_escape(rec.categories[i]);
      }
      out << ',';
      if (!rec.user_attrs.empty()) {
        json attrs(rec.user_attrs);
        out << csv_escape(attrs.dump());
      }
      out << '\n';
    }
  } else {
    for (const auto& rec : records) {
      json obj;
      obj["user_id"] = rec.user_id;
      obj["item_id"] = rec.item_id;
      obj["timestamp"] = rec.timestamp;
      obj["watch_time"] = rec.watch_time;
      obj["video_length"] = rec.video_length;
      obj["click"] = rec.click;
      obj["categories"] = rec.categories;
      obj["user_attrs"] = rec.user_attrs;
      out << obj.dump() << '\n';
    }
  }
  write_file(path, out.str());
}

std::vector<InteractionRecord> filter_min_interactions(
    std::vector<InteractionRecord> records, std::size_t min_interactions) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) ++counts[r.user_id];
  std::erase_if(records, [&](const InteractionRecord& r) {
    return counts[r.user_id] < min_interactions;
  });
  return records;
}

Dataset segment_sessions(const std::vector<InteractionRecord>& records,
                         double session_gap) {
  if (!(session_gap > 0.0)) {
    throw ValidationError("segment_sessions: session_gap must be > 0");
  }
  std::vector<std::string> user_order;
  std::map<std::string, std::vector<InteractionRecord>> per_user;
  for (const auto& rec : records) {
    auto [it, inserted] = per_user.try_emplace(rec.user_id);
    if (inserted) user_order.push_back(rec.user_id);
    it->second.push_back(rec);
  }

  Dataset dataset;
  for (const auto& user : user_order) {
    auto& recs = per_user[user];
    std::stable_sort(recs.begin(), recs.end(),
                     [](const InteractionRecord& a, const InteractionRecord& b) {
                       return a.timestamp < b.timestamp;
                     });
    Session current;
    current.user_id = user;
    for (auto& rec : recs) {
      if (!current.records.empty() &&
          rec.timestamp - current.records.back().timestamp > session_gap) {
        dataset.sessions.push_back(std::move(current));
        current = Session{user, {}};
      }
      current.records.push_back(std::move(rec));
    }
    if (!current.records.empty()) dataset.sessions.push_back(std::move(current));
  }
  return dataset;
}

// --- synthetic data ------------------------------------------------------

namespace {

constexpr std::uint64_t kPlantTag = 0xC11C5EEDULL;
constexpr std::uint64_t kUserTag = 0xA11CE5EEDULL;
constexpr std::uint64_t kFoldTag = 0xF01D5EEDULL;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void validate_spec(const SyntheticSpec& spec) {
  if (spec.cohorts.empty()) throw ValidationError("synthetic spec: no cohorts");
  if (spec.noise_sd < 0.0) throw ValidationError("synthetic spec: noise_sd < 0");
  if (spec.sigma <= 0.0 || spec.sigma >= 1.0) {
    throw ValidationError("synthetic spec: sigma must lie in (0, 1)");
  }
  if (spec.c_max <= 0.0) throw ValidationError("synthetic spec: c_max <= 0");
  for (const auto& c : spec.cohorts) {
    if (c.user_count == 0 || c.sessions_per_user == 0 ||
        c.mean_session_length < 1.0) {
      throw ValidationError("synthetic spec: cohort counts must be positive");
    }
    if (c.b <= 0.0) throw ValidationError("synthetic spec: cohort b must be > 0");
    if (c.category_coupling < 0.0 || c.category_coupling > 1.0) {
      throw ValidationError("synthetic spec: category_coupling outside [0, 1]");
    }
  }
}

const std::vector<std::string>& attr_values(const std::string& name) {
  static const std::map<std::string, std::vector<std::string>> kValues = {
      {"gender", {"male", "female"}},
      {"age_group", {"young", "middle", "old"}},
      {"residence", {"urban", "rural"}},
      {"income_band", {"low", "middle", "high"}},
  };
  return kValues.at(name);
}

}  // namespace

const std::vector<std::string>& PlantedClickModel::category_vocab() {
  static const std::vector<std::string> kVocab = {"news",  "music",  "gaming",
                                                  "food",  "travel", "sports"};
  return kVocab;
}

PlantedClickModel::PlantedClickModel(std::uint64_t seed) {
  RngStream rng(mix_seed(seed, kPlantTag));
  auto draw = [&rng](std::size_t n) {
    std::vector<double> w(n);
    for (auto& v : w) v = rng.next_bernoulli(0.5) ? 4.0 : -4.0;
    return w;
  };
  category_weights_ = draw(category_vocab().size());
  group_weights_ = draw(3);
  bucket_weights_ = draw(kItemBuckets);
}

double PlantedClickModel::margin(const InteractionRecord& rec,
                                 UserGroup group) const {
  double m = group_weights_[static_cast<std::size_t>(group)];
  const auto& vocab = category_vocab();
  auto it = std::find(vocab.begin(), vocab.end(), rec.top_category());
  if (it != vocab.end()) m += category_weights_[it - vocab.begin()];
  m += bucket_weights_[stable_hash(rec.item_id) % kItemBuckets];
  return m;
}

double PlantedClickModel::ctr(const InteractionRecord& rec,
                              UserGroup group) const {
  return sigmoid(margin(rec, group));
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);
  const PlantedClickModel plant(spec.seed);
  const auto& vocab = PlantedClickModel::category_vocab();
  constexpr double kStayProb = 0.75;   // category run persistence
  constexpr double kInterSessionGap = 7200.0;

  Dataset dataset;
  dataset.provenance = "synthetic";
  dataset.seed = spec.seed;

  std::size_t global_user = 0;
  AddictionParams params;
  for (const auto& cohort : spec.cohorts) {
    params.a = cohort.a;
    params.b = cohort.b;
    params.w = cohort.w;
    for (std::size_t u = 0; u < cohort.user_count; ++u, ++global_user) {
      RngStream rng(mix_seed(spec.seed, kUserTag, global_user));

      char user_buf[16];
      std::snprintf(user_buf, sizeof(user_buf), "u%05zu", global_user);
      std::map<std::string, std::string> attrs;
      attrs["cohort"] = cohort.name;
      for (const char* name : {"gender", "age_group", "residence", "income_band"}) {
        const auto& values = attr_values(name);
        attrs[name] = values[rng.next_below(values.size())];
      }

      // Session lengths drawn up front so the realized view total (and thus
      // the user's frequency group, which the click model conditions on)
      // is known before any record is emitted.
      std::vector<std::size_t> lengths(cohort.sessions_per_user);
      std::size_t total_views = 0;
      for (auto& n : lengths) {
        n = 1 + static_cast<std::size_t>(
                    rng.next_poisson(cohort.mean_session_length - 1.0));
        total_views += n;
      }
      const UserGroup group = classify_user_group(total_views, spec.thresholds);

      double clock = 1.6e9 + static_cast<double>(global_user) * 1.0e7;
      for (std::size_t s = 0; s < lengths.size(); ++s) {
        Session session;
        session.user_id = user_buf;
        clock += kInterSessionGap;

        double stock = 0.0;
        std::string prev_top;
        for (std::size_t j = 0; j < lengths[s]; ++j) {
          InteractionRecord rec;
          rec.user_id = user_buf;
          rec.user_attrs = attrs;
          char item_buf[16];
          std::snprintf(item_buf, sizeof(item_buf), "v%04llu",
                        static_cast<unsigned long long>(rng.next_below(2000)));
          rec.item_id = item_buf;

          std::string top;
          if (!prev_top.empty() && rng.next_bernoulli(kStayProb)) {
            top = prev_top;
          } else {
            top = vocab[rng.next_below(vocab.size())];
          }
          rec.categories = {top, top + "_s" + std::to_string(rng.next_below(2))};

          const bool match = !prev_top.empty() && top == prev_top;
          double mean_c = std::clamp((cohort.a + cohort.w * stock) / cohort.b,
                                     0.0, spec.c_max);
          if (match) mean_c += cohort.category_coupling;
          const double c = rng.next_truncated_gaussian(mean_c, spec.noise_sd, 0.0);
          rec.watch_time = inverse_consumption(c);

          const double true_ctr = plant.ctr(rec, group);
          rec.click = rng.next_bernoulli(true_ctr) ? 1 : 0;

          // video_length is solved from the planted utility so the standard
          // target construction (ctr + completion) reproduces utility + noise.
          const double target =
              utility(params, c, stock) + rng.next_gaussian(0.0, spec.noise_sd);
          const double completion = std::max(target - true_ctr, 0.01);
          rec.video_length =
              rec.watch_time > 0.0 ? rec.watch_time / completion : 1.0;

          rec.timestamp = clock;
          clock += std::min(rec.watch_time, 3500.0) + 1.0;

          session.records.push_back(std::move(rec));
          stock = (1.0 - spec.sigma) * stock + c;
          prev_top = top;
        }
        dataset.sessions.push_back(std::move(session));
      }
    }
  }

  return dataset;
}

std::vector<double> planted_preference_targets(const Dataset& dataset,
                                               std::uint64_t seed,
                                               const GroupThresholds& t) {
  const PlantedClickModel plant(seed);
  const auto groups = compute_user_groups(dataset, t);
  std::vector<double> targets;
  targets.reserve(dataset.record_count());
  for (const auto& session : dataset.sessions) {
    const UserGroup g = groups.at(session.user_id);
    for (const auto& rec : session.records) {
      targets.push_back(plant.ctr(rec, g) + rec.completion_rate());
    }
  }
  return targets;
}

std::vector<Fold> split_folds(const Dataset& dataset, std::size_t k,
                              std::uint64_t seed) {
  if (k < 2) throw ValidationError("split_folds: k must be >= 2");
  if (dataset.sessions.empty()) throw ValidationError("split_folds: empty dataset");
  if (k > dataset.sessions.size()) {
    throw ValidationError("split_folds: k exceeds session count");
  }

  const std::size_t n = dataset.sessions.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  RngStream rng(mix_seed(seed, kFoldTag));
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.next_below(i + 1)]);
  }
  std::vector<std::size_t> fold_of(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold_of[order[pos]] = pos % k;

  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    folds[f].train.provenance = dataset.provenance;
    folds[f].train.seed = dataset.seed;
    folds[f].test.provenance = dataset.provenance;
    folds[f].test.seed = dataset.seed;
    for (std::size_t i = 0; i < n; ++i) {
      (fold_of[i] == f ? folds[f].test : folds[f].train)
          .sessions.push_back(dataset.sessions[i]);
    }
  }
  return folds;
}

}  // namespace watchsim
