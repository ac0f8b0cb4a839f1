#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "random.hpp"
#include "ratings.hpp"

namespace bmf {

enum class DatasetFormat { movielens_100k, movielens_1m, csv };

inline std::string_view to_string(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::movielens_100k: return "movielens-100k";
    case DatasetFormat::movielens_1m: return "movielens-1m";
    case DatasetFormat::csv: return "csv";
  }
  return "?";
}

inline DatasetFormat parse_format(std::string_view s) {
  if (s == "movielens-100k" || s == "ml-100k") return DatasetFormat::movielens_100k;
  if (s == "movielens-1m" || s == "ml-1m") return DatasetFormat::movielens_1m;
  if (s == "csv") return DatasetFormat::csv;
  throw config_error("unknown dataset format '" + std::string(s) + "'");
}

struct DatasetSpec {
  DatasetFormat format = DatasetFormat::csv;
  std::string path;
  double rating_min = -std::numeric_limits<double>::infinity();
  double rating_max = std::numeric_limits<double>::infinity();
  bool csv_header = false;

  // MovieLens files carry 1..5 star ratings.
  static DatasetSpec movielens(DatasetFormat f, std::string path) {
    return {f, std::move(path), 1.0, 5.0, false};
  }
};

// Raw identifier <-> dense 0-based index, in order of first appearance.
class IdMap {
public:
  std::size_t size() const noexcept { return raw_.size(); }
  const std::string& raw(std::size_t index) const { return raw_.at(index); }
  const std::vector<std::string>& raw_ids() const noexcept { return raw_; }

  index_t intern(std::string_view id) {
    auto [it, inserted] = index_.try_emplace(std::string(id), static_cast<index_t>(raw_.size()));
    if (inserted) raw_.emplace_back(id);
    return it->second;
  }

  const index_t* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &it->second;
  }

  friend bool operator==(const IdMap& a, const IdMap& b) { return a.raw_ == b.raw_; }

private:
  std::vector<std::string> raw_;
  std::unordered_map<std::string, index_t> index_;
};

struct Dataset {
  RatingTriples ratings;
  IdMap users;
  IdMap items;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace detail

// Shortest representation that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Parse ratings from a stream. User and item ids are interned into the
/// given maps, so loading several files through the same maps yields
/// consistent indices; dimensions are the map sizes after loading.
inline Dataset load(std::istream& in, const DatasetSpec& spec, IdMap users = {},
                    IdMap items = {}) {
  if (!(spec.rating_min < spec.rating_max)) throw config_error("rating scale needs min < max");
  const std::string where = spec.path.empty() ? std::string("<stream>") : spec.path;
  std::string_view sep = "\t";
  std::size_t min_fields = 4, max_fields = 4;
  switch (spec.format) {
    case DatasetFormat::movielens_100k: break;
    case DatasetFormat::movielens_1m: sep = "::"; break;
    case DatasetFormat::csv: sep = ","; min_fields = max_fields = 3; break;
  }

  std::vector<Rating> entries;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = spec.format == DatasetFormat::csv && spec.csv_header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = detail::trim(line);
    if (text.empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    auto fail = [&](const std::string& why) {
      return data_error(where + ":" + std::to_string(line_no) + ": " + why);
    };
    const auto fields = detail::split_fields(text, sep);
    if (fields.size() < min_fields || fields.size() > max_fields) {
      throw fail("expected " + std::to_string(min_fields) + " fields, got " +
                 std::to_string(fields.size()));
    }
    const std::string_view user = detail::trim(fields[0]);
    const std::string_view item = detail::trim(fields[1]);
    if (user.empty() || item.empty()) throw fail("empty user or item id");
    double value = 0.0;
    if (!detail::parse_double(fields[2], value)) {
      throw fail("bad rating '" + std::string(fields[2]) + "'");
    }
    if (value < spec.rating_min || value > spec.rating_max) {
      throw fail("rating " + format_double(value) + " outside [" + format_double(spec.rating_min) +
                 ", " + format_double(spec.rating_max) + "]");
    }
    entries.push_back({users.intern(user), items.intern(item), value});
  }
  if (entries.empty()) throw data_error(where + ": no ratings");

  Dataset d;
  d.ratings = RatingTriples(users.size(), items.size(), std::move(entries));
  d.users = std::move(users);
  d.items = std::move(items);
  return d;
}

inline Dataset load(const DatasetSpec& spec, IdMap users = {}, IdMap items = {}) {
  std::ifstream in(spec.path);
  if (!in) throw data_error("cannot open " + spec.path);
  return load(in, spec, std::move(users), std::move(items));
}

// user,item,rating per line with raw ids; no header.
inline void write_csv(std::ostream& out, const Dataset& d) {
  for (const auto& r : d.ratings.entries()) {
    out << d.users.raw(r.user) << ',' << d.items.raw(r.item) << ',' << format_double(r.value)
        << '\n';
  }
}

struct Split {
  RatingTriples train;
  RatingTriples test;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Seeded random partition: the first round(f * N) entries of a uniform
/// permutation go to train. Both halves keep the source order and the
/// source dimensions.
inline Split split(const RatingTriples& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw config_error("train fraction must lie in (0, 1)");
  }
  const std::size_t n = data.size();
  if (n < 2) throw data_error("need at least two ratings to split");
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train == 0) throw data_error("split leaves an empty train fold");
  if (n_train == n) throw data_error("split leaves an empty test fold");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  random_stream rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<char> in_train(n, 0);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = 1;

  std::vector<Rating> train, test;
  train.reserve(n_train);
  test.reserve(n - n_train);
  const auto src = data.entries();
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? train : test).push_back(src[i]);

  return {RatingTriples(data.n_users(), data.n_items(), std::move(train)),
          RatingTriples(data.n_users(), data.n_items(), std::move(test)), train_fraction, seed};
}

}  // namespace bmf
