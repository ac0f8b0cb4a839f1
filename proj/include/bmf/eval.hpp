#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "kernel.hpp"
#include "ratings.hpp"

namespace bmf {

inline double epoch_rmse(const RatingTriples& data, const FactorModel& model,
                         KernelVariant variant = KernelVariant::biased_svd) {
  if (data.empty()) throw data_error("RMSE of an empty rating set");
  if (data.n_users() > model.n_users() || data.n_items() > model.n_items()) {
    throw dimension_error("RMSE: data is larger than the model");
  }
  double sse = 0.0;
  for (const auto& r : data.entries()) {
    const double e = r.value - detail::predict_unchecked(model, r.user, r.item, variant);
    sse += e * e;
  }
  return std::sqrt(sse / static_cast<double>(data.size()));
}

// What the training fold saw: used to spot cold-start test entries.
struct TrainingStats {
  double global_mean = 0.0;
  std::vector<std::size_t> user_counts;
  std::vector<std::size_t> item_counts;

  static TrainingStats from(const RatingTriples& train) {
    TrainingStats s;
    s.global_mean = train.mean_rating();
    s.user_counts.assign(train.n_users(), 0);
    s.item_counts.assign(train.n_items(), 0);
    for (const auto& r : train.entries()) {
      ++s.user_counts[r.user];
      ++s.item_counts[r.item];
    }
    return s;
  }

  bool user_seen(std::size_t u) const { return u < user_counts.size() && user_counts[u] > 0; }
  bool item_seen(std::size_t i) const { return i < item_counts.size() && item_counts[i] > 0; }
};

enum class Fallback { skip, global_mean, bias_only };

inline std::string_view to_string(Fallback f) {
  switch (f) {
    case Fallback::skip: return "skip";
    case Fallback::global_mean: return "global-mean";
    case Fallback::bias_only: return "bias-only";
  }
  return "?";
}

inline Fallback parse_fallback(std::string_view s) {
  if (s == "skip") return Fallback::skip;
  if (s == "global-mean") return Fallback::global_mean;
  if (s == "bias-only") return Fallback::bias_only;
  throw config_error("unknown fallback policy '" + std::string(s) + "'");
}

struct EvalResult {
  double rmse = 0.0;
  std::size_t n_scored = 0;
  std::size_t n_coldstart = 0;
  Fallback fallback = Fallback::global_mean;
};

struct EvalOptions {
  Fallback fallback = Fallback::global_mean;
  KernelVariant variant = KernelVariant::biased_svd;
  // Clamp predictions into [lo, hi] when set.
  std::optional<std::pair<double, double>> clamp;
};

// A test entry is cold-start when its user or its item has no training
// observation. Cold entries never read model parameters unless the
// bias-only policy finds a trained bias on the other side.
inline EvalResult evaluate(const RatingTriples& test, const FactorModel& model,
                           const TrainingStats& stats, const EvalOptions& opts = {}) {
  if (test.n_users() != model.n_users() || test.n_items() != model.n_items()) {
    throw dimension_error("test fold is " + std::to_string(test.n_users()) + "x" +
                          std::to_string(test.n_items()) + " but model is " +
                          std::to_string(model.n_users()) + "x" +
                          std::to_string(model.n_items()));
  }
  EvalResult res;
  res.fallback = opts.fallback;
  double sse = 0.0;
  std::size_t counted = 0;
  for (const auto& r : test.entries()) {
    const bool user_ok = stats.user_seen(r.user);
    const bool item_ok = stats.item_seen(r.item);
    double pred;
    if (user_ok && item_ok) {
      pred = detail::predict_unchecked(model, r.user, r.item, opts.variant);
      ++res.n_scored;
    } else {
      ++res.n_coldstart;
      if (opts.fallback == Fallback::skip) continue;
      pred = stats.global_mean;
      if (opts.fallback == Fallback::bias_only && opts.variant == KernelVariant::biased_svd) {
        if (user_ok) pred += model.bu(r.user);
        if (item_ok) pred += model.bi(r.item);
      }
    }
    if (opts.clamp) pred = std::clamp(pred, opts.clamp->first, opts.clamp->second);
    const double e = r.value - pred;
    sse += e * e;
    ++counted;
  }
  if (counted == 0) throw data_error("evaluation scored no test entries");
  if (opts.fallback != Fallback::skip) res.n_scored = counted;
  res.rmse = std::sqrt(sse / static_cast<double>(counted));
  return res;
}

struct Summary {
  double mean = 0.0;
  double std = 0.0;
};

// Mean and sample standard deviation (n - 1); a single value has std 0.
inline Summary aggregate(std::span<const double> values) {
  if (values.empty()) throw config_error("aggregate needs at least one value");
  Summary s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

inline Summary aggregate(std::span<const EvalResult> results) {
  std::vector<double> rmse;
  rmse.reserve(results.size());
  for (const auto& r : results) rmse.push_back(r.rmse);
  return aggregate(std::span<const double>(rmse));
}

}  // namespace bmf
