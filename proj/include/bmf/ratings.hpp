#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "random.hpp"

namespace bmf {

using index_t = std::uint32_t;

struct Rating {
  index_t user;
  index_t item;
  double value;

  friend bool operator==(const Rating&, const Rating&) = default;
};

// Observed entries of an n_users x n_items matrix. Immutable once built.
class RatingTriples {
public:
  RatingTriples() = default;

  RatingTriples(std::size_t n_users, std::size_t n_items, std::vector<Rating> entries)
      : n_users_(n_users), n_items_(n_items), entries_(std::move(entries)) {
    validate();
  }

  std::size_t n_users() const noexcept { return n_users_; }
  std::size_t n_items() const noexcept { return n_items_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::span<const Rating> entries() const noexcept { return entries_; }

  double mean_rating() const {
    if (entries_.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : entries_) sum += r.value;
    return sum / static_cast<double>(entries_.size());
  }

  friend bool operator==(const RatingTriples&, const RatingTriples&) = default;

private:
  void validate() const {
    std::vector<std::uint64_t> keys;
    keys.reserve(entries_.size());
    for (const auto& r : entries_) {
      if (r.user >= n_users_ || r.item >= n_items_) {
        throw data_error("rating (" + std::to_string(r.user) + ", " + std::to_string(r.item) +
                         ") outside a " + std::to_string(n_users_) + "x" +
                         std::to_string(n_items_) + " matrix");
      }
      keys.push_back((std::uint64_t{r.user} << 32) | r.item);
    }
    std::sort(keys.begin(), keys.end());
    const auto dup = std::adjacent_find(keys.begin(), keys.end());
    if (dup != keys.end()) {
      throw data_error("duplicate rating for (user " + std::to_string(*dup >> 32) + ", item " +
                       std::to_string(*dup & 0xffffffffu) + ")");
    }
  }

  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::vector<Rating> entries_;
};

// One learning rate or regularizer per parameter role.
struct RoleValues {
  double user_factor = 0.0;
  double item_factor = 0.0;
  double user_bias = 0.0;
  double item_bias = 0.0;

  static constexpr RoleValues uniform(double v) { return {v, v, v, v}; }

  friend bool operator==(const RoleValues&, const RoleValues&) = default;
};

struct Hyperparams {
  RoleValues alpha;
  RoleValues beta;
  int k = 13;
  int max_steps = 100;
  double delta = 1e-4;
  std::uint64_t seed = 42;
  // Half-width of the init interval; unset means 1/sqrt(k).
  std::optional<double> init_scale;

  double effective_init_scale() const {
    return init_scale.value_or(1.0 / std::sqrt(static_cast<double>(k)));
  }

  void validate() const {
    for (const auto* roles : {&alpha, &beta}) {
      for (double v : {roles->user_factor, roles->item_factor, roles->user_bias, roles->item_bias}) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
          throw config_error("learning rates and regularizers must be finite and >= 0");
        }
      }
    }
    if (k < 1) throw config_error("rank k must be >= 1");
    if (max_steps < 1) throw config_error("max_steps must be >= 1");
    if (!(delta >= 0.0)) throw config_error("delta must be >= 0");
    if (init_scale && !(*init_scale >= 0.0 && std::isfinite(*init_scale))) {
      throw config_error("init_scale must be finite and >= 0");
    }
  }

  // Biased-SVD settings used for the MovieLens experiments.
  static Hyperparams svd_defaults() {
    Hyperparams hp;
    hp.alpha = {0.019, 0.004, 0.004, 0.013};
    hp.beta = {0.019, 0.019, 0.019, 0.007};
    return hp;
  }

  // PMF uses a single learning rate and regularizer for both factor roles.
  static Hyperparams pmf_defaults() {
    Hyperparams hp;
    hp.alpha = RoleValues::uniform(0.0001);
    hp.beta = RoleValues::uniform(0.01);
    return hp;
  }
};

// U (rows x k), V (cols x k), and the two bias vectors. Row-major storage.
class FactorModel {
public:
  FactorModel() = default;

  FactorModel(std::size_t n_users, std::size_t n_items, int k)
      : k_(static_cast<std::size_t>(k)),
        n_users_(n_users),
        n_items_(n_items),
        u_(n_users * k_, 0.0),
        v_(n_items * k_, 0.0),
        bu_(n_users, 0.0),
        bi_(n_items, 0.0) {
    if (k < 1) throw config_error("rank k must be >= 1");
  }

  std::size_t k() const noexcept { return k_; }
  std::size_t n_users() const noexcept { return n_users_; }
  std::size_t n_items() const noexcept { return n_items_; }

  std::span<double> p(std::size_t user) noexcept { return {u_.data() + user * k_, k_}; }
  std::span<const double> p(std::size_t user) const noexcept {
    return {u_.data() + user * k_, k_};
  }
  std::span<double> q(std::size_t item) noexcept { return {v_.data() + item * k_, k_}; }
  std::span<const double> q(std::size_t item) const noexcept {
    return {v_.data() + item * k_, k_};
  }

  double& bu(std::size_t user) noexcept { return bu_[user]; }
  double bu(std::size_t user) const noexcept { return bu_[user]; }
  double& bi(std::size_t item) noexcept { return bi_[item]; }
  double bi(std::size_t item) const noexcept { return bi_[item]; }

  std::span<double> user_factors() noexcept { return u_; }
  std::span<const double> user_factors() const noexcept { return u_; }
  std::span<double> item_factors() noexcept { return v_; }
  std::span<const double> item_factors() const noexcept { return v_; }
  std::span<double> user_biases() noexcept { return bu_; }
  std::span<const double> user_biases() const noexcept { return bu_; }
  std::span<double> item_biases() noexcept { return bi_; }
  std::span<const double> item_biases() const noexcept { return bi_; }

  bool all_finite() const {
    auto finite = [](std::span<const double> xs) {
      return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
    };
    return finite(u_) && finite(v_) && finite(bu_) && finite(bi_);
  }

  friend bool operator==(const FactorModel&, const FactorModel&) = default;

private:
  std::size_t k_ = 0;
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::vector<double> u_;
  std::vector<double> v_;
  std::vector<double> bu_;
  std::vector<double> bi_;
};

// U then V drawn uniformly from [0, init_scale], row-major; biases zero.
inline FactorModel init_model(std::size_t n_users, std::size_t n_items, const Hyperparams& hp) {
  hp.validate();
  FactorModel model(n_users, n_items, hp.k);
  const double scale = hp.effective_init_scale();
  random_stream rng(hp.seed);
  for (double& x : model.user_factors()) x = rng.next_unit() * scale;
  for (double& x : model.item_factors()) x = rng.next_unit() * scale;
  return model;
}

}  // namespace bmf
