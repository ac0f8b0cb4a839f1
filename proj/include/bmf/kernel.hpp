#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "ratings.hpp"

namespace bmf {

enum class KernelVariant { biased_svd, pmf };

inline std::string_view to_string(KernelVariant v) {
  return v == KernelVariant::pmf ? "pmf" : "biased-svd";
}

inline KernelVariant parse_variant(std::string_view s) {
  if (s == "biased-svd" || s == "svd") return KernelVariant::biased_svd;
  if (s == "pmf") return KernelVariant::pmf;
  throw config_error("unknown kernel variant '" + std::string(s) + "'");
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) s += a[f] * b[f];
  return s;
}

inline double predict_unchecked(const FactorModel& m, std::size_t user, std::size_t item,
                                KernelVariant variant) noexcept {
  const double pq = dot(m.p(user), m.q(item));
  return variant == KernelVariant::pmf ? pq : pq + m.bu(user) + m.bi(item);
}

inline void check_index(const FactorModel& m, std::size_t user, std::size_t item) {
  if (user >= m.n_users() || item >= m.n_items()) {
    throw dimension_error("index (" + std::to_string(user) + ", " + std::to_string(item) +
                          ") outside a model of " + std::to_string(m.n_users()) + "x" +
                          std::to_string(m.n_items()));
  }
}

}  // namespace detail

/// p_u . q_i + bu_u + bi_i for biased-svd, p_u . q_i for pmf. Never clamps.
inline double predict(const FactorModel& model, std::size_t user, std::size_t item,
                      KernelVariant variant = KernelVariant::biased_svd) {
  detail::check_index(model, user, item);
  return detail::predict_unchecked(model, user, item, variant);
}

// Receives every entry a block pass processes; `entry_index` is the
// entry's position in the BlockedRatings the view came from.
struct NoVisitObserver {
  void on_visit(const BlockView&, std::size_t /*entry_index*/) noexcept {}
};

/// One SGD sweep over the block's entries in stored (row-major) order.
///
/// Per entry the error is computed once, then bu, bi and each factor pair
/// are updated; the q update reads the pre-update p value. Only parameters
/// in the block's user and item ranges are written. PMF skips the biases.
///
/// Throws divergence_error if any value touched by the pass is non-finite.
template <typename Observer = NoVisitObserver>
void block_pass(const BlockView& view, FactorModel& model, const Hyperparams& hp,
                KernelVariant variant, Observer&& observer = {}) {
  const RoleValues& a = hp.alpha;
  const RoleValues& b = hp.beta;
  const bool biased = variant == KernelVariant::biased_svd;
  const std::size_t k = model.k();

  for (std::size_t e = 0; e < view.entries.size(); ++e) {
    const Rating& r = view.entries[e];
    observer.on_visit(view, view.first_index + e);

    const double err = r.value - detail::predict_unchecked(model, r.user, r.item, variant);
    if (!std::isfinite(err)) {
      throw divergence_error("non-finite error at (user " + std::to_string(r.user) + ", item " +
                                 std::to_string(r.item) + ")",
                             r.user, r.item);
    }
    if (biased) {
      double& bu = model.bu(r.user);
      double& bi = model.bi(r.item);
      bu += a.user_bias * (err - b.user_bias * bu);
      bi += a.item_bias * (err - b.item_bias * bi);
    }
    double* p = model.p(r.user).data();
    double* q = model.q(r.item).data();
    for (std::size_t f = 0; f < k; ++f) {
      const double pf = p[f];
      const double qf = q[f];
      p[f] = pf + a.user_factor * (err * qf - b.user_factor * pf);
      q[f] = qf + a.item_factor * (err * pf - b.item_factor * qf);
    }
  }

  if (view.entries.empty()) return;
  // The last entry's updates are not read by any err above.
  const Rating& last = view.entries.back();
  bool finite = std::isfinite(model.bu(last.user)) && std::isfinite(model.bi(last.item));
  for (std::size_t f = 0; f < k; ++f) {
    finite = finite && std::isfinite(model.p(last.user)[f]) && std::isfinite(model.q(last.item)[f]);
  }
  if (!finite) {
    throw divergence_error("non-finite parameter after update at (user " +
                               std::to_string(last.user) + ", item " + std::to_string(last.item) +
                               ")",
                           last.user, last.item);
  }
}

/// Squared error over the observed entries plus each parameter group's
/// squared norm weighted by its own regularizer.
inline double objective(const RatingTriples& data, const FactorModel& model, const Hyperparams& hp,
                        KernelVariant variant = KernelVariant::biased_svd) {
  if (data.n_users() != model.n_users() || data.n_items() != model.n_items()) {
    throw dimension_error("objective: data and model dimensions differ");
  }
  double loss = 0.0;
  for (const auto& r : data.entries()) {
    const double e = r.value - detail::predict_unchecked(model, r.user, r.item, variant);
    loss += e * e;
  }
  auto sq = [](std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x * x;
    return s;
  };
  loss += hp.beta.user_factor * sq(model.user_factors());
  loss += hp.beta.item_factor * sq(model.item_factors());
  if (variant == KernelVariant::biased_svd) {
    loss += hp.beta.user_bias * sq(model.user_biases());
    loss += hp.beta.item_bias * sq(model.item_biases());
  }
  return loss;
}

struct EntryGradient {
  std::vector<double> d_p;
  std::vector<double> d_q;
  double d_bu = 0.0;
  double d_bi = 0.0;
};

/// Gradient of the unregularized single-entry loss (x - x_hat)^2 with
/// respect to p_u, q_i, bu_u and bi_i. Test support; training never calls it.
inline EntryGradient gradient_single(const Rating& entry, const FactorModel& model,
                                     KernelVariant variant = KernelVariant::biased_svd) {
  detail::check_index(model, entry.user, entry.item);
  const double err = entry.value - detail::predict_unchecked(model, entry.user, entry.item, variant);
  const auto p = model.p(entry.user);
  const auto q = model.q(entry.item);
  EntryGradient g;
  g.d_p.resize(model.k());
  g.d_q.resize(model.k());
  for (std::size_t f = 0; f < model.k(); ++f) {
    g.d_p[f] = -2.0 * err * q[f];
    g.d_q[f] = -2.0 * err * p[f];
  }
  if (variant == KernelVariant::biased_svd) {
    g.d_bu = -2.0 * err;
    g.d_bi = -2.0 * err;
  }
  return g;
}

}  // namespace bmf
