#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "eval.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "ratings.hpp"
#include "scheduler.hpp"
#include "thread_pool.hpp"

namespace bmf {

enum class ExecutionMode { serial, parallel };

inline std::string_view to_string(ExecutionMode m) {
  return m == ExecutionMode::parallel ? "parallel" : "serial";
}

inline ExecutionMode parse_mode(std::string_view s) {
  if (s == "serial") return ExecutionMode::serial;
  if (s == "parallel") return ExecutionMode::parallel;
  throw config_error("unknown mode '" + std::string(s) + "'");
}

// Which RMSE the delta stop test watches.
enum class StopMetric { train, test };

inline std::string_view to_string(StopMetric m) {
  return m == StopMetric::test ? "test" : "train";
}

inline StopMetric parse_stop_metric(std::string_view s) {
  if (s == "train") return StopMetric::train;
  if (s == "test") return StopMetric::test;
  throw config_error("unknown stop metric '" + std::string(s) + "'");
}

struct TrainConfig {
  Hyperparams hp;
  std::size_t row_blocks = 1;
  std::size_t col_blocks = 1;
  ExecutionMode mode = ExecutionMode::serial;
  std::size_t workers = 1;
  KernelVariant variant = KernelVariant::biased_svd;
  StopMetric stop_metric = StopMetric::train;

  void validate() const {
    hp.validate();
    if (workers < 1) throw config_error("workers must be >= 1");
    if (row_blocks < 1 || col_blocks < 1) throw config_error("grid must be at least 1x1");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_rmse = 0.0;
  std::optional<double> test_rmse;
  double seconds = 0.0;
};

enum class StopReason { delta_converged, max_steps, diverged };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::delta_converged: return "delta-converged";
    case StopReason::max_steps: return "max-steps";
    case StopReason::diverged: return "diverged";
  }
  return "?";
}

struct TrainReport {
  double initial_train_rmse = 0.0;
  std::optional<double> initial_test_rmse;
  std::vector<EpochRecord> epochs;
  StopReason stop_reason = StopReason::max_steps;

  double final_train_rmse() const {
    return epochs.empty() ? initial_train_rmse : epochs.back().train_rmse;
  }
};

struct TrainResult {
  FactorModel model;
  TrainReport report;
};

// Divergence during training; carries the epochs completed before it.
class training_diverged : public divergence_error {
public:
  training_diverged(const divergence_error& cause, int epoch, BlockId block, TrainReport partial)
      : divergence_error("epoch " + std::to_string(epoch) + ", block (" +
                             std::to_string(block.row) + "," + std::to_string(block.col) +
                             "): " + cause.what(),
                         cause.user(), cause.item()),
        epoch_(epoch),
        block_(block),
        report_(std::move(partial)) {}

  int epoch() const noexcept { return epoch_; }
  BlockId block() const noexcept { return block_; }
  const TrainReport& report() const noexcept { return report_; }

private:
  int epoch_;
  BlockId block_;
  TrainReport report_;
};

// Observer hooks are all optional:
//   on_visit(const BlockView&, std::size_t entry_index)   (may run on workers)
//   on_step(int epoch, std::size_t step)                  before each barrier step
//   on_epoch(const EpochRecord&)                          after each epoch
struct NoTrainObserver {};

namespace detail {

template <typename Observer>
struct visit_forwarder {
  Observer& obs;
  void on_visit(const BlockView& v, std::size_t idx) {
    if constexpr (requires { obs.on_visit(v, idx); }) obs.on_visit(v, idx);
  }
};

}  // namespace detail

/// Block-partitioned SGD. Each epoch passes every block through block_pass
/// once: row-major block order in serial mode, wavefront steps separated by
/// a full barrier in parallel mode. After each epoch the training RMSE is
/// compared with the previous one (the initial model's before epoch 1), or
/// the test-fold RMSE when cfg.stop_metric says so;
/// training stops once the improvement drops below hp.delta, at
/// hp.max_steps, or on divergence (thrown as training_diverged).
template <typename Observer = NoTrainObserver>
TrainResult train(const RatingTriples& train_data, const RatingTriples* test_data,
                  const TrainConfig& cfg, Observer&& observer = {}) {
  cfg.validate();
  if (train_data.empty()) throw data_error("training set is empty");
  if (cfg.stop_metric == StopMetric::test && (!test_data || test_data->empty())) {
    throw config_error("stopping on test RMSE needs a test fold");
  }
  if (test_data && (test_data->n_users() != train_data.n_users() ||
                    test_data->n_items() != train_data.n_items())) {
    throw dimension_error("train and test folds have different dimensions");
  }

  const BlockGrid grid =
      make_grid(train_data.n_users(), train_data.n_items(), cfg.row_blocks, cfg.col_blocks);
  const BlockedRatings blocks(train_data, grid);
  const TrainingStats stats = TrainingStats::from(train_data);

  TrainResult out{init_model(train_data.n_users(), train_data.n_items(), cfg.hp), {}};
  FactorModel& model = out.model;
  TrainReport& report = out.report;

  std::optional<Schedule> schedule;
  std::optional<worker_pool> pool;
  if (cfg.mode == ExecutionMode::parallel) {
    schedule = wavefront(grid.row_blocks, grid.col_blocks);
    pool.emplace(cfg.workers);
  }

  detail::visit_forwarder<std::remove_reference_t<Observer>> fwd{observer};
  auto run_block = [&](BlockId b, int epoch) {
    try {
      block_pass(blocks.view(b.row, b.col), model, cfg.hp, cfg.variant, fwd);
    } catch (const divergence_error& e) {
      TrainReport partial = report;
      partial.stop_reason = StopReason::diverged;
      throw training_diverged(e, epoch, b, std::move(partial));
    }
  };

  auto test_rmse = [&]() -> std::optional<double> {
    if (!test_data || test_data->empty()) return std::nullopt;
    EvalOptions opts;
    opts.variant = cfg.variant;
    return evaluate(*test_data, model, stats, opts).rmse;
  };

  report.initial_train_rmse = epoch_rmse(train_data, model, cfg.variant);
  report.initial_test_rmse = test_rmse();
  double previous = cfg.stop_metric == StopMetric::test ? *report.initial_test_rmse
                                                        : report.initial_train_rmse;

  for (int epoch = 1; epoch <= cfg.hp.max_steps; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    if (cfg.mode == ExecutionMode::serial) {
      if constexpr (requires { observer.on_step(epoch, std::size_t{0}); }) {
        observer.on_step(epoch, 0);
      }
      for (std::size_t i = 0; i < grid.row_blocks; ++i) {
        for (std::size_t j = 0; j < grid.col_blocks; ++j) run_block({i, j}, epoch);
      }
    } else {
      for (std::size_t s = 0; s < schedule->steps.size(); ++s) {
        if constexpr (requires { observer.on_step(epoch, s); }) observer.on_step(epoch, s);
        const auto& step = schedule->steps[s];
        pool->run(step.size(), [&](std::size_t t, std::size_t) { run_block(step[t], epoch); });
      }
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.seconds = std::max(elapsed.count(), std::numeric_limits<double>::min());
    rec.train_rmse = epoch_rmse(train_data, model, cfg.variant);
    if (!std::isfinite(rec.train_rmse)) {
      TrainReport partial = report;
      partial.stop_reason = StopReason::diverged;
      throw training_diverged(divergence_error("non-finite training RMSE", 0, 0), epoch, {},
                              std::move(partial));
    }
    rec.test_rmse = test_rmse();
    report.epochs.push_back(rec);
    if constexpr (requires { observer.on_epoch(rec); }) observer.on_epoch(rec);

    const double current = cfg.stop_metric == StopMetric::test ? *rec.test_rmse : rec.train_rmse;
    if (previous - current < cfg.hp.delta) {
      report.stop_reason = StopReason::delta_converged;
      break;
    }
    previous = current;
    report.stop_reason = StopReason::max_steps;
  }
  return out;
}

template <typename Observer = NoTrainObserver>
TrainResult train(const RatingTriples& train_data, const TrainConfig& cfg,
                  Observer&& observer = {}) {
  return train(train_data, nullptr, cfg, std::forward<Observer>(observer));
}

}  // namespace bmf
