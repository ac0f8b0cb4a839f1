#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

namespace bmf::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string trim_copy(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Shared flag groups

struct DataFlags {
  std::string dataset;
  std::string format;
  std::string input;
  std::string data_dir;
  std::optional<double> rating_min;
  std::optional<double> rating_max;
  bool csv_header = false;
};

void add_data_flags(CLI::App* app, DataFlags& f) {
  app->add_option("--dataset", f.dataset, "Named dataset: ml-100k or ml-1m");
  app->add_option("--data-dir", f.data_dir, "Directory holding named datasets");
  app->add_option("--format", f.format, "movielens-100k | movielens-1m | csv");
  app->add_option("--input", f.input, "Ratings file");
  app->add_option("--rating-min", f.rating_min, "Lowest valid rating");
  app->add_option("--rating-max", f.rating_max, "Highest valid rating");
  app->add_flag("--csv-header", f.csv_header, "CSV input starts with a header line");
}

std::string default_data_dir() {
  if (const char* env = std::getenv("BMF_DATA_DIR")) return env;
  return "data";
}

DatasetSpec resolve_data(const DataFlags& f) {
  DatasetSpec spec;
  std::string path = f.input;
  if (!f.dataset.empty()) {
    const std::string dir = f.data_dir.empty() ? default_data_dir() : f.data_dir;
    if (f.dataset == "ml-100k") {
      spec = DatasetSpec::movielens(DatasetFormat::movielens_100k, "");
      if (path.empty()) path = (fs::path(dir) / "ml-100k" / "u.data").string();
    } else if (f.dataset == "ml-1m") {
      spec = DatasetSpec::movielens(DatasetFormat::movielens_1m, "");
      if (path.empty()) path = (fs::path(dir) / "ml-1m" / "ratings.dat").string();
    } else {
      throw config_error("unknown dataset '" + f.dataset + "' (expected ml-100k or ml-1m)");
    }
  } else {
    if (path.empty()) throw config_error("--input or --dataset is required");
    const DatasetFormat fmt = f.format.empty() ? DatasetFormat::csv : parse_format(f.format);
    if (fmt != DatasetFormat::csv) spec = DatasetSpec::movielens(fmt, "");
    spec.format = fmt;
  }
  spec.path = path;
  if (f.rating_min) spec.rating_min = *f.rating_min;
  if (f.rating_max) spec.rating_max = *f.rating_max;
  spec.csv_header = f.csv_header;
  if (!(spec.rating_min < spec.rating_max)) throw config_error("rating scale needs min < max");
  return spec;
}

struct HyperFlags {
  std::optional<double> alpha, beta;
  std::optional<double> alpha_uf, alpha_if, alpha_ub, alpha_ib;
  std::optional<double> beta_uf, beta_if, beta_ub, beta_ib;
  int k = 13;
  int max_steps = 1000;
  double delta = 1e-4;
  std::uint64_t seed = 42;
  std::optional<double> init_scale;
};

void add_hyper_flags(CLI::App* app, HyperFlags& h) {
  app->add_option("--alpha", h.alpha, "Learning rate for all four roles");
  app->add_option("--beta", h.beta, "Regularizer for all four roles");
  app->add_option("--alpha-user-factor", h.alpha_uf);
  app->add_option("--alpha-item-factor", h.alpha_if);
  app->add_option("--alpha-user-bias", h.alpha_ub);
  app->add_option("--alpha-item-bias", h.alpha_ib);
  app->add_option("--beta-user-factor", h.beta_uf);
  app->add_option("--beta-item-factor", h.beta_if);
  app->add_option("--beta-user-bias", h.beta_ub);
  app->add_option("--beta-item-bias", h.beta_ib);
  app->add_option("--k", h.k, "Rank");
  app->add_option("--max-steps", h.max_steps, "Epoch cap");
  app->add_option("--delta", h.delta, "Stop when RMSE improves by less than this");
  app->add_option("--seed", h.seed, "Seed for splits and initialization");
  app->add_option("--init-scale", h.init_scale, "Init interval half-width (default 1/sqrt(k))");
}

// Role flag > --alpha/--beta > variant default.
Hyperparams resolve_hyper(const HyperFlags& h, Hyperparams hp) {
  auto pick = [](const std::optional<double>& role, const std::optional<double>& all, double dflt) {
    return role ? *role : all ? *all : dflt;
  };
  hp.alpha.user_factor = pick(h.alpha_uf, h.alpha, hp.alpha.user_factor);
  hp.alpha.item_factor = pick(h.alpha_if, h.alpha, hp.alpha.item_factor);
  hp.alpha.user_bias = pick(h.alpha_ub, h.alpha, hp.alpha.user_bias);
  hp.alpha.item_bias = pick(h.alpha_ib, h.alpha, hp.alpha.item_bias);
  hp.beta.user_factor = pick(h.beta_uf, h.beta, hp.beta.user_factor);
  hp.beta.item_factor = pick(h.beta_if, h.beta, hp.beta.item_factor);
  hp.beta.user_bias = pick(h.beta_ub, h.beta, hp.beta.user_bias);
  hp.beta.item_bias = pick(h.beta_ib, h.beta, hp.beta.item_bias);
  hp.k = h.k;
  hp.max_steps = h.max_steps;
  hp.delta = h.delta;
  hp.seed = h.seed;
  hp.init_scale = h.init_scale;
  hp.validate();
  return hp;
}

json role_mapping(const Hyperparams& hp) {
  return {
      {"user-factor", {{"alpha", hp.alpha.user_factor}, {"beta", hp.beta.user_factor}}},
      {"item-factor", {{"alpha", hp.alpha.item_factor}, {"beta", hp.beta.item_factor}}},
      {"user-bias", {{"alpha", hp.alpha.user_bias}, {"beta", hp.beta.user_bias}}},
      {"item-bias", {{"alpha", hp.alpha.item_bias}, {"beta", hp.beta.item_bias}}},
  };
}

// Config keys for a fully resolved hyperparameter set.
void put_hyper_config(std::vector<std::pair<std::string, std::string>>& kv, const Hyperparams& hp) {
  kv.emplace_back("alpha-user-factor", format_double(hp.alpha.user_factor));
  kv.emplace_back("alpha-item-factor", format_double(hp.alpha.item_factor));
  kv.emplace_back("alpha-user-bias", format_double(hp.alpha.user_bias));
  kv.emplace_back("alpha-item-bias", format_double(hp.alpha.item_bias));
  kv.emplace_back("beta-user-factor", format_double(hp.beta.user_factor));
  kv.emplace_back("beta-item-factor", format_double(hp.beta.item_factor));
  kv.emplace_back("beta-user-bias", format_double(hp.beta.user_bias));
  kv.emplace_back("beta-item-bias", format_double(hp.beta.item_bias));
  kv.emplace_back("k", std::to_string(hp.k));
  kv.emplace_back("max-steps", std::to_string(hp.max_steps));
  kv.emplace_back("delta", format_double(hp.delta));
  kv.emplace_back("seed", std::to_string(hp.seed));
  kv.emplace_back("init-scale", format_double(hp.effective_init_scale()));
}

void put_data_config(std::vector<std::pair<std::string, std::string>>& kv, const DatasetSpec& d) {
  kv.emplace_back("input", fs::absolute(d.path).string());
  kv.emplace_back("format", std::string(to_string(d.format)));
  if (std::isfinite(d.rating_min)) kv.emplace_back("rating-min", format_double(d.rating_min));
  if (std::isfinite(d.rating_max)) kv.emplace_back("rating-max", format_double(d.rating_max));
  kv.emplace_back("csv-header", d.csv_header ? "true" : "false");
}

json config_json(const std::vector<std::pair<std::string, std::string>>& kv) {
  json j = json::object();
  for (const auto& [k, v] : kv) j[k] = v;
  return j;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path.string());
  out << text;
  if (!out) throw data_error("write failed for " + path.string());
}

std::string config_text(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
  return s;
}

json epoch_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"train_rmse", r.train_rmse},
          {"test_rmse", r.test_rmse ? json(*r.test_rmse) : json(nullptr)},
          {"seconds", r.seconds}};
}

// Mean seconds over epochs after the first; the first alone if that is all.
double secs_per_iter(const TrainReport& rep) {
  if (rep.epochs.empty()) return 0.0;
  if (rep.epochs.size() == 1) return rep.epochs[0].seconds;
  double s = 0.0;
  for (std::size_t e = 1; e < rep.epochs.size(); ++e) s += rep.epochs[e].seconds;
  return s / static_cast<double>(rep.epochs.size() - 1);
}

json report_json(const TrainReport& rep) {
  json epochs = json::array();
  for (const auto& e : rep.epochs) epochs.push_back(epoch_json(e));
  json j = {{"initial_train_rmse", rep.initial_train_rmse},
            {"final_train_rmse", rep.final_train_rmse()},
            {"stop_reason", std::string(to_string(rep.stop_reason))},
            {"epochs_run", rep.epochs.size()},
            {"secs_per_iter", secs_per_iter(rep)},
            {"epochs", epochs}};
  if (!rep.epochs.empty() && rep.epochs.back().test_rmse) {
    j["final_test_rmse"] = *rep.epochs.back().test_rmse;
  }
  return j;
}

json eval_json(const EvalResult& r) {
  return {{"rmse", r.rmse},
          {"n_scored", r.n_scored},
          {"n_coldstart", r.n_coldstart},
          {"fallback", std::string(to_string(r.fallback))}};
}

std::optional<std::pair<double, double>> clamp_range(bool clamp, const DatasetSpec& d) {
  if (!clamp) return std::nullopt;
  if (!std::isfinite(d.rating_min) || !std::isfinite(d.rating_max)) {
    throw config_error("--clamp needs a finite rating scale (--rating-min/--rating-max)");
  }
  return std::pair{d.rating_min, d.rating_max};
}

// Finds "--config <path>" / "--config=<path>" before the real parse so that
// file values can be installed as option defaults.
std::optional<std::string> find_config_arg(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

void apply_config(CLI::App* sub, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "config") continue;
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw config_error("config key '" + key + "' is not an option of '" + sub->get_name() + "'");
    }
    opt->default_val(value);
  }
}

// ---------------------------------------------------------------------------
// Commands

struct SplitArgs {
  DataFlags data;
  double fraction = 0.8;
  std::uint64_t seed = 42;
  std::string out_dir;
};

int cmd_split(const SplitArgs& a, std::ostream& out) {
  const DatasetSpec spec = resolve_data(a.data);
  const Dataset d = load(spec);
  const Split s = split(d.ratings, a.fraction, a.seed);
  fs::create_directories(a.out_dir);

  auto dump = [&](const RatingTriples& part, const char* name) {
    Dataset view{part, d.users, d.items};
    std::ostringstream os;
    write_csv(os, view);
    write_file(fs::path(a.out_dir) / name, os.str());
  };
  dump(s.train, "train.csv");
  dump(s.test, "test.csv");

  json manifest = {{"tool", kVersion},
                   {"command", "split"},
                   {"rng", "mt19937_64/v" + std::to_string(kRandomStreamVersion)},
                   {"source", fs::absolute(spec.path).string()},
                   {"format", std::string(to_string(spec.format))},
                   {"seed", a.seed},
                   {"fraction", a.fraction},
                   {"n_ratings", d.ratings.size()},
                   {"n_train", s.train.size()},
                   {"n_test", s.test.size()}};
  write_file(fs::path(a.out_dir) / "split.json", manifest.dump(2) + "\n");
  out << "train " << s.train.size() << " test " << s.test.size() << '\n';
  return exit_code::ok;
}

struct TrainArgs {
  DataFlags data;
  std::string test;
  HyperFlags hyper;
  std::string variant = "biased-svd";
  std::string grid = "1x1";
  std::string mode = "serial";
  std::size_t workers = 1;
  std::string stop_metric = "train";
  std::string out_dir;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const DatasetSpec train_spec = resolve_data(a.data);
  const KernelVariant variant = parse_variant(a.variant);
  TrainConfig cfg;
  cfg.variant = variant;
  cfg.hp = resolve_hyper(a.hyper, variant == KernelVariant::pmf ? Hyperparams::pmf_defaults()
                                                                 : Hyperparams::svd_defaults());
  std::tie(cfg.row_blocks, cfg.col_blocks) = parse_grid(a.grid);
  cfg.mode = parse_mode(a.mode);
  cfg.workers = a.workers;
  cfg.stop_metric = parse_stop_metric(a.stop_metric);
  cfg.validate();

  // Both folds go through the same id maps so their indices agree.
  Dataset train_set = load(train_spec);
  std::optional<Dataset> test_set;
  if (!a.test.empty()) {
    DatasetSpec test_spec = train_spec;
    test_spec.path = a.test;
    test_set = load(test_spec, train_set.users, train_set.items);
    train_set.ratings = RatingTriples(test_set->ratings.n_users(), test_set->ratings.n_items(),
                                      {train_set.ratings.entries().begin(),
                                       train_set.ratings.entries().end()});
    train_set.users = test_set->users;
    train_set.items = test_set->items;
  }

  std::vector<std::pair<std::string, std::string>> kv;
  put_data_config(kv, train_spec);
  if (!a.test.empty()) kv.emplace_back("test", fs::absolute(a.test).string());
  kv.emplace_back("variant", std::string(to_string(variant)));
  kv.emplace_back("grid", std::to_string(cfg.row_blocks) + "x" + std::to_string(cfg.col_blocks));
  kv.emplace_back("mode", std::string(to_string(cfg.mode)));
  kv.emplace_back("workers", std::to_string(cfg.workers));
  kv.emplace_back("stop-metric", std::string(to_string(cfg.stop_metric)));
  put_hyper_config(kv, cfg.hp);

  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  std::ofstream metrics(dir / "metrics.jsonl");
  if (!metrics) throw data_error("cannot write " + (dir / "metrics.jsonl").string());

  struct Progress {
    std::ostream& out;
    std::ostream& file;
    void on_epoch(const EpochRecord& r) {
      const std::string line = epoch_json(r).dump();
      out << line << '\n';
      file << line << '\n';
    }
  } progress{out, metrics};

  json manifest = {{"tool", kVersion},
                   {"command", "train"},
                   {"rng", "mt19937_64/v" + std::to_string(kRandomStreamVersion)},
                   {"config", config_json(kv)},
                   {"role_mapping", role_mapping(cfg.hp)}};
  int code = exit_code::ok;
  try {
    TrainResult res = train(train_set.ratings, test_set ? &test_set->ratings : nullptr, cfg, progress);
    ModelBundle bundle{std::move(res.model), variant, TrainingStats::from(train_set.ratings),
                       train_set.users, train_set.items};
    save_model((dir / "model.bin").string(), bundle);
    manifest["results"] = report_json(res.report);
    if (test_set) {
      EvalOptions opts;
      opts.variant = variant;
      manifest["results"]["eval"] = eval_json(evaluate(test_set->ratings, bundle.model, bundle.stats, opts));
    }
  } catch (const training_diverged& e) {
    manifest["results"] = report_json(e.report());
    manifest["results"]["error"] = e.what();
    err << "error: " << e.what() << '\n';
    code = exit_code::diverged;
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_file(dir / "run.conf", config_text(kv));
  return code;
}

struct EvaluateArgs {
  DataFlags data;
  std::string model;
  std::string fallback = "global-mean";
  bool clamp = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const DatasetSpec spec = resolve_data(a.data);
  const ModelBundle bundle = load_model(a.model);
  // Ids unknown to the model grow the maps, which evaluate() reports as a
  // dimension mismatch.
  const Dataset test = load(spec, bundle.users, bundle.items);
  EvalOptions opts;
  opts.variant = bundle.variant;
  opts.fallback = parse_fallback(a.fallback);
  opts.clamp = clamp_range(a.clamp, spec);
  const EvalResult r = evaluate(test.ratings, bundle.model, bundle.stats, opts);
  json j = eval_json(r);
  j["clamp"] = a.clamp;
  out << j.dump() << '\n';
  return exit_code::ok;
}

struct BenchmarkArgs {
  DataFlags data;
  HyperFlags hyper;
  std::optional<double> pmf_alpha;
  std::optional<double> pmf_beta;
  std::string variants = "pmf,svd,bcsvd";
  std::size_t repeats = 3;
  std::string grid = "8x8";
  std::size_t workers = 8;
  double fraction = 0.8;
  std::string stop_metric = "test";
  std::string fallback = "global-mean";
  bool clamp = false;
  std::string out_dir;
};

std::string summary_table(const BenchmarkResult& r, const std::string& dataset) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "dataset" << std::setw(8) << "variant" << std::setw(7)
     << "grid" << std::setw(10) << "mode" << std::setw(9) << "workers" << std::setw(9)
     << "repeats" << std::setw(22) << "test RMSE" << "sec/iteration" << '\n';
  for (const auto& row : r.rows) {
    os << std::left << std::setw(10) << dataset << std::setw(8) << row.variant << std::setw(7)
       << row.grid << std::setw(10) << row.mode << std::setw(9) << row.workers << std::setw(9)
       << row.repeats;
    if (row.rmse.empty()) {
      os << "FAILED";
    } else {
      os << std::setw(22)
         << (fixed(row.rmse_stats.mean, 4) + " +- " + fixed(row.rmse_stats.std, 4))
         << fixed(row.secs_stats.mean, 5) << " +- " << fixed(row.secs_stats.std, 5);
      if (!row.failures.empty()) os << "  (" << row.failures.size() << " failed)";
    }
    os << '\n';
  }
  os << "std is the sample standard deviation (n-1) over repeats\n";
  return os.str();
}

int cmd_benchmark(const BenchmarkArgs& a, std::ostream& out, std::ostream& err) {
  BenchmarkOptions o;
  o.data = resolve_data(a.data);
  o.dataset_name = a.data.dataset.empty() ? fs::path(o.data.path).filename().string()
                                          : a.data.dataset;
  o.variants.clear();
  std::stringstream ss(a.variants);
  for (std::string v; std::getline(ss, v, ',');) {
    v = trim_copy(v);
    if (v != "pmf" && v != "svd" && v != "bcsvd") {
      throw config_error("unknown benchmark variant '" + v + "'");
    }
    o.variants.push_back(v);
  }
  if (o.variants.empty()) throw config_error("no variants requested");
  if (a.repeats < 1) throw config_error("--repeats must be >= 1");
  o.repeats = a.repeats;
  std::tie(o.row_blocks, o.col_blocks) = parse_grid(a.grid);
  o.workers = a.workers;
  o.fraction = a.fraction;
  o.seed = a.hyper.seed;
  o.svd = resolve_hyper(a.hyper, Hyperparams::svd_defaults());
  HyperFlags pmf_flags = a.hyper;
  pmf_flags.alpha = a.pmf_alpha;
  pmf_flags.beta = a.pmf_beta;
  pmf_flags.alpha_uf = pmf_flags.alpha_if = pmf_flags.alpha_ub = pmf_flags.alpha_ib = std::nullopt;
  pmf_flags.beta_uf = pmf_flags.beta_if = pmf_flags.beta_ub = pmf_flags.beta_ib = std::nullopt;
  o.pmf = resolve_hyper(pmf_flags, Hyperparams::pmf_defaults());
  o.stop_metric = parse_stop_metric(a.stop_metric);
  o.eval.fallback = parse_fallback(a.fallback);
  o.eval.clamp = clamp_range(a.clamp, o.data);

  BenchmarkResult r = run_benchmark(o, err);
  const std::string table = summary_table(r, o.dataset_name);
  out << table;
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    write_file(fs::path(a.out_dir) / "manifest.json", r.manifest_json);
    write_file(fs::path(a.out_dir) / "summary.csv", summary_csv(r, o.dataset_name));
    write_file(fs::path(a.out_dir) / "summary.txt", table);
  }
  return r.any_failure ? exit_code::diverged : exit_code::ok;
}

}  // namespace

// ---------------------------------------------------------------------------

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  std::size_t rows = 0, cols = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    auto digits = [](const std::string& s) {
      return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
    };
    if (!digits(text.substr(0, x)) || !digits(text.substr(x + 1))) throw std::invalid_argument(text);
    std::size_t used = 0;
    rows = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    cols = std::stoul(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    throw config_error("grid must look like IxJ, got '" + text + "'");
  }
  if (rows < 1 || cols < 1) throw config_error("grid dimensions must be >= 1");
  return {rows, cols};
}

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<std::pair<std::string, std::string>> kv;

  const std::string head = trim_copy(text.substr(0, 64));
  if (!head.empty() && head.front() == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw config_error(path + ": " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object()) {
      throw config_error(path + ": manifest has no config object");
    }
    for (const auto& [k, v] : j["config"].items()) {
      kv.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
    }
    return kv;
  }

  std::istringstream lines(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(lines, line)) {
    ++no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim_copy(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error(path + ":" + std::to_string(no) + ": expected key = value");
    }
    std::string key = trim_copy(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    kv.emplace_back(key, trim_copy(line.substr(eq + 1)));
  }
  return kv;
}

std::string summary_csv(const BenchmarkResult& result, const std::string& dataset) {
  std::ostringstream os;
  os << "dataset,variant,grid,mode,workers,repeats,rmse_mean,rmse_std,secs_per_iter_mean,"
        "secs_per_iter_std\n";
  for (const auto& row : result.rows) {
    os << dataset << ',' << row.variant << ',' << row.grid << ',' << row.mode << ','
       << row.workers << ',' << row.repeats << ',';
    if (row.rmse.empty()) {
      os << "FAILED,FAILED,FAILED,FAILED\n";
      continue;
    }
    os << format_double(row.rmse_stats.mean) << ',' << format_double(row.rmse_stats.std) << ','
       << format_double(row.secs_stats.mean) << ',' << format_double(row.secs_stats.std) << '\n';
  }
  return os.str();
}

BenchmarkResult run_benchmark(const BenchmarkOptions& o, std::ostream& log) {
  const Dataset d = load(o.data);
  BenchmarkResult result;

  std::vector<TrainConfig> configs;
  for (const auto& v : o.variants) {
    TrainConfig cfg;
    VariantSummary row;
    row.variant = v;
    row.repeats = o.repeats;
    if (v == "pmf") {
      cfg.variant = KernelVariant::pmf;
      cfg.hp = o.pmf;
    } else {
      cfg.variant = KernelVariant::biased_svd;
      cfg.hp = o.svd;
    }
    if (v == "bcsvd") {
      cfg.row_blocks = o.row_blocks;
      cfg.col_blocks = o.col_blocks;
      cfg.mode = ExecutionMode::parallel;
      cfg.workers = o.workers;
    }
    cfg.stop_metric = o.stop_metric;
    cfg.validate();
    row.grid = std::to_string(cfg.row_blocks) + "x" + std::to_string(cfg.col_blocks);
    row.mode = std::string(to_string(cfg.mode));
    row.workers = cfg.workers;
    configs.push_back(cfg);
    result.rows.push_back(std::move(row));
  }

  json runs = json::array();
  for (std::size_t rep = 0; rep < o.repeats; ++rep) {
    const std::uint64_t seed = o.seed + rep;
    const Split s = split(d.ratings, o.fraction, seed);
    for (std::size_t vi = 0; vi < configs.size(); ++vi) {
      TrainConfig cfg = configs[vi];
      cfg.hp.seed = seed;
      VariantSummary& row = result.rows[vi];
      json run = {{"variant", row.variant}, {"repeat", rep}, {"seed", seed}};
      try {
        const TrainResult tr = train(s.train, &s.test, cfg);
        EvalOptions eo = o.eval;
        eo.variant = cfg.variant;
        const EvalResult er = evaluate(s.test, tr.model, TrainingStats::from(s.train), eo);
        row.rmse.push_back(er.rmse);
        row.secs_per_iter.push_back(secs_per_iter(tr.report));
        run["status"] = "ok";
        run["report"] = report_json(tr.report);
        run["eval"] = eval_json(er);
        log << row.variant << " repeat " << rep << ": test rmse " << fixed(er.rmse, 4) << " after "
            << tr.report.epochs.size() << " epochs (" << to_string(tr.report.stop_reason)
            << "), " << fixed(secs_per_iter(tr.report), 5) << " s/iter\n";
      } catch (const training_diverged& e) {
        row.failures.push_back(e.what());
        result.any_failure = true;
        run["status"] = "FAILED";
        run["error"] = e.what();
        run["report"] = report_json(e.report());
        log << row.variant << " repeat " << rep << ": FAILED " << e.what() << '\n';
      }
      runs.push_back(run);
    }
  }

  json summary = json::array();
  for (auto& row : result.rows) {
    json js = {{"variant", row.variant},
               {"grid", row.grid},
               {"mode", row.mode},
               {"workers", row.workers},
               {"repeats", row.repeats},
               {"failures", row.failures.size()}};
    if (!row.rmse.empty()) {
      row.rmse_stats = aggregate(std::span<const double>(row.rmse));
      row.secs_stats = aggregate(std::span<const double>(row.secs_per_iter));
      js["rmse_mean"] = row.rmse_stats.mean;
      js["rmse_std"] = row.rmse_stats.std;
      js["secs_per_iter_mean"] = row.secs_stats.mean;
      js["secs_per_iter_std"] = row.secs_stats.std;
    }
    summary.push_back(js);
  }

  std::vector<std::pair<std::string, std::string>> kv;
  put_data_config(kv, o.data);
  kv.emplace_back("dataset", o.dataset_name);
  std::string vlist;
  for (const auto& v : o.variants) vlist += (vlist.empty() ? "" : ",") + v;
  kv.emplace_back("variants", vlist);
  kv.emplace_back("repeats", std::to_string(o.repeats));
  kv.emplace_back("grid", std::to_string(o.row_blocks) + "x" + std::to_string(o.col_blocks));
  kv.emplace_back("workers", std::to_string(o.workers));
  kv.emplace_back("fraction", format_double(o.fraction));
  kv.emplace_back("stop-metric", std::string(to_string(o.stop_metric)));
  kv.emplace_back("fallback", std::string(to_string(o.eval.fallback)));
  kv.emplace_back("clamp", o.eval.clamp ? "true" : "false");
  put_hyper_config(kv, o.svd);
  kv.emplace_back("pmf-alpha", format_double(o.pmf.alpha.user_factor));
  kv.emplace_back("pmf-beta", format_double(o.pmf.beta.user_factor));

  json manifest = {{"tool", kVersion},
                   {"command", "benchmark"},
                   {"rng", "mt19937_64/v" + std::to_string(kRandomStreamVersion)},
                   {"std", "sample (n-1)"},
                   {"timing", "block-pass phase only; secs_per_iter = mean over epochs after the first"},
                   {"config", config_json(kv)},
                   {"role_mapping", {{"svd", role_mapping(o.svd)}, {"pmf", role_mapping(o.pmf)}}},
                   {"runs", runs},
                   {"summary", summary}};
  result.manifest_json = manifest.dump(2) + "\n";
  return result;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Block-partitioned matrix factorization for rating prediction", "bmf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::string config_path;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value file (or a run manifest)");
  };

  SplitArgs split_args;
  auto* split_cmd = app.add_subcommand("split", "Write seeded train/test csv folds");
  add_data_flags(split_cmd, split_args.data);
  split_cmd->add_option("--fraction", split_args.fraction, "Training fraction");
  split_cmd->add_option("--seed", split_args.seed, "Split seed");
  split_cmd->add_option("--out-dir", split_args.out_dir)->required();
  add_config(split_cmd);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model and stream per-epoch metrics");
  add_data_flags(train_cmd, train_args.data);
  add_hyper_flags(train_cmd, train_args.hyper);
  train_cmd->add_option("--test", train_args.test, "Test fold (same format as --input)");
  train_cmd->add_option("--variant", train_args.variant, "biased-svd | pmf");
  train_cmd->add_option("--grid", train_args.grid, "Block grid IxJ");
  train_cmd->add_option("--mode", train_args.mode, "serial | parallel");
  train_cmd->add_option("--workers", train_args.workers, "Worker threads (parallel mode)");
  train_cmd->add_option("--stop-metric", train_args.stop_metric, "train | test");
  train_cmd->add_option("--out-dir", train_args.out_dir)->required();
  add_config(train_cmd);

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a saved model on a test fold");
  add_data_flags(eval_cmd, eval_args.data);
  eval_cmd->add_option("--model", eval_args.model, "model.bin written by train")->required();
  eval_cmd->add_option("--fallback", eval_args.fallback, "skip | global-mean | bias-only");
  eval_cmd->add_flag("--clamp", eval_args.clamp, "Clamp predictions to the rating scale");
  add_config(eval_cmd);

  BenchmarkArgs bench_args;
  auto* bench_cmd = app.add_subcommand("benchmark", "Repeated PMF / SVD / block-SVD comparison");
  add_data_flags(bench_cmd, bench_args.data);
  add_hyper_flags(bench_cmd, bench_args.hyper);
  bench_cmd->add_option("--pmf-alpha", bench_args.pmf_alpha, "PMF learning rate");
  bench_cmd->add_option("--pmf-beta", bench_args.pmf_beta, "PMF regularizer");
  bench_cmd->add_option("--variants", bench_args.variants, "Comma list of pmf, svd, bcsvd");
  bench_cmd->add_option("--repeats", bench_args.repeats, "Seeded repeats");
  bench_cmd->add_option("--grid", bench_args.grid, "Block grid for bcsvd");
  bench_cmd->add_option("--workers", bench_args.workers, "Worker threads for bcsvd");
  bench_cmd->add_option("--fraction", bench_args.fraction, "Training fraction");
  bench_cmd->add_option("--stop-metric", bench_args.stop_metric, "train | test");
  bench_cmd->add_option("--fallback", bench_args.fallback, "skip | global-mean | bias-only");
  bench_cmd->add_flag("--clamp", bench_args.clamp, "Clamp predictions to the rating scale");
  bench_cmd->add_option("--out-dir", bench_args.out_dir, "Where to write manifest and summary");
  add_config(bench_cmd);

  try {
    if (const auto cfg_file = find_config_arg(args); cfg_file && !args.empty()) {
      CLI::App* sub = app.get_subcommand_no_throw(args.front());
      if (sub == nullptr) throw config_error("--config needs a subcommand first");
      apply_config(sub, read_config(*cfg_file));
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_code::ok : exit_code::usage;
  } catch (const config_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::usage;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::usage;
  }

  try {
    if (split_cmd->parsed()) return cmd_split(split_args, out);
    if (train_cmd->parsed()) return cmd_train(train_args, out, err);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args, out);
    if (bench_cmd->parsed()) return cmd_benchmark(bench_args, out, err);
  } catch (const config_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::usage;
  } catch (const divergence_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::diverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::data;
  }
  return exit_code::usage;
}

}  // namespace bmf::cli
