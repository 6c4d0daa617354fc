#include "cbrec/cli.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbrec/csv.hpp"
#include "cbrec/errors.hpp"
#include "cbrec/log.hpp"
#include "cbrec/report.hpp"

namespace fs = std::filesystem;

namespace cbrec {

namespace {

const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"data", {"path", "order_seed"}},
      {"engine",
       {"k", "policy", "clustering", "warmup_trials", "eval_fraction", "seed", "seeds",
        "series_window"}},
      {"schedule", {"minibatch_size", "interval_trials"}},
      {"model",
       {"hidden", "learning_rate", "replay_capacity", "update_passes", "update_chunk",
        "static_epochs"}},
      {"dbscan", {"eps", "min_pts"}},
      {"policy",
       {"epsilon", "fee_horizon", "bootstrap_members", "ucb_percentile", "active_explorer_mix",
        "delta", "beta"}},
      {"compare", {"policies", "ks", "jobs"}},
      {"synthetic",
       {"n_items", "categorical_vocab_sizes", "n_continuous", "n_segments", "drift_period",
        "seed", "feature_signal", "continuous_noise", "preference", "preference_row_*"}},
  };
  return schema;
}

Config load_config(const std::string& path) {
  Config cfg = Config::parse_file(path);
  cfg.check_schema(config_schema());
  return cfg;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

PolicyVariant parse_policy_variant(const std::string& label) {
  PolicyVariant variant;
  std::string base = label;
  const std::string suffix = "_cluster";
  if (base.size() > suffix.size() &&
      base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
    variant.clustering = true;
    base = base.substr(0, base.size() - suffix.size());
  }
  const auto id = policy_id_from_string(base);
  if (!id) fail(Errc::bad_config, "unknown policy '" + label + "'");
  variant.policy = *id;
  variant.label = std::string(policy_id_name(*id)) + (variant.clustering ? "_cluster" : "");
  return variant;
}

EngineConfig engine_config_from(const Config& cfg, const PolicyVariant& variant) {
  EngineConfig ec;
  ec.k = static_cast<size_t>(cfg.get_int("engine", "k", 1));
  ec.policy = variant.policy;
  ec.clustering_enabled = variant.clustering || cfg.get_bool("engine", "clustering", false);
  ec.warmup_trials = static_cast<size_t>(cfg.get_int("engine", "warmup_trials", 5000));
  ec.eval_fraction = cfg.get_real("engine", "eval_fraction", 0.3);
  ec.seed = static_cast<uint64_t>(cfg.get_int("engine", "seed", 1));
  ec.series_window = static_cast<size_t>(cfg.get_int("engine", "series_window", 1000));

  ec.schedule.minibatch_size =
      static_cast<size_t>(cfg.get_int("schedule", "minibatch_size", 1000));
  ec.schedule.interval_trials =
      static_cast<size_t>(cfg.get_int("schedule", "interval_trials", 5000));

  if (cfg.has("model", "hidden")) {
    ec.model.hidden.clear();
    for (int64_t h : cfg.get_int_list("model", "hidden")) {
      ec.model.hidden.push_back(static_cast<size_t>(h));
    }
  }
  ec.model.learning_rate = cfg.get_real("model", "learning_rate", 0.1);
  ec.model.replay_capacity =
      static_cast<size_t>(cfg.get_int("model", "replay_capacity", 0));
  ec.model.update_passes = static_cast<size_t>(cfg.get_int("model", "update_passes", 4));
  ec.model.update_chunk = static_cast<size_t>(cfg.get_int("model", "update_chunk", 50));
  ec.model.static_epochs = static_cast<size_t>(cfg.get_int("model", "static_epochs", 3));

  const std::string eps = cfg.get_str("dbscan", "eps", "auto");
  if (eps != "auto") ec.dbscan_eps = parse_real(eps, "[dbscan] eps");
  ec.dbscan_min_pts = static_cast<int>(cfg.get_int("dbscan", "min_pts", 4));

  ec.policy_cfg.epsilon = cfg.get_real("policy", "epsilon", 0.2);
  ec.policy_cfg.fee_explore_trials =
      static_cast<size_t>(cfg.get_int("policy", "fee_horizon", 5000));
  ec.policy_cfg.bootstrap_members =
      static_cast<int>(cfg.get_int("policy", "bootstrap_members", 10));
  ec.policy_cfg.ucb_percentile = cfg.get_real("policy", "ucb_percentile", 80.0);
  ec.policy_cfg.active_explorer_mix = cfg.get_real("policy", "active_explorer_mix", 0.5);
  ec.policy_cfg.dbgd_delta = cfg.get_real("policy", "delta", 1.0);
  ec.policy_cfg.dbgd_beta = cfg.get_real("policy", "beta", 0.05);
  return ec;
}

SyntheticEnvSpec synthetic_spec_from(const Config& cfg) {
  SyntheticEnvSpec spec;
  spec.n_items = static_cast<int>(cfg.get_int("synthetic", "n_items"));
  for (int64_t v : cfg.get_int_list("synthetic", "categorical_vocab_sizes")) {
    spec.categorical_vocab_sizes.push_back(static_cast<int>(v));
  }
  spec.n_continuous = static_cast<int>(cfg.get_int("synthetic", "n_continuous", 0));
  spec.n_segments = static_cast<int>(cfg.get_int("synthetic", "n_segments"));
  const int64_t drift = cfg.get_int("synthetic", "drift_period", 0);
  if (drift > 0) spec.drift_period = static_cast<int>(drift);
  spec.seed = static_cast<uint64_t>(cfg.get_int("synthetic", "seed", 42));
  spec.feature_signal = cfg.get_real("synthetic", "feature_signal", 0.85);
  spec.continuous_noise = cfg.get_real("synthetic", "continuous_noise", 0.12);

  const std::string pref = cfg.get_str("synthetic", "preference", "concentrated:0.5,0.2");
  if (pref == "rows") {
    for (int s = 0; s < spec.n_segments; ++s) {
      spec.segment_preference_matrix.push_back(
          cfg.get_real_list("synthetic", "preference_row_" + std::to_string(s)));
    }
  } else if (pref.rfind("dirichlet:", 0) == 0) {
    const double alpha = parse_real(pref.substr(10), "[synthetic] preference alpha");
    spec.segment_preference_matrix =
        dirichlet_preferences(spec.n_segments, spec.n_items, alpha, mix_seed(spec.seed, 0xD1));
  } else if (pref.rfind("concentrated:", 0) == 0) {
    std::istringstream ss(pref.substr(13));
    std::string main_s, second_s;
    if (!std::getline(ss, main_s, ',') || !std::getline(ss, second_s)) {
      fail(Errc::bad_config, "expected concentrated:<main>,<second>");
    }
    spec.segment_preference_matrix = concentrated_preferences(
        spec.n_segments, spec.n_items, parse_real(main_s, "[synthetic] preference main mass"),
        parse_real(second_s, "[synthetic] preference second mass"));
  } else {
    fail(Errc::bad_config,
         "[synthetic] preference must be 'rows', 'dirichlet:<alpha>' or "
         "'concentrated:<main>,<second>'");
  }
  validate_spec(spec);
  return spec;
}

namespace {

struct LoadedData {
  std::string path;
  uint64_t fingerprint = 0;
  FeatureSchema schema;
  std::vector<EncodedTrial> stream;
};

LoadedData load_data(const Config& cfg, const std::string& override_path) {
  LoadedData data;
  data.path = !override_path.empty() ? override_path : cfg.get_str("data", "path");
  data.fingerprint = fnv1a_file(data.path);
  const auto raws = interactions_from_csv(data.path);
  data.schema = fit_schema(raws);
  std::optional<uint64_t> order_seed;
  if (cfg.has("data", "order_seed")) {
    order_seed = static_cast<uint64_t>(cfg.get_int("data", "order_seed"));
  }
  EncodeStats stats;
  data.stream = make_stream(raws, data.schema, order_seed, &stats);
  if (stats.unknown_category_count > 0) {
    log_warn(std::to_string(stats.unknown_category_count) +
             " unseen categorical values encoded as zero blocks");
  }
  log_info("loaded " + std::to_string(data.stream.size()) + " trials, " +
           std::to_string(data.schema.n_items()) + " items, context_dim=" +
           std::to_string(data.schema.context_dim()));
  return data;
}

int exit_code_for(const Error& e) {
  if (is_config_error(e.code())) return 2;
  if (is_data_error(e.code())) return 3;
  return 1;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int cmd_run(const RunArgs& args) {
  return guarded([&] {
    const auto start = std::chrono::steady_clock::now();
    Config cfg = load_config(args.config_path);
    PolicyVariant variant =
        parse_policy_variant(args.policy ? *args.policy : cfg.get_str("engine", "policy"));
    EngineConfig ec = engine_config_from(cfg, variant);
    if (args.seed) ec.seed = *args.seed;
    if (args.k) ec.k = *args.k;
    if (ec.clustering_enabled) {
      variant.clustering = true;
      variant.label = std::string(policy_id_name(variant.policy)) + "_cluster";
    }

    LoadedData data = load_data(cfg, args.data_path);
    ec.context_dim = data.schema.context_dim();
    ec.n_items = data.schema.n_items();

    fs::create_directories(args.out_dir);
    const ReplayResult result = run_replay(data.stream, ec);

    const std::string stem =
        variant.label + "_k" + std::to_string(ec.k) + "_seed" + std::to_string(ec.seed);
    const fs::path report_path = fs::path(args.out_dir) / ("report_" + stem + ".json");
    const fs::path series_path = fs::path(args.out_dir) / ("series_" + stem + ".csv");
    write_text_file(report_path.string(),
                    report_to_json(result.report, variant.label, &data.schema).dump(2) + "\n");
    write_series_csv(series_path.string(), result.report);

    Manifest manifest;
    manifest.command = "run";
    manifest.config_path = args.config_path;
    manifest.resolved_config = engine_config_to_json(ec);
    manifest.data_path = data.path;
    manifest.data_fingerprint = data.fingerprint;
    manifest.outputs = {report_path.string(), series_path.string()};
    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const fs::path manifest_path = fs::path(args.out_dir) / "manifest_run.json";
    write_manifest(manifest_path.string(), manifest);

    log_info("avg_ctr=" + format_real(result.report.avg_ctr) +
             " precision_at_k=" + format_real(result.report.precision_at_k) +
             " mean_candidates_scored=" + format_real(result.report.mean_candidates_scored));
    return 0;
  });
}

namespace {

struct CompareCell {
  PolicyVariant variant;
  size_t k = 0;
  uint64_t seed = 0;
  MetricsReport report;
};

}  // namespace

int cmd_compare(const CompareArgs& args) {
  return guarded([&] {
    const auto start = std::chrono::steady_clock::now();
    Config cfg = load_config(args.config_path);

    std::vector<std::string> labels;
    if (args.policy) {
      labels = {*args.policy};
    } else if (cfg.has("compare", "policies")) {
      labels = cfg.get_list("compare", "policies");
    } else {
      labels = {"static_lr",        "epsilon_greedy", "fee",
                "bootstrap_ucb",    "bootstrap_ts",   "active_explorer",
                "dbgd_lr",          "dbgd_mlp",       "dbgd_mlp_cluster"};
    }
    std::vector<PolicyVariant> variants;
    for (const auto& label : labels) variants.push_back(parse_policy_variant(label));

    std::vector<size_t> ks;
    if (args.k) {
      ks = {*args.k};
    } else if (cfg.has("compare", "ks")) {
      for (int64_t k : cfg.get_int_list("compare", "ks")) ks.push_back(static_cast<size_t>(k));
    } else {
      ks = {1, 3};
    }

    std::vector<uint64_t> seeds;
    if (args.seed) {
      seeds = {*args.seed};
    } else if (cfg.has("engine", "seeds")) {
      for (int64_t s : cfg.get_int_list("engine", "seeds")) {
        seeds.push_back(static_cast<uint64_t>(s));
      }
    } else {
      seeds = {static_cast<uint64_t>(cfg.get_int("engine", "seed", 1))};
    }
    if (variants.empty() || ks.empty() || seeds.empty()) {
      fail(Errc::bad_config, "compare needs at least one policy, k, and seed");
    }

    LoadedData data = load_data(cfg, args.data_path);

    std::vector<CompareCell> cells;
    for (const auto& variant : variants) {
      for (size_t k : ks) {
        for (uint64_t seed : seeds) {
          cells.push_back({variant, k, seed, {}});
        }
      }
    }

    size_t jobs = args.jobs ? *args.jobs
                            : static_cast<size_t>(cfg.get_int("compare", "jobs", 0));
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, cells.size());

    // Cells are independent: each builds its own engine over the shared
    // read-only stream, so worker order cannot affect any output byte.
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::string error_message;
    std::mutex error_mutex;
    auto worker = [&] {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= cells.size() || failed.load()) break;
        try {
          EngineConfig ec = engine_config_from(cfg, cells[i].variant);
          ec.k = cells[i].k;
          ec.seed = cells[i].seed;
          ec.context_dim = data.schema.context_dim();
          ec.n_items = data.schema.n_items();
          cells[i].report = run_replay(data.stream, ec).report;
        } catch (const std::exception& e) {
          std::scoped_lock lock(error_mutex);
          failed.store(true);
          if (error_message.empty()) error_message = e.what();
        }
      }
    };
    std::vector<std::thread> pool;
    for (size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failed.load()) fail(Errc::bad_config, "compare cell failed: " + error_message);

    fs::create_directories(args.out_dir);
    std::vector<std::string> outputs;

    std::ostringstream table;
    write_csv_row(table,
                  {"policy", "k", "seed", "avg_ctr", "precision_at_k", "mean_candidates_scored"});
    for (const auto& variant : variants) {
      for (size_t k : ks) {
        std::vector<double> ctrs, precisions, cand;
        for (const auto& cell : cells) {
          if (cell.variant.label != variant.label || cell.k != k) continue;
          table << variant.label << ',' << k << ',' << cell.seed << ','
                << format_real(cell.report.avg_ctr) << ','
                << format_real(cell.report.precision_at_k) << ','
                << format_real(cell.report.mean_candidates_scored) << '\n';
          ctrs.push_back(cell.report.avg_ctr);
          precisions.push_back(cell.report.precision_at_k);
          cand.push_back(cell.report.mean_candidates_scored);
        }
        table << variant.label << ',' << k << ",median," << format_real(median(ctrs)) << ','
              << format_real(median(precisions)) << ',' << format_real(median(cand)) << '\n';
      }
    }
    const fs::path table_path = fs::path(args.out_dir) / "compare_table.csv";
    write_text_file(table_path.string(), table.str());
    outputs.push_back(table_path.string());

    for (const auto& cell : cells) {
      const std::string stem = cell.variant.label + "_k" + std::to_string(cell.k) + "_seed" +
                               std::to_string(cell.seed);
      const fs::path series_path = fs::path(args.out_dir) / ("series_" + stem + ".csv");
      write_series_csv(series_path.string(), cell.report);
      outputs.push_back(series_path.string());
    }

    Manifest manifest;
    manifest.command = "compare";
    manifest.config_path = args.config_path;
    manifest.resolved_config["policies"] = labels;
    manifest.resolved_config["ks"] = ks;
    manifest.resolved_config["seeds"] = seeds;
    manifest.resolved_config["engine"] =
        engine_config_to_json(engine_config_from(cfg, variants.front()));
    manifest.data_path = data.path;
    manifest.data_fingerprint = data.fingerprint;
    manifest.outputs = outputs;
    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const fs::path manifest_path = fs::path(args.out_dir) / "manifest_compare.json";
    write_manifest(manifest_path.string(), manifest);

    log_info("compare finished: " + std::to_string(cells.size()) + " cells -> " +
             table_path.string());
    return 0;
  });
}

int cmd_synth(const SynthArgs& args) {
  return guarded([&] {
    const auto start = std::chrono::steady_clock::now();
    Config cfg = load_config(args.config_path);
    SyntheticEnvSpec spec = synthetic_spec_from(cfg);
    if (args.seed) spec.seed = *args.seed;
    if (args.n_trials == 0) fail(Errc::bad_config, "synth needs --trials >= 1");

    const auto rows = generate_synthetic(spec, args.n_trials);
    if (const auto parent = fs::path(args.out_path).parent_path(); !parent.empty()) {
      fs::create_directories(parent);
    }
    interactions_to_csv(args.out_path, rows);

    Manifest manifest;
    manifest.command = "synth";
    manifest.config_path = args.config_path;
    manifest.resolved_config["n_items"] = spec.n_items;
    manifest.resolved_config["categorical_vocab_sizes"] = spec.categorical_vocab_sizes;
    manifest.resolved_config["n_continuous"] = spec.n_continuous;
    manifest.resolved_config["n_segments"] = spec.n_segments;
    manifest.resolved_config["drift_period"] = spec.drift_period ? *spec.drift_period : 0;
    manifest.resolved_config["seed"] = spec.seed;
    manifest.resolved_config["feature_signal"] = spec.feature_signal;
    manifest.resolved_config["continuous_noise"] = spec.continuous_noise;
    manifest.resolved_config["preference_matrix"] = spec.segment_preference_matrix;
    manifest.resolved_config["n_trials"] = args.n_trials;
    manifest.data_path = args.out_path;
    manifest.data_fingerprint = fnv1a_file(args.out_path);
    manifest.outputs = {args.out_path};
    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(args.out_path + ".manifest.json", manifest);

    log_info("wrote " + std::to_string(args.n_trials) + " rows to " + args.out_path);
    return 0;
  });
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Contextual-bandit recommendation engine and replay simulator"};
  app.require_subcommand(1);

  RunArgs run_args;
  CompareArgs compare_args;
  SynthArgs synth_args;
  uint64_t seed_opt = 0;
  size_t k_opt = 0;
  std::string policy_opt;
  size_t jobs_opt = 0;

  auto* run = app.add_subcommand("run", "Replay one policy over a data stream");
  run->add_option("--config", run_args.config_path, "config file")->required();
  run->add_option("--data", run_args.data_path, "interaction CSV (overrides [data] path)");
  run->add_option("--out", run_args.out_dir, "output directory")->required();
  auto* run_seed = run->add_option("--seed", seed_opt, "seed override");
  auto* run_k = run->add_option("--k", k_opt, "slate size override");
  auto* run_policy = run->add_option("--policy", policy_opt, "policy override");

  auto* compare = app.add_subcommand("compare", "Replay the policy matrix on one stream");
  compare->add_option("--config", compare_args.config_path, "config file")->required();
  compare->add_option("--data", compare_args.data_path, "interaction CSV (overrides [data] path)");
  compare->add_option("--out", compare_args.out_dir, "output directory")->required();
  auto* cmp_seed = compare->add_option("--seed", seed_opt, "restrict to one seed");
  auto* cmp_k = compare->add_option("--k", k_opt, "restrict to one k");
  auto* cmp_policy = compare->add_option("--policy", policy_opt, "restrict to one policy");
  auto* cmp_jobs = compare->add_option("--jobs", jobs_opt, "worker threads (0 = hardware)");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic interaction CSV");
  synth->add_option("--config", synth_args.config_path, "config file with a [synthetic] section")
      ->required();
  synth->add_option("--trials", synth_args.n_trials, "number of rows")->required();
  synth->add_option("--out", synth_args.out_path, "output CSV path")->required();
  auto* synth_seed = synth->add_option("--seed", seed_opt, "seed override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (run->parsed()) {
    if (*run_seed) run_args.seed = seed_opt;
    if (*run_k) run_args.k = k_opt;
    if (*run_policy) run_args.policy = policy_opt;
    return cmd_run(run_args);
  }
  if (compare->parsed()) {
    if (*cmp_seed) compare_args.seed = seed_opt;
    if (*cmp_k) compare_args.k = k_opt;
    if (*cmp_policy) compare_args.policy = policy_opt;
    if (*cmp_jobs) compare_args.jobs = jobs_opt;
    return cmd_compare(compare_args);
  }
  if (synth->parsed()) {
    if (*synth_seed) synth_args.seed = seed_opt;
    return cmd_synth(synth_args);
  }
  return 2;
}

}  // namespace cbrec
