// gdnn: command-line driver for import, feature encoding, training,
// evaluation, prediction, gradient checking and hyperparameter sweeps.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gdnn/config.hpp"
#include "gdnn/error.hpp"
#include "gdnn/pipeline.hpp"

namespace {

using gdnn::ExitCode;

struct ConfigFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd, bool config_required = true) {
    auto* opt = cmd->add_option("--config", config, "Run configuration file");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Override the seed from the config");
    cmd->add_option("--out", out, "Output directory (overrides output.dir)");
    cmd->add_option("--set", overrides, "Override a config key, as section.key=value");
  }

  gdnn::RunConfig load(bool seed_is_feature_seed = false) const {
    auto cfg = gdnn::load_config(config);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw gdnn::ConfigError("--set expects section.key=value, got " + o);
      gdnn::set_config_value(cfg, o.substr(0, eq), o.substr(eq + 1));
    }
    if (seed) {
      if (seed_is_feature_seed) cfg.feature_seed = *seed;
      else cfg.train.seeds = {*seed};
    }
    if (!out.empty()) cfg.out_dir = out;
    cfg.validate();
    return cfg;
  }
};

template <typename T>
std::vector<T> parse_csv_list(const std::string& text, T (*parse)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(parse(item));
  }
  return out;
}

std::size_t parse_size(const std::string& s) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw gdnn::ConfigError("not a non-negative integer: " + s);
  }
}

gdnn::TargetKind parse_kind(const std::string& s) { return gdnn::parse_target_kind(s); }

int report_failure(const gdnn::ExperimentResult& result) {
  if (!result.failure) return 0;
  std::cerr << "error: " << *result.failure << '\n';
  return result.failure_code ? result.failure_code : static_cast<int>(ExitCode::kNumeric);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GDNN link prediction: distance-encoded edge-aware message passing"};
  app.require_subcommand(1);

  // import
  gdnn::ImportOptions import_opts;
  auto* import_cmd = app.add_subcommand("import", "Densify node ids and write a split directory");
  auto* edges_opt = import_cmd->add_option("--edges", import_opts.edges, "Raw edge list to split")
                        ->check(CLI::ExistingFile);
  import_cmd->add_option("--split-dir", import_opts.split_in, "Pre-split directory with raw ids")
      ->check(CLI::ExistingDirectory)
      ->excludes(edges_opt);
  import_cmd->add_option("--out", import_opts.out_dir, "Destination split directory")->required();
  import_cmd->add_option("--valid-frac", import_opts.valid_frac, "Held-out validation fraction");
  import_cmd->add_option("--test-frac", import_opts.test_frac, "Held-out test fraction");
  import_cmd->add_option("--negatives", import_opts.negatives, "Negatives per held-out set");
  import_cmd->add_option("--seed", import_opts.seed, "Split seed");

  ConfigFlags encode_flags, train_flags, sweep_flags;
  auto* encode_cmd = app.add_subcommand("encode", "Write the anchor-distance feature matrix");
  encode_flags.attach(encode_cmd);
  auto* train_cmd = app.add_subcommand("train", "Train one model per seed");
  train_flags.attach(train_cmd);

  std::string checkpoint, split_dir, pairs_file, out_file;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on its split");
  eval_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", split_dir, "Split directory (defaults to the one trained on)");
  eval_cmd->add_option("--out", out_file, "Also write the metrics JSON here");

  auto* predict_cmd = app.add_subcommand("predict", "Score node pairs with a checkpoint");
  predict_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--pairs", pairs_file, "Edge list of pairs to score")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--out", out_file, "Output file (default stdout)");

  double tolerance = 1e-5;
  double eps = 1e-6;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  gradcheck_cmd->add_option("--tolerance", tolerance, "Maximum relative error");
  gradcheck_cmd->add_option("--eps", eps, "Central-difference step");

  std::string ks_text = "8,32,128";
  std::string strategies_text = "random,min_degree,max_degree";
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid over target count and strategy");
  sweep_flags.attach(sweep_cmd);
  sweep_cmd->add_option("--ks", ks_text, "Comma-separated target counts");
  sweep_cmd->add_option("--strategies", strategies_text, "Comma-separated target strategies");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (*import_cmd) {
      const auto s = gdnn::import_dataset(import_opts);
      std::cout << "imported " << s.num_nodes << " nodes: " << s.train << " train, " << s.valid
                << " valid, " << s.test << " test edges -> " << import_opts.out_dir.string() << '\n';
    } else if (*encode_cmd) {
      const auto cfg = encode_flags.load(true);
      const auto f = gdnn::encode_to_dir(cfg, cfg.out_dir);
      std::cout << "wrote " << f.data.rows() << "x" << f.data.cols() << " features to "
                << (cfg.out_dir / "features.txt").string() << '\n';
    } else if (*train_cmd) {
      const auto cfg = train_flags.load();
      const auto result = gdnn::train_to_dir(cfg);
      std::cout << gdnn::summary_json_line(result, cfg.train.hits_k) << '\n';
      return report_failure(result);
    } else if (*eval_cmd) {
      const auto r = gdnn::eval_checkpoint(
          checkpoint, split_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(split_dir));
      nlohmann::ordered_json j;
      j["valid_hits_at_k"] = r.valid_hits;
      j["test_hits_at_k"] = r.test_hits;
      std::cout << j.dump() << '\n';
      if (!out_file.empty()) std::ofstream(out_file, std::ios::binary) << j.dump() << '\n';
    } else if (*predict_cmd) {
      const auto pairs = gdnn::load_edge_list_file(pairs_file);
      const auto scored = gdnn::predict_pairs(checkpoint, pairs);
      std::ofstream file;
      if (!out_file.empty()) {
        file.open(out_file, std::ios::binary);
        if (!file) throw gdnn::DataError("cannot write " + out_file);
      }
      std::ostream& out = out_file.empty() ? std::cout : file;
      for (const auto& s : scored) out << s.u << ' ' << s.v << ' ' << gdnn::format_real(s.probability) << '\n';
    } else if (*gradcheck_cmd) {
      bool ok = true;
      for (const auto& c : gdnn::run_gradcheck_suite(eps)) {
        const bool pass = c.report.max_rel_error < tolerance;
        ok = ok && pass;
        std::printf("%-36s %s  max_rel_err=%.3e  worst=%s[%zu]  coords=%zu\n", c.name.c_str(),
                    pass ? "PASS" : "FAIL", c.report.max_rel_error, c.report.worst_param.c_str(),
                    c.report.worst_index, c.report.coordinates);
      }
      return ok ? 0 : static_cast<int>(ExitCode::kNumeric);
    } else if (*sweep_cmd) {
      const auto cfg = sweep_flags.load();
      const auto ks = parse_csv_list<std::size_t>(ks_text, parse_size);
      const auto strategies = parse_csv_list<gdnn::TargetKind>(strategies_text, parse_kind);
      if (ks.empty() || strategies.empty()) throw gdnn::ConfigError("sweep needs at least one k and strategy");
      const auto rows = gdnn::run_sweep(cfg, ks, strategies);
      gdnn::write_sweep_csv(std::cout, rows);
    }
  } catch (const gdnn::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  }
  return 0;
}
