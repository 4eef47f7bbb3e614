#include "gdnn/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "gdnn/error.hpp"

namespace gdnn {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError("config key " + key + ": cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key " + key + ": expected true or false, got '" + value + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(items[i]);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "data.split_dir",      "data.edge_features",   "data.num_nodes",       "data.eval_graph",
      "features.k",          "features.strategy",    "features.seed",        "features.standardize",
      "model.num_layers",    "model.hidden_dim",     "model.edge_mode",      "model.edge_dim",
      "model.fanout",        "model.predictor_hidden", "model.update_rule",  "model.activation",
      "model.dropout",       "train.epochs",         "train.batch_size",     "train.neg_per_pos",
      "train.lr",            "train.beta1",          "train.beta2",          "train.eps",
      "train.seeds",         "train.eval_every",     "train.hits_k",         "output.dir",
      "output.log_wall_time"};
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "data.split_dir") cfg.split_dir = value;
  else if (key == "data.edge_features") cfg.edge_features = value;
  else if (key == "data.num_nodes") cfg.num_nodes = parse_number<std::size_t>(key, value);
  else if (key == "data.eval_graph") {
    if (value == "train") cfg.eval_graph = EvalGraph::kTrain;
    else if (value == "train_valid") cfg.eval_graph = EvalGraph::kTrainValid;
    else throw ConfigError("data.eval_graph must be train or train_valid");
  }
  else if (key == "features.k") cfg.targets.k = parse_number<std::size_t>(key, value);
  else if (key == "features.strategy") cfg.targets.kind = parse_target_kind(value);
  else if (key == "features.seed") cfg.feature_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "features.standardize") cfg.standardize = parse_bool(key, value);
  else if (key == "model.num_layers") cfg.model.num_layers = parse_number<std::size_t>(key, value);
  else if (key == "model.hidden_dim") cfg.model.hidden_dim = parse_number<std::size_t>(key, value);
  else if (key == "model.edge_mode") cfg.model.edge_mode = parse_edge_mode(value);
  else if (key == "model.edge_dim") cfg.model.edge_dim = parse_number<std::size_t>(key, value);
  else if (key == "model.fanout") cfg.model.fanout = parse_number<std::size_t>(key, value);
  else if (key == "model.predictor_hidden") {
    cfg.model.predictor_hidden = value.empty() ? std::vector<std::size_t>{}
                                               : parse_list<std::size_t>(key, value);
  }
  else if (key == "model.update_rule") cfg.model.update_rule = parse_update_rule(value);
  else if (key == "model.activation") cfg.model.activation = parse_activation(value);
  else if (key == "model.dropout") cfg.model.dropout = parse_number<double>(key, value);
  else if (key == "train.epochs") cfg.train.epochs = parse_number<std::size_t>(key, value);
  else if (key == "train.batch_size") cfg.train.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "train.neg_per_pos") cfg.train.neg_per_pos = parse_number<std::size_t>(key, value);
  else if (key == "train.lr") cfg.train.adam.lr = parse_number<double>(key, value);
  else if (key == "train.beta1") cfg.train.adam.beta1 = parse_number<double>(key, value);
  else if (key == "train.beta2") cfg.train.adam.beta2 = parse_number<double>(key, value);
  else if (key == "train.eps") cfg.train.adam.eps = parse_number<double>(key, value);
  else if (key == "train.seeds") cfg.train.seeds = parse_list<std::uint64_t>(key, value);
  else if (key == "train.eval_every") cfg.train.eval_every = parse_number<std::size_t>(key, value);
  else if (key == "train.hits_k") cfg.train.hits_k = parse_number<std::size_t>(key, value);
  else if (key == "output.dir") cfg.out_dir = value;
  else if (key == "output.log_wall_time") cfg.log_wall_time = parse_bool(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  if (targets.k < 1) throw ConfigError("features.k must be at least 1");
  GdnnConfig m = model;
  m.input_dim = targets.k;
  m.validate();
  train.validate();
  if (model.edge_mode == EdgeMode::kProvided && edge_features.empty()) {
    throw ConfigError("model.edge_mode=provided requires data.edge_features");
  }
}

RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body[0] == '#' || body[0] == ';') continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(body.substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    if (section.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": key outside a [section]");
    }
    const auto key = section + "." + trim(body.substr(0, eq));
    const auto value = trim(body.substr(eq + 1));
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!base_dir.empty()) {
    for (auto* p : {&cfg.split_dir, &cfg.edge_features, &cfg.out_dir}) {
      if (!p->empty() && p->is_relative()) *p = (base_dir / *p).lexically_normal();
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

std::string config_to_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "[data]\n"
      << "split_dir = " << cfg.split_dir.string() << '\n'
      << "edge_features = " << cfg.edge_features.string() << '\n'
      << "num_nodes = " << cfg.num_nodes << '\n'
      << "eval_graph = " << (cfg.eval_graph == EvalGraph::kTrain ? "train" : "train_valid") << '\n'
      << "\n[features]\n"
      << "k = " << cfg.targets.k << '\n'
      << "strategy = " << to_string(cfg.targets.kind) << '\n'
      << "seed = " << cfg.feature_seed << '\n'
      << "standardize = " << (cfg.standardize ? "true" : "false") << '\n'
      << "\n[model]\n"
      << "num_layers = " << cfg.model.num_layers << '\n'
      << "hidden_dim = " << cfg.model.hidden_dim << '\n'
      << "edge_mode = " << to_string(cfg.model.edge_mode) << '\n'
      << "edge_dim = " << cfg.model.edge_dim << '\n'
      << "fanout = " << cfg.model.fanout << '\n'
      << "predictor_hidden = " << join(cfg.model.predictor_hidden) << '\n'
      << "update_rule = " << to_string(cfg.model.update_rule) << '\n'
      << "activation = " << to_string(cfg.model.activation) << '\n'
      << "dropout = " << format_real(cfg.model.dropout) << '\n'
      << "\n[train]\n"
      << "epochs = " << cfg.train.epochs << '\n'
      << "batch_size = " << cfg.train.batch_size << '\n'
      << "neg_per_pos = " << cfg.train.neg_per_pos << '\n'
      << "lr = " << format_real(cfg.train.adam.lr) << '\n'
      << "beta1 = " << format_real(cfg.train.adam.beta1) << '\n'
      << "beta2 = " << format_real(cfg.train.adam.beta2) << '\n'
      << "eps = " << format_real(cfg.train.adam.eps) << '\n'
      << "seeds = " << join(cfg.train.seeds) << '\n'
      << "eval_every = " << cfg.train.eval_every << '\n'
      << "hits_k = " << cfg.train.hits_k << '\n'
      << "\n[output]\n"
      << "dir = " << cfg.out_dir.string() << '\n'
      << "log_wall_time = " << (cfg.log_wall_time ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace gdnn
