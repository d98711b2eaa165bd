#include "sgrad/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "sgrad/error.hpp"

namespace sgrad {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& item : split_list(v)) {
    out.push_back(static_cast<int>(parse_u64(key, item)));
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += items[i];
  }
  return out;
}

std::string join_int_list(const std::vector<int>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(items[i]);
  }
  return out;
}

}  // namespace

DenoiserSpec ExperimentConfig::denoiser_spec() const {
  DenoiserSpec s;
  s.data_dim = dataset.data_dim();
  s.hidden = model.hidden;
  s.time_dim = model.time_dim;
  s.emb_dim = model.emb_dim;
  return s;
}

ProjectionConfig ExperimentConfig::projection_config(double eta) const {
  ProjectionConfig p;
  p.lambda = projection.lambda;
  p.epsilon = projection.epsilon;
  p.eta = eta;
  p.rescale_enabled = projection.rescale;
  return p;
}

void ExperimentConfig::validate() const {
  dataset.validate();
  if (model.hidden == 0 || model.emb_dim == 0) throw ConfigError("config: model dims must be positive");
  if (model.time_dim == 0 || model.time_dim % 2 != 0) {
    throw ConfigError("config: model.time_dim must be positive and even");
  }
  if (model.finetune_mode != "full" && model.finetune_mode != "adapters") {
    throw ConfigError("config: model.finetune_mode must be full or adapters");
  }
  if (model.finetune_mode == "adapters" && model.adapter_rank == 0) {
    throw ConfigError("config: adapter mode needs adapter_rank >= 1");
  }
  if (schedule.T < 1) throw ConfigError("config: schedule.T must be >= 1");
  if (!(schedule.beta_start > 0.0 && schedule.beta_start <= schedule.beta_end &&
        schedule.beta_end < 1.0)) {
    throw ConfigError("config: need 0 < beta_start <= beta_end < 1");
  }
  if (!(pretrain.lr > 0.0) || !(finetune.lr > 0.0)) throw ConfigError("config: lr must be > 0");
  if (pretrain.batch == 0 || finetune.batch == 0) throw ConfigError("config: batch must be >= 1");
  if (!(projection.lambda >= 0.0 && projection.lambda <= 1.0)) {
    throw ConfigError("config: projection.lambda must be in [0,1]");
  }
  if (!(projection.epsilon >= 0.0)) throw ConfigError("config: projection.epsilon must be >= 0");
  if (eval.sample_count == 0 || eval.grid_resolution == 0 || eval.leakage_samples == 0) {
    throw ConfigError("config: eval sizes must be positive");
  }
  if (eval.amplification_trials < 1 || eval.amplification_draws.empty()) {
    throw ConfigError("config: amplification settings must be positive");
  }
  if (attack.steps < 1 || !(attack.lr > 0.0) || attack.objective_draws < 1 ||
      attack.score_samples == 0 || attack.targets == 0) {
    throw ConfigError("config: attack settings must be positive");
  }
  if (out_dir.empty()) throw ConfigError("config: out_dir must be set");
}

namespace {

void apply_key(ExperimentConfig& c, const std::string& key, const std::string& v) {
  auto& d = c.dataset;
  if (key == "dataset.kind") d.kind = v;
  else if (key == "dataset.concepts") d.concepts = split_list(v);
  else if (key == "dataset.sensitive_id") d.sensitive_id = v;
  else if (key == "dataset.sensitive_main") d.sensitive_main = v;
  else if (key == "dataset.sensitive_feat") d.sensitive_feat = v;
  else if (key == "dataset.size") d.size = parse_u64(key, v);
  else if (key == "dataset.sensitive_fraction") d.sensitive_fraction = parse_double(key, v);
  else if (key == "dataset.concept_sigma") d.concept_sigma = parse_double(key, v);
  else if (key == "dataset.sensitive_sigma") d.sensitive_sigma = parse_double(key, v);
  else if (key == "dataset.feature_dx") d.feature_dx = parse_double(key, v);
  else if (key == "dataset.feature_dy") d.feature_dy = parse_double(key, v);
  else if (key == "dataset.glyph_noise") d.glyph_noise = parse_double(key, v);
  else if (key == "dataset.prompt_overlap") d.prompt_overlap = parse_double(key, v);
  else if (key == "dataset.seed") d.seed = parse_u64(key, v);
  else if (key == "model.hidden") c.model.hidden = parse_u64(key, v);
  else if (key == "model.time_dim") c.model.time_dim = parse_u64(key, v);
  else if (key == "model.emb_dim") c.model.emb_dim = parse_u64(key, v);
  else if (key == "model.adapter_rank") c.model.adapter_rank = parse_u64(key, v);
  else if (key == "model.finetune_mode") c.model.finetune_mode = v;
  else if (key == "model.adapter_layers") c.model.adapter_layers = split_list(v);
  else if (key == "schedule.T") c.schedule.T = parse_u64(key, v);
  else if (key == "schedule.beta_start") c.schedule.beta_start = parse_double(key, v);
  else if (key == "schedule.beta_end") c.schedule.beta_end = parse_double(key, v);
  else if (key == "pretrain.steps") c.pretrain.steps = parse_u64(key, v);
  else if (key == "pretrain.lr") c.pretrain.lr = parse_double(key, v);
  else if (key == "pretrain.batch") c.pretrain.batch = parse_u64(key, v);
  else if (key == "finetune.steps") c.finetune.steps = parse_u64(key, v);
  else if (key == "finetune.lr") c.finetune.lr = parse_double(key, v);
  else if (key == "finetune.batch") c.finetune.batch = parse_u64(key, v);
  else if (key == "projection.lambda") c.projection.lambda = parse_double(key, v);
  else if (key == "projection.epsilon") c.projection.epsilon = parse_double(key, v);
  else if (key == "projection.rescale") c.projection.rescale = parse_bool(key, v);
  else if (key == "eval.sample_count") c.eval.sample_count = parse_u64(key, v);
  else if (key == "eval.grid_resolution") c.eval.grid_resolution = parse_u64(key, v);
  else if (key == "eval.leakage_samples") c.eval.leakage_samples = parse_u64(key, v);
  else if (key == "eval.amplification_trials") c.eval.amplification_trials = static_cast<int>(parse_u64(key, v));
  else if (key == "eval.amplification_draws") c.eval.amplification_draws = parse_int_list(key, v);
  else if (key == "attack.steps") c.attack.steps = static_cast<int>(parse_u64(key, v));
  else if (key == "attack.lr") c.attack.lr = parse_double(key, v);
  else if (key == "attack.objective_draws") c.attack.objective_draws = static_cast<int>(parse_u64(key, v));
  else if (key == "attack.score_samples") c.attack.score_samples = parse_u64(key, v);
  else if (key == "attack.targets") c.attack.targets = parse_u64(key, v);
  else if (key == "seed") c.seed = parse_u64(key, v);
  else if (key == "out.dir") c.out_dir = v;
  else throw ConfigError("config: unknown key '" + key + "'");
}

}  // namespace

std::string ExperimentConfig::resolved() const {
  std::map<std::string, std::string> kv;
  kv["dataset.kind"] = dataset.kind;
  kv["dataset.concepts"] = join_list(dataset.concepts);
  kv["dataset.sensitive_id"] = dataset.sensitive_id;
  kv["dataset.sensitive_main"] = dataset.sensitive_main;
  kv["dataset.sensitive_feat"] = dataset.sensitive_feat;
  kv["dataset.size"] = std::to_string(dataset.size);
  kv["dataset.sensitive_fraction"] = fmt_double(dataset.sensitive_fraction);
  kv["dataset.concept_sigma"] = fmt_double(dataset.concept_sigma);
  kv["dataset.sensitive_sigma"] = fmt_double(dataset.sensitive_sigma);
  kv["dataset.feature_dx"] = fmt_double(dataset.feature_dx);
  kv["dataset.feature_dy"] = fmt_double(dataset.feature_dy);
  kv["dataset.glyph_noise"] = fmt_double(dataset.glyph_noise);
  kv["dataset.prompt_overlap"] = fmt_double(dataset.prompt_overlap);
  kv["dataset.seed"] = std::to_string(dataset.seed);
  kv["model.hidden"] = std::to_string(model.hidden);
  kv["model.time_dim"] = std::to_string(model.time_dim);
  kv["model.emb_dim"] = std::to_string(model.emb_dim);
  kv["model.adapter_rank"] = std::to_string(model.adapter_rank);
  kv["model.finetune_mode"] = model.finetune_mode;
  kv["model.adapter_layers"] = join_list(model.adapter_layers);
  kv["schedule.T"] = std::to_string(schedule.T);
  kv["schedule.beta_start"] = fmt_double(schedule.beta_start);
  kv["schedule.beta_end"] = fmt_double(schedule.beta_end);
  kv["pretrain.steps"] = std::to_string(pretrain.steps);
  kv["pretrain.lr"] = fmt_double(pretrain.lr);
  kv["pretrain.batch"] = std::to_string(pretrain.batch);
  kv["finetune.steps"] = std::to_string(finetune.steps);
  kv["finetune.lr"] = fmt_double(finetune.lr);
  kv["finetune.batch"] = std::to_string(finetune.batch);
  kv["projection.lambda"] = fmt_double(projection.lambda);
  kv["projection.epsilon"] = fmt_double(projection.epsilon);
  kv["projection.rescale"] = projection.rescale ? "true" : "false";
  kv["eval.sample_count"] = std::to_string(eval.sample_count);
  kv["eval.grid_resolution"] = std::to_string(eval.grid_resolution);
  kv["eval.leakage_samples"] = std::to_string(eval.leakage_samples);
  kv["eval.amplification_trials"] = std::to_string(eval.amplification_trials);
  kv["eval.amplification_draws"] = join_int_list(eval.amplification_draws);
  kv["attack.steps"] = std::to_string(attack.steps);
  kv["attack.lr"] = fmt_double(attack.lr);
  kv["attack.objective_draws"] = std::to_string(attack.objective_draws);
  kv["attack.score_samples"] = std::to_string(attack.score_samples);
  kv["attack.targets"] = std::to_string(attack.targets);
  kv["seed"] = std::to_string(seed);
  kv["out.dir"] = out_dir.string();

  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += "=";
    out += v;
    out += "\n";
  }
  return out;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value: '" + t +
                        "'");
    }
    apply_key(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& key_value) {
  const auto eq = key_value.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("config: override is not key=value: '" + key_value + "'");
  }
  apply_key(cfg, trim(key_value.substr(0, eq)), trim(key_value.substr(eq + 1)));
}

}  // namespace sgrad
