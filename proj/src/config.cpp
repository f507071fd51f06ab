// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/config.hpp"

#include "dbae/dataset.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>

namespace dbae {

namespace {

using Json = nlohmann::json;

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<Json(const RunConfig&)> get;
  bool serialized = true;  // aliases are accepted on input only
};

using Registry = std::map<std::string, Field>;

#define DBAE_UINT(key, expr)                                                                        \
  r[key] = {[](RunConfig& c, const std::string& v) { c.expr = static_cast<decltype(c.expr)>(parse_uint(key, v)); }, \
            [](const RunConfig& c) { return Json(c.expr); }}
#define DBAE_DOUBLE(key, expr)                                                                    \
  r[key] = {[](RunConfig& c, const std::string& v) { c.expr = parse_double(key, v); },            \
            [](const RunConfig& c) { return Json(c.expr); }}
#define DBAE_BOOL(key, expr)                                                                      \
  r[key] = {[](RunConfig& c, const std::string& v) { c.expr = parse_bool(key, v); },              \
            [](const RunConfig& c) { return Json(c.expr); }}
#define DBAE_STRING(key, expr)                                                                    \
  r[key] = {[](RunConfig& c, const std::string& v) { c.expr = v; },                               \
            [](const RunConfig& c) { return Json(c.expr); }}
#define DBAE_ENUM(key, expr, parse)                                                               \
  r[key] = {[](RunConfig& c, const std::string& v) { c.expr = parse(v); },                        \
            [](const RunConfig& c) { return Json(to_string(c.expr)); }}

const Registry& registry() {
  static const Registry reg = [] {
    Registry r;
    DBAE_UINT("seed", seed);
    DBAE_STRING("data.path", data.path);
    DBAE_STRING("data.toy", data.toy);
    DBAE_UINT("data.n", data.n);
    DBAE_DOUBLE("data.noise", data.noise);
    DBAE_UINT("data.holdout", data.holdout);
    r["toy"] = {[](RunConfig& c, const std::string& v) { c.data.toy = v; }, nullptr, false};
    r["n"] = {[](RunConfig& c, const std::string& v) { c.data.n = parse_uint("n", v); }, nullptr, false};

    DBAE_DOUBLE("schedule.beta_min", schedule.beta_min);
    DBAE_DOUBLE("schedule.beta_max", schedule.beta_max);
    DBAE_DOUBLE("schedule.t_end", schedule.t_end);
    DBAE_DOUBLE("schedule.eps_t", schedule.eps_t);

    r["model.data_dim"] = {[](RunConfig& c, const std::string& v) {
                             const std::size_t d = parse_uint("model.data_dim", v);
                             c.model.encoder.data_dim = c.model.decoder.data_dim = c.model.score.data_dim = d;
                           },
                           [](const RunConfig& c) { return Json(c.model.encoder.data_dim); }};
    r["model.latent_dim"] = {[](RunConfig& c, const std::string& v) {
                               const std::size_t l = parse_uint("model.latent_dim", v);
                               c.model.encoder.latent_dim = c.model.decoder.latent_dim = c.model.score.latent_dim = l;
                             },
                             [](const RunConfig& c) { return Json(c.model.encoder.latent_dim); }};
    DBAE_ENUM("model.encoder.mode", model.encoder.mode, encoder_mode_from_string);
    DBAE_UINT("model.encoder.hidden", model.encoder.hidden);
    DBAE_UINT("model.encoder.depth", model.encoder.depth);
    DBAE_UINT("model.decoder.hidden", model.decoder.hidden);
    DBAE_UINT("model.decoder.depth", model.decoder.depth);
    DBAE_UINT("model.score.hidden", model.score.hidden);
    DBAE_UINT("model.score.depth", model.score.depth);
    DBAE_UINT("model.score.time_dim", model.score.time_dim);
    DBAE_DOUBLE("model.score.time_max_freq", model.score.time_max_freq);
    DBAE_BOOL("model.score.use_z_condition", model.score.use_z_condition);

    DBAE_UINT("train.batch_size", train.batch_size);
    DBAE_DOUBLE("train.lr", train.lr);
    DBAE_DOUBLE("train.ema_rate", train.ema_rate);
    DBAE_UINT("train.total_steps", train.total_steps);
    DBAE_ENUM("train.loss_form", train.loss_form, loss_form_from_string);
    DBAE_DOUBLE("train.tc_weight", train.tc_weight);
    DBAE_UINT("train.log_every", train.log_every);
    DBAE_UINT("train.checkpoint_every", train.checkpoint_every);

    DBAE_UINT("prior.hidden", prior.hidden);
    DBAE_UINT("prior.depth", prior.depth);
    DBAE_UINT("prior.time_dim", prior.time_dim);
    DBAE_DOUBLE("prior.beta", prior.beta);
    DBAE_UINT("prior.steps", prior.steps);
    DBAE_ENUM("prior.loss", prior.loss, prior_loss_from_string);
    DBAE_UINT("prior.batch_size", prior.batch_size);
    DBAE_DOUBLE("prior.lr", prior.lr);
    DBAE_DOUBLE("prior.ema_rate", prior.ema_rate);
    DBAE_UINT("prior.total_steps", prior.total_steps);
    DBAE_UINT("prior.sample_steps", prior.sample_steps);
    DBAE_ENUM("prior.sample_spacing", prior.sample_spacing, grid_spacing_from_string);

    DBAE_ENUM("sampler.kind", sampler.kind, sampler_kind_from_string);
    DBAE_UINT("sampler.steps", sampler.steps);
    DBAE_ENUM("sampler.spacing", sampler.spacing, grid_spacing_from_string);
    DBAE_UINT("sampler.seed", sampler.seed);

    DBAE_UINT("eval.n_generate", eval.n_generate);
    DBAE_UINT("eval.sw_projections", eval.sw_projections);
    DBAE_UINT("eval.recon_rows", eval.recon_rows);
    return r;
  }();
  return reg;
}

void flatten_yaml(const YAML::Node& node, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (node.IsMap()) {
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      flatten_yaml(kv.second, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else if (node.IsScalar()) {
    out.emplace_back(prefix, node.Scalar());
  } else if (node.IsNull()) {
    if (!prefix.empty()) throw ConfigError(prefix + ": missing value");
  } else {
    throw ConfigError(prefix + ": lists are not supported");
  }
}

void flatten_json(const Json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten_json(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_string()) {
    out.emplace_back(prefix, j.get<std::string>());
  } else if (j.is_boolean()) {
    out.emplace_back(prefix, j.get<bool>() ? "true" : "false");
  } else if (j.is_number()) {
    out.emplace_back(prefix, j.dump());
  } else {
    throw ConfigError(prefix + ": unsupported value in stored config");
  }
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) h = (h ^ c) * 1099511628211ull;
  return h;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = registry().find(key);
  if (it == registry().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, value);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  apply_setting(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : registry()) keys.push_back(k);
  return keys;
}

RunConfig parse_run_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  std::vector<std::pair<std::string, std::string>> items;
  flatten_yaml(root, "", items);
  RunConfig cfg;
  for (const auto& [k, v] : items) apply_setting(cfg, k, v);
  return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw ConfigError("cannot open config " + path);
    std::string text;
    char buf[4096];
    for (std::size_t got; (got = std::fread(buf, 1, sizeof buf, f)) > 0;) text.append(buf, got);
    std::fclose(f);
    cfg = parse_run_config(text);
  }
  for (const std::string& o : overrides) apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

VpSchedule RunConfig::vp_schedule() const {
  return VpSchedule::linear(schedule.beta_min, schedule.beta_max, schedule.t_end);
}

BridgeKernel RunConfig::kernel() const { return BridgeKernel(vp_schedule(), schedule.eps_t); }

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(schedule.beta_min > 0 && schedule.beta_max >= schedule.beta_min, "schedule: need 0 < beta_min <= beta_max");
  require(schedule.t_end > 0, "schedule.t_end must be positive");
  require(schedule.eps_t > 0 && schedule.eps_t < 0.5, "schedule.eps_t must be in (0, 0.5)");
  model.validate();
  require(train.batch_size >= 1, "train.batch_size must be >= 1");
  require(train.lr >= 0, "train.lr must be >= 0");
  require(train.ema_rate >= 0 && train.ema_rate <= 1, "train.ema_rate must be in [0, 1]");
  require(train.tc_weight >= 0, "train.tc_weight must be >= 0");
  require(train.tc_weight == 0 || model.encoder.mode == EncoderMode::gaussian,
          "train.tc_weight > 0 requires model.encoder.mode = gaussian");
  require(train.tc_weight == 0 || train.batch_size >= 2, "train.tc_weight > 0 needs train.batch_size >= 2");
  require(prior.steps >= 1 && prior.sample_steps >= 1 && prior.batch_size >= 1, "prior: steps and batch must be >= 1");
  require(prior.beta > 0, "prior.beta must be positive");
  require(prior.time_dim % 2 == 0, "prior.time_dim must be even");
  require(sampler.steps >= 1, "sampler.steps must be >= 1");
  require(data.path.empty() ? is_toy_name(data.toy) : true, "data.toy: unknown toy dataset '" + data.toy + "'");
  require(data.n >= 1, "data.n must be >= 1");
}

Json RunConfig::to_json() const {
  Json j = Json::object();
  for (const auto& [key, field] : registry()) {
    if (!field.serialized) continue;
    j[Json::json_pointer("/" + [&] {
      std::string p = key;
      for (char& c : p)
        if (c == '.') c = '/';
      return p;
    }())] = field.get(*this);
  }
  return j;
}

RunConfig RunConfig::from_json(const Json& j) {
  std::vector<std::pair<std::string, std::string>> items;
  flatten_json(j, "", items);
  RunConfig cfg;
  for (const auto& [k, v] : items) apply_setting(cfg, k, v);
  return cfg;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

}  // namespace dbae
