#ifndef DIRGRPO_CONFIG_HPP_
#define DIRGRPO_CONFIG_HPP_

// Flat key=value experiment configuration with dotted section prefixes,
// e.g. `grpo.beta_kl=0.04`. Blank lines and lines starting with '#' are
// ignored. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dirgrpo/dataset.hpp"
#include "dirgrpo/errors.hpp"
#include "dirgrpo/grpo.hpp"
#include "dirgrpo/io.hpp"
#include "dirgrpo/policy.hpp"
#include "dirgrpo/rewards.hpp"
#include "dirgrpo/sft.hpp"

namespace dirgrpo {

enum class Method { Sft, SftSoft, Grpo };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Sft: return "sft";
    case Method::SftSoft: return "sft-soft";
    case Method::Grpo: return "grpo";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "sft") return Method::Sft;
  if (s == "sft-soft") return Method::SftSoft;
  if (s == "grpo") return Method::Grpo;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

struct ExperimentConfig {
  std::uint64_t seed = 0;
  Method method = Method::Grpo;
  PolicyFamily family = PolicyFamily::DirectCategorical;
  int max_len = 0;  // 0: derived from the value range
  double init_std = 0.01;
  std::string output_dir = "out";
  double eps_gm = 1e-2;
  DatasetSpec dataset;
  RewardConfig reward;
  GrpoConfig grpo;
  SftConfig sft;
};

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::string_view text, std::string_view origin = "config") {
  KeyValues kv;
  std::istringstream in{std::string(text)};
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

namespace detail {

inline std::string profile_name(const DensityProfile& p) {
  if (std::holds_alternative<ExpDecay>(p)) return "expdecay";
  if (std::holds_alternative<AgedbLike>(p)) return "agedb";
  return "multipeak";
}

inline std::string peaks_to_string(const std::vector<Peak>& peaks) {
  std::string out;
  for (const auto& p : peaks) {
    if (!out.empty()) out += ';';
    out += io::format_double(p.center) + ':' + io::format_double(p.width) + ':' + io::format_double(p.height);
  }
  return out;
}

inline std::vector<Peak> parse_peaks(std::string_view s) {
  std::vector<Peak> peaks;
  for (auto part : io::split(s, ';')) {
    if (part.empty()) continue;
    const auto f = io::split(part, ':');
    if (f.size() != 3) throw ConfigError("dataset.peaks: expected center:width:height entries");
    peaks.push_back({io::parse_double(f[0]), io::parse_double(f[1]), io::parse_double(f[2])});
  }
  return peaks;
}

inline bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("expected boolean, got '" + std::string(s) + "'");
}

}  // namespace detail

/// Applies key=value pairs on top of `cfg`. Sub-seeds (dataset.seed,
/// grpo.seed, sft.seed) follow the top-level seed unless given explicitly.
inline void apply_key_values(ExperimentConfig& cfg, const KeyValues& kv) {
  std::set<std::string> seen;
  auto get = [&](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    if (it == kv.end()) return nullptr;
    seen.insert(key);
    return &it->second;
  };
  auto num = [&](const char* key, auto& field) {
    if (const auto* v = get(key)) {
      try {
        using T = std::decay_t<decltype(field)>;
        if constexpr (std::is_floating_point_v<T>) {
          field = io::parse_double(*v);
        } else {
          field = static_cast<T>(io::parse_int(*v));
        }
      } catch (const IoError&) {
        throw ConfigError(std::string(key) + ": invalid number '" + *v + "'");
      }
    }
  };

  num("seed", cfg.seed);
  if (get("seed")) cfg.dataset.seed = cfg.grpo.seed = cfg.sft.seed = cfg.seed;
  if (const auto* v = get("method")) cfg.method = parse_method(*v);
  if (const auto* v = get("output_dir")) cfg.output_dir = *v;
  if (const auto* v = get("policy.family")) cfg.family = parse_family(*v);
  num("policy.max_len", cfg.max_len);
  num("policy.init_std", cfg.init_std);
  num("eval.eps_gm", cfg.eps_gm);

  auto& d = cfg.dataset;
  num("dataset.seed", d.seed);
  num("dataset.range", d.range);
  num("dataset.bins", d.bins);
  num("dataset.n_max", d.n_max);
  num("dataset.sigma", d.sigma);
  num("dataset.distractor_dims", d.distractor_dims);
  num("dataset.test_per_bin", d.test_per_bin);
  if (const auto* v = get("dataset.profile")) {
    if (*v == "expdecay") {
      d.profile = ExpDecay{};
    } else if (*v == "agedb") {
      d.profile = AgedbLike{};
    } else if (*v == "multipeak") {
      d.profile = MultiPeak{};
    } else {
      throw ConfigError("unknown dataset.profile '" + *v + "'");
    }
  }
  if (auto* e = std::get_if<ExpDecay>(&d.profile)) num("dataset.tau", e->tau);
  if (auto* mp = std::get_if<MultiPeak>(&d.profile)) {
    if (const auto* v = get("dataset.peaks")) mp->peaks = detail::parse_peaks(*v);
  }

  auto& r = cfg.reward;
  if (const auto* v = get("reward.kind")) r.kind = parse_reward_kind(*v);
  num("reward.format_c", r.format_c);
  num("reward.range", r.range);
  num("reward.disco_alpha", r.disco_alpha);
  num("reward.disco_cap", r.disco_cap);
  num("reward.eps_denominator", r.eps_denominator);
  if (const auto* v = get("reward.disco_weight_format")) r.disco_weight_format = detail::parse_bool(*v);

  auto& g = cfg.grpo;
  num("grpo.K", g.k);
  num("grpo.batch_size", g.batch_size);
  num("grpo.beta_kl", g.beta_kl);
  num("grpo.clip_eps", g.clip_eps);
  num("grpo.lr", g.lr);
  num("grpo.epochs", g.epochs);
  num("grpo.eps_adv", g.eps_adv);
  num("grpo.seed", g.seed);
  if (const auto* v = get("grpo.adv_variant")) g.adv_variant = parse_advantage_variant(*v);
  if (const auto* v = get("grpo.optimizer")) g.optimizer = parse_optimizer(*v);
  if (const auto* v = get("grpo.lr_schedule")) g.lr_schedule = parse_lr_schedule(*v);

  auto& s = cfg.sft;
  num("sft.lr", s.lr);
  num("sft.epochs", s.epochs);
  num("sft.batch_size", s.batch_size);
  num("sft.soft_cap", s.soft_cap);
  num("sft.seed", s.seed);
  if (const auto* v = get("sft.soft")) s.soft = detail::parse_bool(*v);
  if (const auto* v = get("sft.optimizer")) s.optimizer = parse_optimizer(*v);
  if (const auto* v = get("sft.lr_schedule")) s.lr_schedule = parse_lr_schedule(*v);

  for (const auto& [key, value] : kv) {
    if (!seen.count(key)) throw ConfigError("unknown or inapplicable config key '" + key + "'");
  }
  if (cfg.method == Method::SftSoft) cfg.sft.soft = true;
}

inline void validate(const ExperimentConfig& cfg) {
  try {
    validate(cfg.dataset);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(cfg.init_std >= 0.0)) throw ConfigError("policy.init_std must be >= 0");
  if (!(cfg.eps_gm > 0.0)) throw ConfigError("eval.eps_gm must be > 0");
  if (cfg.family == PolicyFamily::DirectCategorical && cfg.dataset.range != std::floor(cfg.dataset.range)) {
    throw ConfigError("policy.family=direct needs an integer dataset.range");
  }
  if (cfg.method == Method::Grpo) {
    validate(cfg.reward);
    validate(cfg.grpo);
  } else {
    validate(cfg.sft);
  }
}

/// Reads a config file, then applies `overrides`. A `seed_override`
/// replaces the top-level seed and every sub-seed.
inline ExperimentConfig load_config(const std::filesystem::path& path, const KeyValues& overrides = {},
                                    std::optional<std::uint64_t> seed_override = std::nullopt) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  auto kv = parse_key_values(text, path.string());
  for (const auto& [k, v] : overrides) kv[k] = v;
  if (kv.count("method") && kv.at("method") == "grpo" && !kv.count("reward.kind")) {
    throw ConfigError("method=grpo requires reward.kind");
  }
  if (seed_override) {
    for (const char* k : {"dataset.seed", "grpo.seed", "sft.seed"}) kv.erase(k);
    kv["seed"] = std::to_string(*seed_override);
  }
  ExperimentConfig cfg;
  apply_key_values(cfg, kv);
  validate(cfg);
  return cfg;
}

/// Fully resolved configuration, one key per line, defaults included.
/// The reward and grpo sections appear only for method=grpo, the sft
/// section only for the supervised methods.
inline std::string config_to_string(const ExperimentConfig& cfg) {
  std::ostringstream o;
  auto f = [](double v) { return io::format_double(v); };
  o << "seed=" << cfg.seed << '\n';
  o << "method=" << method_name(cfg.method) << '\n';
  o << "output_dir=" << cfg.output_dir << '\n';
  o << "policy.family=" << family_name(cfg.family) << '\n';
  o << "policy.max_len=" << cfg.max_len << '\n';
  o << "policy.init_std=" << f(cfg.init_std) << '\n';
  o << "eval.eps_gm=" << f(cfg.eps_gm) << '\n';
  const auto& d = cfg.dataset;
  o << "dataset.seed=" << d.seed << '\n';
  o << "dataset.range=" << f(d.range) << '\n';
  o << "dataset.bins=" << d.bins << '\n';
  o << "dataset.profile=" << detail::profile_name(d.profile) << '\n';
  if (const auto* e = std::get_if<ExpDecay>(&d.profile)) o << "dataset.tau=" << f(e->tau) << '\n';
  if (const auto* mp = std::get_if<MultiPeak>(&d.profile)) o << "dataset.peaks=" << detail::peaks_to_string(mp->peaks) << '\n';
  o << "dataset.n_max=" << d.n_max << '\n';
  o << "dataset.sigma=" << f(d.sigma) << '\n';
  o << "dataset.distractor_dims=" << d.distractor_dims << '\n';
  o << "dataset.test_per_bin=" << d.test_per_bin << '\n';
  if (cfg.method == Method::Grpo) {
    const auto& r = cfg.reward;
    o << "reward.kind=" << reward_kind_name(r.kind) << '\n';
    o << "reward.format_c=" << f(r.format_c) << '\n';
    o << "reward.range=" << f(r.range) << '\n';
    o << "reward.disco_alpha=" << f(r.disco_alpha) << '\n';
    o << "reward.disco_cap=" << f(r.disco_cap) << '\n';
    o << "reward.eps_denominator=" << f(r.eps_denominator) << '\n';
    o << "reward.disco_weight_format=" << (r.disco_weight_format ? "true" : "false") << '\n';
    const auto& g = cfg.grpo;
    o << "grpo.K=" << g.k << '\n';
    o << "grpo.batch_size=" << g.batch_size << '\n';
    o << "grpo.beta_kl=" << f(g.beta_kl) << '\n';
    o << "grpo.clip_eps=" << f(g.clip_eps) << '\n';
    o << "grpo.lr=" << f(g.lr) << '\n';
    o << "grpo.epochs=" << g.epochs << '\n';
    o << "grpo.adv_variant=" << advantage_variant_name(g.adv_variant) << '\n';
    o << "grpo.eps_adv=" << f(g.eps_adv) << '\n';
    o << "grpo.seed=" << g.seed << '\n';
    o << "grpo.optimizer=" << optimizer_name(g.optimizer) << '\n';
    o << "grpo.lr_schedule=" << lr_schedule_name(g.lr_schedule) << '\n';
  } else {
    const auto& s = cfg.sft;
    o << "sft.lr=" << f(s.lr) << '\n';
    o << "sft.epochs=" << s.epochs << '\n';
    o << "sft.batch_size=" << s.batch_size << '\n';
    o << "sft.soft=" << (s.soft ? "true" : "false") << '\n';
    o << "sft.soft_cap=" << f(s.soft_cap) << '\n';
    o << "sft.seed=" << s.seed << '\n';
    o << "sft.optimizer=" << optimizer_name(s.optimizer) << '\n';
    o << "sft.lr_schedule=" << lr_schedule_name(s.lr_schedule) << '\n';
  }
  return o.str();
}

}  // namespace dirgrpo

#endif  // DIRGRPO_CONFIG_HPP_
