#include "idql/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

namespace idql {

namespace {

enum class KeyType { text, choice, real, integer, boolean, dims };

struct KeySpec {
  KeyType type;
  std::string def;
  std::string constraint;        // human-readable, used in error messages
  std::vector<std::string> choices;
  double lo = 0.0, hi = 0.0;     // for real/integer range checks
};

// Registered configuration surface. Training defaults follow the reference
// hyperparameter table (LR 3e-4, critic batch 256, actor batch 1024, T = 5,
// EMA 0.005, N = 64, dropout 0.1, 3 residual blocks, vp schedule, Adam with
// actor cosine decay over the actor step budget).
const std::map<std::string, KeySpec>& registry() {
  static const std::map<std::string, KeySpec> reg = {
      {"experiment",
       {KeyType::choice, "audit",
        "one of audit|bandit-sweep|ddpm-train|ddpm-sample|train-offline|evaluate|"
        "finetune|figure1|figure2|figure4",
        {"audit", "bandit-sweep", "ddpm-train", "ddpm-sample", "train-offline",
         "evaluate", "finetune", "figure1", "figure2", "figure4"}}},
      {"seed", {KeyType::integer, "0", "integer >= 0", {}, 0, 1e18}},

      {"loss.family",
       {KeyType::choice, "expectile", "one of expectile|quantile|exponential",
        {"expectile", "quantile", "exponential"}}},
      {"loss.param", {KeyType::real, "0.9", "positive real (tau in (0,1) or alpha > 0)", {}, 1e-12, 1e12}},

      {"critic.lr", {KeyType::real, "3e-4", "real in (0, 1]", {}, 1e-12, 1.0}},
      {"critic.batch", {KeyType::integer, "256", "integer >= 1", {}, 1, 1e9}},
      {"critic.hidden", {KeyType::dims, "256,256", "comma-separated positive widths"}},
      {"critic.steps", {KeyType::integer, "1000000", "integer >= 0", {}, 0, 1e12}},
      {"critic.ema", {KeyType::real, "0.005", "real in (0, 1]", {}, 1e-12, 1.0}},
      {"critic.twin", {KeyType::boolean, "true", "true|false"}},
      {"critic.gamma", {KeyType::real, "0.99", "real in [0, 1)", {}, 0.0, 0.9999999}},
      {"critic.activation",
       {KeyType::choice, "relu", "one of relu|mish|gelu", {"relu", "mish", "gelu"}}},

      {"actor.lr", {KeyType::real, "3e-4", "real in (0, 1]", {}, 1e-12, 1.0}},
      {"actor.batch", {KeyType::integer, "1024", "integer >= 1", {}, 1, 1e9}},
      {"actor.steps", {KeyType::integer, "2000000", "integer >= 0", {}, 0, 1e12}},
      {"actor.cosine_decay", {KeyType::boolean, "true", "true|false"}},
      {"actor.awr_alpha", {KeyType::real, "0", "real >= 0 (0 disables AWR weighting)", {}, 0.0, 1e6}},
      {"actor.awr_clip", {KeyType::real, "100", "real > 0", {}, 1e-12, 1e12}},

      {"diffusion.t", {KeyType::integer, "5", "integer >= 1", {}, 1, 100000}},
      {"diffusion.schedule",
       {KeyType::choice, "vp", "one of linear|cosine|vp", {"linear", "cosine", "vp"}}},
      {"diffusion.beta_min", {KeyType::real, "-1", "schedule beta_min (-1 = schedule default)", {}, -1.0, 1e6}},
      {"diffusion.beta_max", {KeyType::real, "-1", "schedule beta_max (-1 = schedule default)", {}, -1.0, 1e6}},
      {"diffusion.arch",
       {KeyType::choice, "ln_resnet", "one of mlp|ln_resnet", {"mlp", "ln_resnet"}}},
      {"diffusion.hidden", {KeyType::integer, "256", "integer >= 1", {}, 1, 1e7}},
      {"diffusion.blocks", {KeyType::integer, "3", "integer >= 1", {}, 1, 1000}},
      {"diffusion.dropout", {KeyType::real, "0.1", "real in [0, 1)", {}, 0.0, 0.999999}},
      {"diffusion.time_dim", {KeyType::integer, "64", "even integer >= 2", {}, 2, 100000}},
      {"diffusion.activation",
       {KeyType::choice, "mish", "one of relu|mish|gelu", {"relu", "mish", "gelu"}}},
      {"diffusion.final_noise", {KeyType::boolean, "false", "true|false"}},
      {"diffusion.clip_actions", {KeyType::boolean, "false", "true|false"}},
      {"diffusion.clip_lo", {KeyType::real, "-1", "lower action clamp", {}, -1e12, 1e12}},
      {"diffusion.clip_hi", {KeyType::real, "1", "upper action clamp", {}, -1e12, 1e12}},

      {"extraction.mode",
       {KeyType::choice, "greedy", "one of greedy|implicit", {"greedy", "implicit"}}},
      {"extraction.n", {KeyType::integer, "64", "integer >= 1", {}, 1, 1e7}},

      {"env.kind",
       {KeyType::choice, "gridworld", "one of gridworld|bandit|bandit2d",
        {"gridworld", "bandit", "bandit2d"}}},
      {"env.slip", {KeyType::real, "0", "real in [0, 1]", {}, 0.0, 1.0}},
      {"env.width", {KeyType::integer, "5", "integer >= 1", {}, 1, 1000}},
      {"env.height", {KeyType::integer, "5", "integer >= 1", {}, 1, 1000}},
      {"env.bandit_arms", {KeyType::integer, "3", "integer >= 1", {}, 1, 1000}},
      {"env.bandit_noise", {KeyType::real, "0.5", "real >= 0", {}, 0.0, 1e6}},

      {"dataset.path", {KeyType::text, "", "path to a saved dataset ('' = generate)"}},
      {"dataset.size", {KeyType::integer, "30000", "integer >= 1", {}, 1, 1e12}},
      {"dataset.mix", {KeyType::real, "0.5", "near-optimal episode fraction in [0, 1]", {}, 0.0, 1.0}},
      {"dataset.epsilon", {KeyType::real, "0.1", "exploration rate in [0, 1]", {}, 0.0, 1.0}},
      {"dataset.step_cap", {KeyType::integer, "100", "integer >= 1", {}, 1, 1e9}},

      {"data.generator",
       {KeyType::choice, "gaussians8", "one of gaussians8|moons|spiral",
        {"gaussians8", "moons", "spiral"}}},
      {"data.n", {KeyType::integer, "8000", "integer >= 1", {}, 1, 1e12}},

      {"eval.episodes", {KeyType::integer, "100", "integer >= 1", {}, 1, 1e9}},
      {"eval.step_cap", {KeyType::integer, "200", "integer >= 1", {}, 1, 1e9}},

      {"finetune.mode", {KeyType::choice, "max", "one of max|imp", {"max", "imp"}}},
      {"finetune.env_steps", {KeyType::integer, "20000", "integer >= 0", {}, 0, 1e12}},
      {"finetune.critic_steps", {KeyType::integer, "1", "integer >= 1", {}, 1, 1000}},
      {"finetune.actor_steps", {KeyType::integer, "2", "integer >= 1", {}, 1, 1000}},
      {"finetune.eval_every", {KeyType::integer, "2000", "integer >= 1", {}, 1, 1e12}},
      {"finetune.eval_episodes", {KeyType::integer, "50", "integer >= 1", {}, 1, 1e9}},
      {"finetune.explore_n", {KeyType::integer, "16", "integer >= 1", {}, 1, 1e7}},

      {"model.dir", {KeyType::text, "", "run directory holding checkpoints"}},

      {"audit.dists", {KeyType::integer, "1000", "integer >= 1", {}, 1, 1e9}},

      {"sample.n", {KeyType::integer, "10000", "integer >= 1", {}, 1, 1e9}},

      {"figure.batch", {KeyType::integer, "4096", "integer >= 1", {}, 1, 1e9}},
      {"figure.steps", {KeyType::integer, "1500", "integer >= 1", {}, 1, 1e12}},
      {"figure.samples", {KeyType::integer, "10000", "integer >= 1", {}, 1, 1e9}},

      {"report.every", {KeyType::integer, "1000", "integer >= 1", {}, 1, 1e12}},
  };
  return reg;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

void validate_value(const std::string& key, const KeySpec& spec, const std::string& value) {
  auto bad = [&](const std::string& why) {
    fail("config field '" + key + "': " + why + " (expected " + spec.constraint +
         ", got '" + value + "')");
  };
  switch (spec.type) {
    case KeyType::text:
      return;
    case KeyType::choice:
      if (std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end())
        bad("invalid choice");
      return;
    case KeyType::real: {
      char* end = nullptr;
      const double v = std::strtod(value.c_str(), &end);
      if (end == value.c_str() || *end != '\0') bad("not a number");
      if (v < spec.lo || v > spec.hi) bad("out of range");
      return;
    }
    case KeyType::integer: {
      char* end = nullptr;
      const double v = std::strtod(value.c_str(), &end);
      if (end == value.c_str() || *end != '\0') bad("not an integer");
      if (v != static_cast<double>(static_cast<std::int64_t>(v))) bad("not an integer");
      if (v < spec.lo || v > spec.hi) bad("out of range");
      return;
    }
    case KeyType::boolean:
      if (value != "true" && value != "false") bad("not a boolean");
      return;
    case KeyType::dims: {
      std::size_t pos = 0;
      while (pos < value.size()) {
        std::size_t comma = value.find(',', pos);
        if (comma == std::string::npos) comma = value.size();
        const std::string part = value.substr(pos, comma - pos);
        char* end = nullptr;
        const long v = std::strtol(part.c_str(), &end, 10);
        if (end == part.c_str() || *end != '\0' || v <= 0) bad("bad width list");
        pos = comma + 1;
      }
      if (value.empty()) bad("empty width list");
      return;
    }
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  for (const auto& [key, spec] : registry()) c.kv_[key] = spec.def;
  return c;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig c = defaults();
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    const std::size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    check(eq != std::string::npos,
          "config line " + std::to_string(line_no) + ": expected 'key = value'");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return parse(read_text_file(path));
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  auto it = registry().find(key);
  check(it != registry().end(), "config field '" + key + "' is not recognized");
  validate_value(key, it->second, value);
  kv_[key] = value;
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  auto it = kv_.find(key);
  check(it != kv_.end(), "config field '" + key + "' is not recognized");
  return it->second;
}

double ExperimentConfig::get_double(const std::string& key) const {
  return std::strtod(get(key).c_str(), nullptr);
}

std::int64_t ExperimentConfig::get_int(const std::string& key) const {
  return static_cast<std::int64_t>(std::strtod(get(key).c_str(), nullptr));
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  return get(key) == "true";
}

std::vector<std::size_t> ExperimentConfig::get_dims(const std::string& key) const {
  const std::string& value = get(key);
  std::vector<std::size_t> dims;
  std::size_t pos = 0;
  while (pos < value.size()) {
    std::size_t comma = value.find(',', pos);
    if (comma == std::string::npos) comma = value.size();
    dims.push_back(static_cast<std::size_t>(
        std::strtol(value.substr(pos, comma - pos).c_str(), nullptr, 10)));
    pos = comma + 1;
  }
  return dims;
}

std::string ExperimentConfig::to_string() const {
  std::string out;
  for (const auto& [key, value] : kv_) {
    out += key;
    out += " = ";
    out += value;
    out += "\n";
  }
  return out;
}

}  // namespace idql
