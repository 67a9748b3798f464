// SPDX-License-Identifier: Apache-2.0
#include "uvcot/config.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

#include "uvcot/jsonl.hpp"

namespace uvcot {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string_view v) {
  v = trim(v);
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front())
    return std::string(v.substr(1, v.size() - 2));
  return std::string(v);
}

double to_double(std::string_view v, const std::string& key) {
  const std::string s = unquote(v);
  double out = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw Error(ErrorKind::config, "expected a number, got '" + s + "'", key);
  return out;
}

long long to_int(std::string_view v, const std::string& key) {
  const std::string s = unquote(v);
  long long out = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw Error(ErrorKind::config, "expected an integer, got '" + s + "'", key);
  return out;
}

std::uint64_t to_u64(std::string_view v, const std::string& key) {
  const std::string s = unquote(v);
  std::uint64_t out = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw Error(ErrorKind::config, "expected a non-negative integer, got '" + s + "'", key);
  return out;
}

int to_int32(std::string_view v, const std::string& key) {
  const long long x = to_int(v, key);
  if (x < -2147483647LL || x > 2147483647LL)
    throw Error(ErrorKind::config, "integer out of range", key);
  return static_cast<int>(x);
}

template <typename F>
auto rethrow_as_config(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config) throw;
    throw Error(ErrorKind::config, e.what(), key);
  }
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw Error(ErrorKind::parse, "line " + std::to_string(lineno) + ": unterminated section");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    // Strip trailing " # comment" outside quotes.
    bool quoted = false;
    std::size_t cut = line.size();
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (!quoted && line[i] == '#' && i > 0 && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
        cut = i;
        break;
      }
    }
    line = trim(line.substr(0, cut));
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorKind::parse, "line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw Error(ErrorKind::parse, "line " + std::to_string(lineno) + ": key outside a section");
    const std::string key = section + "." + std::string(trim(line.substr(0, eq)));
    cfg.set(key, trim(line.substr(eq + 1)));
  }
  if (!base_dir.empty()) {
    if (cfg.queries && cfg.queries->is_relative()) cfg.queries = base_dir / *cfg.queries;
    if (cfg.prompt_dir && cfg.prompt_dir->is_relative()) cfg.prompt_dir = base_dir / *cfg.prompt_dir;
  }
  return cfg;
}

void RunConfig::set(std::string_view dotted_key, std::string_view value) {
  const std::string key(dotted_key);
  const auto dot = key.find('.');
  if (dot == std::string::npos) throw Error(ErrorKind::config, "expected section.key", key);
  const std::string section = key.substr(0, dot);
  const std::string name = key.substr(dot + 1);

  if (section == "loss") {
    if (name == "beta") return void(loss.beta = to_double(value, key));
    if (name == "gamma") return void(loss.gamma = to_double(value, key));
    if (name == "g_scale") return void(loss.g_scale = to_double(value, key));
    if (name == "min_margin") return void(loss.min_margin = to_double(value, key));
    if (name == "g_kind") {
      if (unquote(value) != "affine") throw Error(ErrorKind::config, "only 'affine' is supported", key);
      return void(loss.g_kind = loss::GKind::affine);
    }
  } else if (section == "datagen") {
    if (name == "n_seeds") return void(datagen.n_seeds = to_int32(value, key));
    if (name == "k_pairs") return void(datagen.k_pairs = to_int32(value, key));
    if (name == "n_next_samples") return void(datagen.n_next_samples = to_int32(value, key));
    if (name == "t_steps") return void(datagen.t_steps = to_int32(value, key));
    if (name == "base_seed") return void(datagen.base_seed = to_u64(value, key));
    if (name == "temperature") return void(datagen.temperature = to_double(value, key));
    if (name == "workers") return void(datagen.workers = to_int32(value, key));
  } else if (section == "train") {
    if (name == "learning_rate") return void(train.learning_rate = to_double(value, key));
    if (name == "epochs") return void(train.epochs = to_int32(value, key));
    if (name == "m_iterations") return void(train.m_iterations = to_int32(value, key));
    if (name == "seed") return void(train.seed = to_u64(value, key));
    if (name == "ref_mode")
      return void(train.ref_mode = trainer::ref_mode_from_string(unquote(value)));
    if (name == "batch") {
      if (unquote(value) != "full") throw Error(ErrorKind::config, "only 'full' is supported", key);
      return;
    }
  } else if (section == "bench") {
    if (name == "grid_size") return void(bench.grid_size = to_int32(value, key));
    if (name == "stage_mode")
      return void(bench.stage_mode = rethrow_as_config(
                      key, [&] { return bench::stage_mode_from_string(unquote(value)); }));
    if (name == "p_hit") return void(bench.p_hit = to_double(value, key));
    if (name == "eval_tasks") return void(bench.eval_tasks = to_int32(value, key));
  } else if (section == "backend") {
    if (name == "kind") return void(backend.kind = backend_kind_from_string(unquote(value)));
    if (name == "endpoint") return void(backend.endpoint = unquote(value));
    if (name == "model_name") return void(backend.model_name = unquote(value));
    if (name == "max_retries") return void(backend.max_retries = to_int32(value, key));
    if (name == "max_inflight") return void(backend.max_inflight = to_int32(value, key));
    if (name == "noise_eta") return void(backend.noise_eta = to_double(value, key));
    if (name == "retry_base_ms") return void(backend.retry_base_ms = to_int32(value, key));
    if (name == "timeout_s") return void(backend.timeout_s = to_double(value, key));
    if (name == "prompt_dir") return void(prompt_dir = std::filesystem::path(unquote(value)));
  } else if (section == "data") {
    if (name == "queries") return void(queries = std::filesystem::path(unquote(value)));
  }
  throw Error(ErrorKind::config, "unknown config key", key);
}

void RunConfig::apply_ablation(std::string_view name) {
  if (name == "no-gamma") {
    loss.gamma = 0.0;
  } else if (name == "naive-dpo") {
    loss.g_scale = 0.0;
  } else if (name == "single-pass") {
    train.m_iterations = 1;
  } else {
    throw Error(ErrorKind::config,
                "unknown ablation '" + std::string(name) +
                    "' (expected no-gamma, naive-dpo or single-pass)",
                "ablate");
  }
  label = std::string(name);
}

void RunConfig::apply_environment() {
  if (const char* key = std::getenv("UVCOT_API_KEY"); key && *key) backend.api_key = key;
  if (const char* base = std::getenv("UVCOT_API_BASE"); base && *base) backend.endpoint = base;
}

void RunConfig::validate() const {
  loss.validate();
  datagen_config().validate();
  train_config().validate();
  backend_descriptor().validate();
  if (bench.grid_size < 2) throw Error(ErrorKind::config, "grid_size must be >= 2", "bench.grid_size");
  if (bench.stage_mode == bench::StageMode::two_stage && bench.grid_size % 2 != 0)
    throw Error(ErrorKind::config, "two_stage needs an even grid_size", "bench.grid_size");
  if (!(bench.p_hit > 0.0 && bench.p_hit <= 1.0))
    throw Error(ErrorKind::config, "p_hit must lie in (0,1]", "bench.p_hit");
  if (bench.eval_tasks < 1) throw Error(ErrorKind::config, "eval_tasks must be >= 1", "bench.eval_tasks");
  if (backend.kind == BackendKind::simulated &&
      static_cast<std::size_t>(datagen.t_steps) != bench::stage_count(bench.stage_mode)) {
    throw Error(ErrorKind::config,
                "t_steps must equal the number of stages (" +
                    std::to_string(bench::stage_count(bench.stage_mode)) + ") for " +
                    bench::to_string(bench.stage_mode) + " tasks",
                "datagen.t_steps");
  }
  if (queries && !std::filesystem::exists(*queries))
    throw Error(ErrorKind::config, "file not found: " + queries->string(), "data.queries");
  if (prompt_dir && !std::filesystem::is_directory(*prompt_dir))
    throw Error(ErrorKind::config, "directory not found: " + prompt_dir->string(),
                "backend.prompt_dir");
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  RunConfig cfg = parse(read_text_file(path), path.parent_path());
  cfg.apply_environment();
  cfg.validate();
  return cfg;
}

datagen::DatagenConfig RunConfig::datagen_config() const {
  datagen::DatagenConfig d = datagen;
  d.gamma = loss.gamma;
  d.min_margin = loss.min_margin;
  return d;
}

trainer::TrainConfig RunConfig::train_config() const {
  trainer::TrainConfig t = train;
  t.loss = loss;
  return t;
}

BackendDescriptor RunConfig::backend_descriptor() const {
  BackendDescriptor d = backend;
  d.prompt_templates = default_prompt_templates();
  if (prompt_dir) {
    for (auto& [role, text] : d.prompt_templates) {
      const auto file = *prompt_dir / (role + ".txt");
      if (std::filesystem::exists(file)) text = strip_license_line(read_text_file(file));
    }
  }
  return d;
}

}  // namespace uvcot
