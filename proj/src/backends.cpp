// SPDX-License-Identifier: Apache-2.0
#include "uvcot/backends.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <regex>

#include "uvcot/rng.hpp"
#include "uvcot_prompts.hpp"

namespace uvcot {

namespace {
constexpr std::uint64_t kTagEvalNoise = 0x6e7a6eULL;
}

const char* to_string(BackendKind kind) noexcept {
  return kind == BackendKind::simulated ? "sim" : "http";
}

BackendKind backend_kind_from_string(std::string_view s) {
  if (s == "sim" || s == "simulated") return BackendKind::simulated;
  if (s == "http") return BackendKind::http;
  throw Error(ErrorKind::config, "unknown backend kind '" + std::string(s) + "'",
              "backend.kind");
}

void BackendDescriptor::validate() const {
  if (kind == BackendKind::http) {
    if (!endpoint || endpoint->empty())
      throw Error(ErrorKind::config, "http backend requires an endpoint", "backend.endpoint");
    if (!model_name || model_name->empty())
      throw Error(ErrorKind::config, "http backend requires a model name", "backend.model_name");
  }
  if (max_retries < 0) throw Error(ErrorKind::config, "must be >= 0", "backend.max_retries");
  if (max_inflight < 1) throw Error(ErrorKind::config, "must be >= 1", "backend.max_inflight");
  if (!(noise_eta >= 0.0 && noise_eta <= 1.0))
    throw Error(ErrorKind::config, "must lie in [0,1]", "backend.noise_eta");
  if (retry_base_ms < 0) throw Error(ErrorKind::config, "must be >= 0", "backend.retry_base_ms");
  if (!(timeout_s > 0.0)) throw Error(ErrorKind::config, "must be > 0", "backend.timeout_s");
}

const std::map<std::string, std::string>& default_prompt_templates() {
  static const std::map<std::string, std::string> templates{
      {"region", prompts::kRegion},
      {"answer", prompts::kAnswer},
      {"evaluator", prompts::kEvaluator},
  };
  return templates;
}

std::string strip_license_line(std::string text) {
  if (text.rfind("# SPDX-License-Identifier:", 0) == 0) {
    const auto nl = text.find('\n');
    text.erase(0, nl == std::string::npos ? text.size() : nl + 1);
  }
  return text;
}

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const std::string key(tmpl.substr(i + 1, close - i - 1));
        if (auto it = values.find(key); it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

double parse_score(std::string_view text) {
  static const std::regex re(R"(score\s*:\s*\**\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?))",
                             std::regex::icase);
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, re)) {
    throw Error(ErrorKind::score_parse, "no 'score: <number>' in evaluator reply");
  }
  const std::string num = m[1].str();
  double v = 0.0;
  const char* b = num.data();
  if (*b == '+') ++b;
  const auto res = std::from_chars(b, num.data() + num.size(), v);
  if (res.ec != std::errc{}) {
    throw Error(ErrorKind::score_parse, "unreadable score '" + num + "'");
  }
  return std::clamp(v, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Simulator

ChainStep sim_generate(const bench::SyntheticTask& task, const GenerationRequest& req,
                       const ToyPolicy& policy) {
  if (req.mode == GenerationMode::emit_region) {
    const bench::CandidateSet set = bench::candidate_set_for(task, req.context);
    const std::size_t idx = policy.sample_region(set.features, req.seed, req.temperature);
    return ChainStep::region(set.regions[idx]);
  }
  const ChainStep* region = req.context.last_region();
  if (region == nullptr || req.context.steps.back().role != StepRole::region) {
    throw Error(ErrorKind::invalid_argument, "emit_answer needs a region step to answer from",
                "context");
  }
  return ChainStep::answer(bench::glyph_text(bench::oracle_answer(task, *region->bbox, req.seed)));
}

double sim_score(const bench::SyntheticTask& task, const EvaluationRequest& req, double eta) {
  if (req.response.role != StepRole::answer) {
    throw Error(ErrorKind::invalid_argument, "the simulated evaluator only scores answers",
                "response");
  }
  double s = req.response.text == bench::glyph_text(task.ground_truth) ? 1.0 : 0.0;
  if (eta > 0.0) {
    Rng rng(hash_combine(req.seed, kTagEvalNoise));
    s += rng.uniform(-eta, eta);
  }
  return std::clamp(s, 0.0, 1.0);
}

SimulatedBackend::SimulatedBackend(double noise_eta) : noise_eta_(noise_eta) {
  if (!(noise_eta >= 0.0 && noise_eta <= 1.0))
    throw Error(ErrorKind::config, "noise_eta must lie in [0,1]", "backend.noise_eta");
}

std::shared_ptr<const bench::SyntheticTask> SimulatedBackend::task_for(const Query& query) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = tasks_.find(query.query_id); it != tasks_.end()) return it->second;
  }
  auto task = std::make_shared<const bench::SyntheticTask>(bench::SyntheticTask::from_query(query));
  std::lock_guard lock(mutex_);
  return tasks_.emplace(query.query_id, std::move(task)).first->second;
}

ChainStep SimulatedBackend::generate(const Query& query, const GenerationRequest& req,
                                     const ToyPolicy& policy) {
  return sim_generate(*task_for(query), req, policy);
}

double SimulatedBackend::score(const Query& query, const EvaluationRequest& req) {
  return sim_score(*task_for(query), req, noise_eta_);
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc) {
  desc.validate();
  if (desc.kind == BackendKind::simulated) return std::make_unique<SimulatedBackend>(desc.noise_eta);
  return std::make_unique<HttpBackend>(desc);
}

}  // namespace uvcot
