// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "uvcot/core.hpp"
#include "uvcot/policy.hpp"
#include "uvcot/synthbench.hpp"

namespace uvcot {

// ---------------------------------------------------------------------------
// Bounding-box grammar: the first bracketed group holding exactly four
// comma-separated fields, e.g. "The key region is [0.10,0.20,0.50,0.60]."

struct Resolution {
  double width = 0.0;
  double height = 0.0;
};

/// Throws Error with kind no_match, malformed_number, pixel_coordinates (a
/// coordinate > 1 without a resolution hint) or invariant (box ordering).
BoundingBox parse_bbox(std::string_view text, std::optional<Resolution> hint = std::nullopt);

// ---------------------------------------------------------------------------
// Requests

enum class GenerationMode { emit_region, emit_answer };

struct GenerationRequest {
  ResponseChain context;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  GenerationMode mode = GenerationMode::emit_region;
};

struct EvaluationRequest {
  ResponseChain context;
  ChainStep response;
  std::uint64_t seed = 0;  // drives simulated evaluator noise
};

enum class BackendKind { simulated, http };

const char* to_string(BackendKind kind) noexcept;
BackendKind backend_kind_from_string(std::string_view s);

struct BackendDescriptor {
  BackendKind kind = BackendKind::simulated;
  std::optional<std::string> endpoint;    // e.g. "https://api.example.com/v1"
  std::optional<std::string> model_name;
  std::map<std::string, std::string> prompt_templates;  // "region" | "answer" | "evaluator"
  int max_retries = 3;
  int max_inflight = 4;
  double noise_eta = 0.05;
  int retry_base_ms = 1000;  // wait before retry r is base * 2^(r-1)
  double timeout_s = 60.0;
  std::string api_key;

  /// Throws Error{config}: http kind needs endpoint and model_name.
  void validate() const;
};

/// Built-in prompt templates. The evaluator template carries the judging
/// instructions verbatim followed by the {question}/{standard_answer}/{answer}
/// block; the region and answer templates are our own wording.
const std::map<std::string, std::string>& default_prompt_templates();

/// Prompt files may open with "# SPDX-License-Identifier: ..."; that line is
/// not part of the template.
std::string strip_license_line(std::string text);

/// Replaces every "{name}" for each entry of `values`.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values);

// ---------------------------------------------------------------------------
// Backend interface used by datagen. Implementations must tolerate concurrent
// calls.

class Backend {
 public:
  virtual ~Backend() = default;

  /// The policy drives simulated region emission; remote models ignore it.
  virtual ChainStep generate(const Query& query, const GenerationRequest& req,
                             const ToyPolicy& policy) = 0;

  /// Evaluator score in [0,1].
  virtual double score(const Query& query, const EvaluationRequest& req) = 0;
};

// ---------------------------------------------------------------------------
// Simulator

/// emit_region samples a candidate region with the policy; emit_answer runs
/// the task's answer head on the most recent region of the context.
ChainStep sim_generate(const bench::SyntheticTask& task, const GenerationRequest& req,
                       const ToyPolicy& policy);

/// 0/1 correctness of an answer step plus seeded Uniform(-eta, eta) noise,
/// clipped to [0,1]. Region steps are not scorable.
double sim_score(const bench::SyntheticTask& task, const EvaluationRequest& req, double eta);

class SimulatedBackend final : public Backend {
 public:
  explicit SimulatedBackend(double noise_eta = 0.05);

  ChainStep generate(const Query& query, const GenerationRequest& req,
                     const ToyPolicy& policy) override;
  double score(const Query& query, const EvaluationRequest& req) override;

  double noise_eta() const noexcept { return noise_eta_; }

 private:
  std::shared_ptr<const bench::SyntheticTask> task_for(const Query& query);

  double noise_eta_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<const bench::SyntheticTask>> tasks_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible chat-completions client

struct HttpStats {
  std::uint64_t attempts = 0;   // HTTP requests sent
  std::uint64_t retries = 0;
  std::uint64_t failures = 0;   // calls that ended in an error
};

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendDescriptor desc);
  ~HttpBackend() override;

  ChainStep generate(const Query& query, const GenerationRequest& req,
                     const ToyPolicy& policy) override;
  double score(const Query& query, const EvaluationRequest& req) override;

  HttpStats stats() const;
  const BackendDescriptor& descriptor() const noexcept { return desc_; }

  struct Impl;  // opaque; defined in http_backend.cpp

 private:
  BackendDescriptor desc_;
  std::unique_ptr<Impl> impl_;
};

/// Extracts the number following "score:" (case-insensitive), clipped to
/// [0,1]. Throws Error{score_parse} when absent.
double parse_score(std::string_view text);

std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc);

}  // namespace uvcot
