// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <regex>
#include <semaphore>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "uvcot/backends.hpp"

namespace uvcot {

namespace {

struct Endpoint {
  std::string base;    // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(ErrorKind::config, "endpoint must look like http(s)://host[:port][/path]",
                "backend.endpoint");
  }
  Endpoint ep{m[1].str(), m[2].matched ? m[2].str() : std::string{}};
  while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  return ep;
}

std::string history_of(const ResponseChain& chain, bool skip_last_region) {
  std::string regions;
  const std::size_t n = chain.steps.size();
  for (std::size_t i = 1; i < n; ++i) {
    const ChainStep& s = chain.steps[i];
    if (s.role != StepRole::region) continue;
    if (skip_last_region && &s == chain.last_region()) continue;
    if (!regions.empty()) regions += ", ";
    regions += s.bbox->to_string();
  }
  return regions.empty() ? std::string{} : "Previously selected regions: " + regions + "\n";
}

std::string standard_answer_of(const Query& query) {
  try {
    const auto j = nlohmann::json::parse(query.task_json);
    if (j.is_object() && j.contains("standard_answer") && j["standard_answer"].is_string())
      return j["standard_answer"].get<std::string>();
  } catch (const nlohmann::json::exception&) {
  }
  return "N/A";
}

// Outcome of one failed attempt, kept so the final error reports the last cause.
struct Failure {
  ErrorKind kind;
  std::string message;
};

}  // namespace

struct HttpBackend::Impl {
  explicit Impl(const BackendDescriptor& d)
      : endpoint(split_endpoint(*d.endpoint)), inflight(d.max_inflight) {}

  Endpoint endpoint;
  std::counting_semaphore<1024> inflight;
  std::atomic<std::uint64_t> attempts{0};
  std::atomic<std::uint64_t> retries{0};
  std::atomic<std::uint64_t> failures{0};
};

HttpBackend::HttpBackend(BackendDescriptor desc) : desc_(std::move(desc)) {
  if (desc_.kind != BackendKind::http)
    throw Error(ErrorKind::config, "HttpBackend needs kind = http", "backend.kind");
  desc_.validate();
  if (desc_.max_inflight > 1024) desc_.max_inflight = 1024;
  for (const auto& [role, text] : default_prompt_templates()) desc_.prompt_templates.try_emplace(role, text);
  impl_ = std::make_unique<Impl>(desc_);
}

HttpBackend::~HttpBackend() = default;

HttpStats HttpBackend::stats() const {
  return HttpStats{impl_->attempts.load(), impl_->retries.load(), impl_->failures.load()};
}

namespace {

/// POSTs chat completions with retry/backoff. `accept` turns the returned
/// content into a value or throws; when `retry_invalid` is set, its failures
/// are retried (with a perturbed seed) like transport errors.
template <typename T, typename Accept>
T chat_call(const BackendDescriptor& desc, HttpBackend::Impl& impl, const std::string& prompt,
            double temperature, std::uint64_t seed, bool retry_invalid,
            ErrorKind exhausted_invalid_kind, Accept&& accept) {
  Failure last{ErrorKind::transport, "no attempt made"};
  for (int attempt = 0; attempt <= desc.max_retries; ++attempt) {
    if (attempt > 0) {
      ++impl.retries;
      const auto wait = std::chrono::milliseconds(static_cast<long long>(desc.retry_base_ms)
                                                  << (attempt - 1));
      std::this_thread::sleep_for(wait);
    }

    nlohmann::ordered_json body;
    body["model"] = *desc.model_name;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = temperature;
    body["seed"] = static_cast<std::int64_t>((seed + static_cast<std::uint64_t>(attempt)) &
                                             0x7FFFFFFFULL);

    httplib::Result res;
    {
      impl.inflight.acquire();
      httplib::Client cli(impl.endpoint.base);
      const auto secs = static_cast<time_t>(desc.timeout_s);
      const auto usecs = static_cast<time_t>((desc.timeout_s - static_cast<double>(secs)) * 1e6);
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);
      httplib::Headers headers;
      if (!desc.api_key.empty()) headers.emplace("Authorization", "Bearer " + desc.api_key);
      ++impl.attempts;
      res = cli.Post(impl.endpoint.prefix + "/chat/completions", headers, body.dump(),
                     "application/json");
      impl.inflight.release();
    }

    if (!res) {
      last = {ErrorKind::transport, httplib::to_string(res.error())};
      continue;
    }
    const int status = res->status;
    if (status >= 500 || status == 429) {
      last = {ErrorKind::http_status, "server returned " + std::to_string(status)};
      continue;
    }
    if (status < 200 || status >= 300) {
      ++impl.failures;
      throw Error(ErrorKind::http_status, "server returned " + std::to_string(status));
    }

    std::string content;
    try {
      const auto j = nlohmann::json::parse(res->body);
      content = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      last = {ErrorKind::generation_failure, std::string("malformed completion body: ") + e.what()};
      if (!retry_invalid) break;
      continue;
    }
    try {
      return accept(content);
    } catch (const Error& e) {
      last = {exhausted_invalid_kind, e.what()};
      if (!retry_invalid) break;
    }
  }
  ++impl.failures;
  throw Error(last.kind, last.message);
}

}  // namespace

ChainStep HttpBackend::generate(const Query& query, const GenerationRequest& req,
                                const ToyPolicy&) {
  if (req.mode == GenerationMode::emit_region) {
    const std::string prompt = render_template(
        desc_.prompt_templates.at("region"),
        {{"question", query.question}, {"history", history_of(req.context, false)}});
    return chat_call<ChainStep>(desc_, *impl_, prompt, req.temperature, req.seed, true,
                                ErrorKind::generation_failure, [](const std::string& content) {
                                  return ChainStep::region(parse_bbox(content), content);
                                });
  }
  const ChainStep* region = req.context.last_region();
  if (region == nullptr) {
    throw Error(ErrorKind::invalid_argument, "emit_answer needs a region step to answer from",
                "context");
  }
  const std::string prompt = render_template(desc_.prompt_templates.at("answer"),
                                             {{"question", query.question},
                                              {"region", region->bbox->to_string()},
                                              {"history", history_of(req.context, true)}});
  return chat_call<ChainStep>(desc_, *impl_, prompt, req.temperature, req.seed, true,
                              ErrorKind::generation_failure, [](const std::string& content) {
                                if (content.find_first_not_of(" \t\r\n") == std::string::npos)
                                  throw Error(ErrorKind::generation_failure, "empty answer");
                                return ChainStep::answer(content);
                              });
}

double HttpBackend::score(const Query& query, const EvaluationRequest& req) {
  const std::string prompt = render_template(desc_.prompt_templates.at("evaluator"),
                                             {{"question", query.question},
                                              {"standard_answer", standard_answer_of(query)},
                                              {"answer", req.response.text}});
  return chat_call<double>(desc_, *impl_, prompt, 0.0, req.seed, false, ErrorKind::score_parse,
                           [](const std::string& content) { return parse_score(content); });
}

}  // namespace uvcot
