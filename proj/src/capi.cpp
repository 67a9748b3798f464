// SPDX-License-Identifier: Apache-2.0
#include "uvcot/uvcot.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "uvcot/config.hpp"
#include "uvcot/loss.hpp"
#include "uvcot/prefmath.hpp"
#include "uvcot/runs.hpp"
#include "uvcot/verify.hpp"

struct uvcot_config {
  uvcot::RunConfig cfg;
  std::string queries_str;
};

struct uvcot_policy {
  uvcot::ToyPolicy policy;
};

namespace {

thread_local std::string g_last_error;

uvcot_status status_for(uvcot::ErrorKind kind) {
  using uvcot::ErrorKind;
  switch (kind) {
    case ErrorKind::invalid_argument: return UVCOT_ERR_INVALID_ARGUMENT;
    case ErrorKind::config: return UVCOT_ERR_CONFIG;
    case ErrorKind::io: return UVCOT_ERR_IO;
    case ErrorKind::parse:
    case ErrorKind::missing_field:
    case ErrorKind::invariant:
    case ErrorKind::malformed_number:
    case ErrorKind::pixel_coordinates:
    case ErrorKind::no_match: return UVCOT_ERR_PARSE;
    case ErrorKind::dimension_mismatch: return UVCOT_ERR_DIMENSION;
    case ErrorKind::transport:
    case ErrorKind::http_status:
    case ErrorKind::generation_failure:
    case ErrorKind::score_parse: return UVCOT_ERR_BACKEND;
    case ErrorKind::empty_result:
    case ErrorKind::skipped_query:
    case ErrorKind::unresolvable_region: return UVCOT_ERR_EMPTY_RESULT;
    case ErrorKind::partial_iteration: return UVCOT_ERR_PARTIAL_ITERATION;
  }
  return UVCOT_ERR_INTERNAL;
}

uvcot_status fail(uvcot_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

template <typename F>
uvcot_status guard(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const uvcot::Error& e) {
    return fail(status_for(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(UVCOT_ERR_INTERNAL, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(UVCOT_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(UVCOT_ERR_INTERNAL, e.what());
  }
}

#define UVCOT_REQUIRE(cond, what) \
  if (!(cond)) return fail(UVCOT_ERR_INVALID_ARGUMENT, what)

uvcot::loss::PairLogps to_cpp(const uvcot_pair_logps& p) {
  return {p.logp_w_policy, p.logp_w_ref, p.logp_l_policy, p.logp_l_ref, p.s_w, p.s_l};
}

uvcot::loss::LossConfig loss_cfg(double beta, double g_scale) {
  uvcot::loss::LossConfig c;
  c.beta = beta;
  c.g_scale = g_scale;
  c.validate();
  return c;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void refresh(uvcot_config* c) {
  c->queries_str = c->cfg.queries ? c->cfg.queries->string() : std::string();
}

}  // namespace

extern "C" {

const char* uvcot_version(void) { return "0.1.0"; }

const char* uvcot_last_error(void) { return g_last_error.c_str(); }

int uvcot_exit_code(uvcot_status status) {
  switch (status) {
    case UVCOT_OK: return 0;
    case UVCOT_ERR_EMPTY_RESULT: return 2;
    case UVCOT_ERR_PARTIAL_ITERATION: return 3;
    default: return 1;
  }
}

void uvcot_string_free(char* s) { std::free(s); }

uvcot_status uvcot_config_load(const char* path, uvcot_config** out) {
  UVCOT_REQUIRE(path && out, "path and out must be non-null");
  return guard([&] {
    auto* c = new uvcot_config{uvcot::RunConfig::load(path), {}};
    refresh(c);
    *out = c;
    return UVCOT_OK;
  });
}

uvcot_status uvcot_config_default(uvcot_config** out) {
  UVCOT_REQUIRE(out, "out must be non-null");
  return guard([&] {
    *out = new uvcot_config{};
    return UVCOT_OK;
  });
}

uvcot_status uvcot_config_parse(const char* text, uvcot_config** out) {
  UVCOT_REQUIRE(text && out, "text and out must be non-null");
  return guard([&] {
    auto* c = new uvcot_config{uvcot::RunConfig::parse(text), {}};
    refresh(c);
    *out = c;
    return UVCOT_OK;
  });
}

uvcot_status uvcot_config_set(uvcot_config* cfg, const char* key, const char* value) {
  UVCOT_REQUIRE(cfg && key && value, "cfg, key and value must be non-null");
  return guard([&] {
    cfg->cfg.set(key, value);
    refresh(cfg);
    return UVCOT_OK;
  });
}

uvcot_status uvcot_config_apply_ablation(uvcot_config* cfg, const char* name) {
  UVCOT_REQUIRE(cfg && name, "cfg and name must be non-null");
  return guard([&] {
    cfg->cfg.apply_ablation(name);
    return UVCOT_OK;
  });
}

uvcot_status uvcot_config_validate(const uvcot_config* cfg) {
  UVCOT_REQUIRE(cfg, "cfg must be non-null");
  return guard([&] {
    cfg->cfg.validate();
    return UVCOT_OK;
  });
}

const char* uvcot_config_queries_path(const uvcot_config* cfg) {
  if (!cfg || cfg->queries_str.empty()) return nullptr;
  return cfg->queries_str.c_str();
}

void uvcot_config_free(uvcot_config* cfg) { delete cfg; }

uvcot_status uvcot_policy_create(size_t feature_dim, uvcot_policy** out) {
  UVCOT_REQUIRE(out, "out must be non-null");
  return guard([&] {
    *out = new uvcot_policy{uvcot::ToyPolicy(feature_dim)};
    return UVCOT_OK;
  });
}

uvcot_status uvcot_policy_load(const char* path, uvcot_policy** out) {
  UVCOT_REQUIRE(path && out, "path and out must be non-null");
  return guard([&] {
    *out = new uvcot_policy{uvcot::ToyPolicy::load(path)};
    return UVCOT_OK;
  });
}

uvcot_status uvcot_policy_save(const uvcot_policy* policy, const char* path) {
  UVCOT_REQUIRE(policy && path, "policy and path must be non-null");
  return guard([&] {
    policy->policy.save(path);
    return UVCOT_OK;
  });
}

size_t uvcot_policy_feature_dim(const uvcot_policy* policy) {
  return policy ? policy->policy.feature_dim() : 0;
}

uvcot_status uvcot_policy_weights(const uvcot_policy* policy, double* out, size_t n) {
  UVCOT_REQUIRE(policy && (out || n == 0), "policy and out must be non-null");
  const auto w = policy->policy.weights();
  for (size_t i = 0; i < n && i < w.size(); ++i) out[i] = w[i];
  return UVCOT_OK;
}

uvcot_status uvcot_policy_set_weights(uvcot_policy* policy, const double* w, size_t n) {
  UVCOT_REQUIRE(policy && (w || n == 0), "policy and w must be non-null");
  if (n != policy->policy.feature_dim()) {
    return fail(UVCOT_ERR_DIMENSION, "expected " + std::to_string(policy->policy.feature_dim()) +
                                         " weights, got " + std::to_string(n));
  }
  auto dst = policy->policy.mutable_weights();
  for (size_t i = 0; i < n; ++i) dst[i] = w[i];
  return UVCOT_OK;
}

void uvcot_policy_free(uvcot_policy* policy) { delete policy; }

double uvcot_sigmoid(double x) { return uvcot::prefmath::sigmoid(x); }

double uvcot_shifted_preference_prob(double r_w, double r_l, double delta_r) {
  return uvcot::prefmath::shifted_preference_prob(r_w, r_l, delta_r);
}

uvcot_status uvcot_sdpo_loss(const uvcot_pair_logps* p, double beta, double g_scale,
                             double* out) {
  UVCOT_REQUIRE(p && out, "p and out must be non-null");
  return guard([&] {
    *out = uvcot::loss::sdpo_loss(to_cpp(*p), loss_cfg(beta, g_scale));
    return UVCOT_OK;
  });
}

uvcot_status uvcot_dpo_loss(const uvcot_pair_logps* p, double beta, double* out) {
  UVCOT_REQUIRE(p && out, "p and out must be non-null");
  return guard([&] {
    loss_cfg(beta, 0.0);
    *out = uvcot::loss::dpo_loss(to_cpp(*p), beta);
    return UVCOT_OK;
  });
}

uvcot_status uvcot_sdpo_grad_logps(const uvcot_pair_logps* p, double beta, double g_scale,
                                   double* d_logp_w, double* d_logp_l) {
  UVCOT_REQUIRE(p && d_logp_w && d_logp_l, "pointers must be non-null");
  return guard([&] {
    const auto g = uvcot::loss::sdpo_grad_logps(to_cpp(*p), loss_cfg(beta, g_scale));
    *d_logp_w = g.d_logp_w;
    *d_logp_l = g.d_logp_l;
    return UVCOT_OK;
  });
}

uvcot_status uvcot_run_gen_data(const uvcot_config* cfg, const char* queries_path,
                                const char* out_path, const char* policy_path,
                                uvcot_gen_data_summary* summary) {
  UVCOT_REQUIRE(cfg && queries_path && out_path, "cfg, queries and out must be non-null");
  return guard([&] {
    std::optional<std::filesystem::path> policy;
    if (policy_path) policy = policy_path;
    const auto s = uvcot::runs::gen_data(cfg->cfg, queries_path, out_path, policy);
    if (summary) {
      *summary = {s.queries, s.skipped_queries, s.pairs, s.dropped_generation,
                  s.dropped_evaluation};
    }
    if (s.pairs == 0) return fail(UVCOT_ERR_EMPTY_RESULT, "no preference pairs were produced");
    return UVCOT_OK;
  });
}

uvcot_status uvcot_run_train(const uvcot_config* cfg, const char* pairs_path,
                             const char* queries_path, const char* policy_in,
                             const char* policy_out, const char* loss_csv,
                             uvcot_train_summary* summary) {
  UVCOT_REQUIRE(cfg && pairs_path && queries_path && policy_in && policy_out,
                "cfg, pairs, queries, policy_in and policy_out must be non-null");
  return guard([&] {
    std::optional<std::filesystem::path> csv;
    if (loss_csv) csv = loss_csv;
    const auto s =
        uvcot::runs::train(cfg->cfg, pairs_path, queries_path, policy_in, policy_out, csv);
    if (summary) {
      *summary = {s.pairs, s.skipped_pairs, s.loss_curve.size() - 1, s.loss_curve.front(),
                  s.loss_curve.back()};
    }
    return UVCOT_OK;
  });
}

uvcot_status uvcot_run_iterate(const uvcot_config* cfg, const char* queries_path,
                               const char* out_dir, uvcot_iterate_summary* summary) {
  UVCOT_REQUIRE(cfg && queries_path && out_dir, "cfg, queries and out_dir must be non-null");
  return guard([&] {
    const auto s = uvcot::runs::iterate(cfg->cfg, queries_path, out_dir);
    if (summary) {
      summary->completed_iterations = static_cast<int>(s.reports.size());
      summary->aborted = s.aborted ? 1 : 0;
      summary->baseline_region_accuracy = s.baseline.region_accuracy;
      summary->baseline_answer_score = s.baseline.answer_score;
      summary->final_region_accuracy =
          s.reports.empty() ? s.baseline.region_accuracy : s.reports.back().region_accuracy;
      summary->final_answer_score =
          s.reports.empty() ? s.baseline.answer_score : s.reports.back().eval_score;
    }
    if (s.aborted) {
      return fail(UVCOT_ERR_PARTIAL_ITERATION,
                  "stopped after " + std::to_string(s.reports.size()) +
                      " completed iteration(s): " + s.abort_reason);
    }
    return UVCOT_OK;
  });
}

uvcot_status uvcot_make_queries(const uvcot_config* cfg, size_t count, uint64_t seed,
                                const char* out_path) {
  UVCOT_REQUIRE(cfg && out_path, "cfg and out must be non-null");
  return guard([&] {
    uvcot::runs::make_queries(cfg->cfg, count, seed, out_path);
    return UVCOT_OK;
  });
}

uvcot_status uvcot_run_verify(int inject_grad_sign_flip, char** report) {
  return guard([&] {
    uvcot::verify::VerifyOptions opts;
    opts.inject_grad_sign_flip = inject_grad_sign_flip != 0;
    const auto results = uvcot::verify::run_all(opts);
    if (report) *report = dup_string(uvcot::verify::format_table(results));
    std::string failed;
    for (const auto& r : results) {
      if (!r.passed) failed += (failed.empty() ? "" : ", ") + r.name;
    }
    if (!failed.empty()) return fail(UVCOT_ERR_VERIFY_FAILED, "failed properties: " + failed);
    return UVCOT_OK;
  });
}

}  // extern "C"
