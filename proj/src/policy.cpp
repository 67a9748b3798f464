// SPDX-License-Identifier: Apache-2.0
#include "uvcot/policy.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "uvcot/error.hpp"
#include "uvcot/jsonl.hpp"
#include "uvcot/rng.hpp"

namespace uvcot {

ToyPolicy::ToyPolicy(std::size_t feature_dim) : weights_(feature_dim, 0.0) {
  if (feature_dim == 0) throw Error(ErrorKind::invalid_argument, "feature_dim must be >= 1");
}

ToyPolicy::ToyPolicy(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw Error(ErrorKind::invalid_argument, "feature_dim must be >= 1");
  for (double w : weights_) {
    if (!std::isfinite(w)) throw Error(ErrorKind::invariant, "non-finite weight", "weights");
  }
}

void ToyPolicy::check_dims(std::span<const RegionFeatures> candidates) const {
  if (candidates.empty()) throw Error(ErrorKind::invalid_argument, "empty candidate set");
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].values.size() != weights_.size()) {
      throw Error(ErrorKind::dimension_mismatch,
                  "candidate has " + std::to_string(candidates[i].values.size()) +
                      " features, policy expects " + std::to_string(weights_.size()),
                  "candidates[" + std::to_string(i) + "]");
    }
  }
}

std::vector<double> ToyPolicy::logits(std::span<const RegionFeatures> candidates) const {
  check_dims(candidates);
  std::vector<double> out(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double acc = 0.0;
    for (std::size_t f = 0; f < weights_.size(); ++f) acc += weights_[f] * candidates[i].values[f];
    out[i] = acc;
  }
  return out;
}

namespace {

std::vector<double> log_softmax(const std::vector<double>& z) {
  const double hi = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - hi);
  const double log_norm = hi + std::log(sum);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - log_norm;
  return out;
}

std::size_t argmax_lowest(const std::vector<double>& z) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (z[i] > z[best]) best = i;
  }
  return best;
}

void check_index(std::size_t index, std::size_t n) {
  if (index >= n) {
    throw Error(ErrorKind::invalid_argument,
                "index " + std::to_string(index) + " out of range for " + std::to_string(n) +
                    " candidates",
                "index");
  }
}

}  // namespace

std::vector<double> ToyPolicy::log_probs(std::span<const RegionFeatures> candidates) const {
  return log_softmax(logits(candidates));
}

double ToyPolicy::region_logprob(std::span<const RegionFeatures> candidates,
                                 std::size_t index) const {
  auto lp = log_probs(candidates);
  check_index(index, lp.size());
  return lp[index];
}

std::vector<double> ToyPolicy::logprob_grad(std::span<const RegionFeatures> candidates,
                                            std::size_t index) const {
  auto lp = log_probs(candidates);
  check_index(index, lp.size());
  std::vector<double> grad = candidates[index].values;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const double pj = std::exp(lp[j]);
    for (std::size_t f = 0; f < grad.size(); ++f) grad[f] -= pj * candidates[j].values[f];
  }
  return grad;
}

std::size_t ToyPolicy::greedy_region(std::span<const RegionFeatures> candidates) const {
  return argmax_lowest(logits(candidates));
}

std::size_t ToyPolicy::sample_region(std::span<const RegionFeatures> candidates,
                                     std::uint64_t seed, double temperature) const {
  if (!(temperature > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "temperature must be > 0", "temperature");
  }
  auto z = logits(candidates);
  if (temperature < kGreedyTemperature) return argmax_lowest(z);
  for (double& v : z) v /= temperature;
  const auto lp = log_softmax(z);
  Rng rng(seed);
  const double u = rng.uniform_open();
  double cdf = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    cdf += std::exp(lp[i]);
    if (u < cdf) return i;
  }
  // u landed in the rounding gap above the accumulated mass.
  std::size_t last = lp.size() - 1;
  while (last > 0 && std::exp(lp[last]) == 0.0) --last;
  return last;
}

std::string ToyPolicy::to_json() const {
  nlohmann::ordered_json j;
  j["feature_dim"] = weights_.size();
  j["weights"] = weights_;
  return j.dump();
}

ToyPolicy ToyPolicy::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse, e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::parse, "checkpoint must be a JSON object");
  if (!j.contains("feature_dim")) throw Error(ErrorKind::missing_field, "absent", "feature_dim");
  if (!j.contains("weights")) throw Error(ErrorKind::missing_field, "absent", "weights");
  if (!j["feature_dim"].is_number_integer() || j["feature_dim"].get<long long>() < 1)
    throw Error(ErrorKind::parse, "expected positive integer", "feature_dim");
  if (!j["weights"].is_array()) throw Error(ErrorKind::parse, "expected array", "weights");
  std::vector<double> w;
  for (const auto& v : j["weights"]) {
    if (!v.is_number()) throw Error(ErrorKind::parse, "expected number", "weights");
    w.push_back(v.get<double>());
  }
  if (w.size() != j["feature_dim"].get<std::size_t>()) {
    throw Error(ErrorKind::dimension_mismatch, "weights length differs from feature_dim",
                "weights");
  }
  return ToyPolicy(std::move(w));
}

void ToyPolicy::save(const std::filesystem::path& path) const {
  write_text_file(path, to_json() + "\n");
}

ToyPolicy ToyPolicy::load(const std::filesystem::path& path) {
  try {
    return from_json(read_text_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what(), e.field());
  }
}

}  // namespace uvcot
