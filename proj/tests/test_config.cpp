// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <fstream>
#include <functional>

#include "doctest.h"
#include "fixtures.hpp"
#include "uvcot/error.hpp"
#include "uvcot/config.hpp"

using namespace uvcot;

namespace {

constexpr const char* kText = R"(# two-stage run
[loss]
beta = 0.2
gamma = 0.5
g_scale = 1.0

[datagen]
n_seeds = 6
k_pairs = 3
t_steps = 2
base_seed = 99

[train]
learning_rate = 0.25
ref_mode = "initial"

[bench]
stage_mode = "two_stage"
grid_size = 4
)";

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::invalid_argument;
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = RunConfig::parse(kText);
  CHECK(c.loss.beta == 0.2);
  CHECK(c.datagen.n_seeds == 6);
  CHECK(c.datagen.k_pairs == 3);
  CHECK(c.datagen.base_seed == 99);
  CHECK(c.train.learning_rate == 0.25);
  CHECK(c.train.ref_mode == trainer::RefMode::initial);
  CHECK(c.bench.stage_mode == bench::StageMode::two_stage);
  CHECK(c.feature_dim() == 16);
  CHECK_NOTHROW(c.validate());

  const auto d = c.datagen_config();
  CHECK(d.gamma == 0.5);
  CHECK(c.train_config().loss.beta == 0.2);
}

TEST_CASE("config errors") {
  CHECK(kind_of([] { RunConfig::parse("[loss]\nbeat = 1\n"); }) == ErrorKind::config);
  CHECK(kind_of([] { RunConfig::parse("beta = 1\n"); }) == ErrorKind::parse);
  CHECK(kind_of([] { RunConfig::parse("[loss\n"); }) == ErrorKind::parse);
  CHECK(kind_of([] { RunConfig::parse("[loss]\nbeta = abc\n"); }) == ErrorKind::config);
  CHECK(kind_of([] { RunConfig::parse("[datagen]\nn_seeds = -3\n").validate(); }) == ErrorKind::config);

  auto c = RunConfig::parse(kText);
  c.set("datagen.k_pairs", "16");  // 6 seeds give at most 15 pairs
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
  c.set("datagen.k_pairs", "15");
  CHECK_NOTHROW(c.validate());

  c.set("datagen.t_steps", "1");  // sim needs one step per stage
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
  c.set("datagen.t_steps", "2");

  c.set("data.queries", "/definitely/not/here.jsonl");
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);

  RunConfig d = RunConfig::parse(kText);
  CHECK(kind_of([&] { d.set("loss", "1"); }) == ErrorKind::config);
  d.set("loss.beta", "0");
  CHECK(kind_of([&] { d.validate(); }) == ErrorKind::config);
}

TEST_CASE("config overrides, ablations and environment") {
  RunConfig c = RunConfig::parse(kText);
  c.apply_ablation("no-gamma");
  CHECK(c.loss.gamma == 0.0);
  CHECK(c.label == "no-gamma");
  c = RunConfig::parse(kText);
  c.apply_ablation("naive-dpo");
  CHECK(c.loss.g_scale == 0.0);
  c = RunConfig::parse(kText);
  c.apply_ablation("single-pass");
  CHECK(c.train.m_iterations == 1);
  CHECK(kind_of([&] { c.apply_ablation("everything"); }) == ErrorKind::config);

  ::setenv("UVCOT_API_KEY", "sekrit", 1);
  ::setenv("UVCOT_API_BASE", "http://example.invalid/v1", 1);
  c.apply_environment();
  CHECK(c.backend.api_key == "sekrit");
  CHECK(c.backend.endpoint == "http://example.invalid/v1");
  ::unsetenv("UVCOT_API_KEY");
  ::unsetenv("UVCOT_API_BASE");
}

TEST_CASE("relative paths resolve against the config file") {
  fixtures::TempDir dir;
  {
    std::ofstream(dir.path() / "q.jsonl") << "";
    std::ofstream(dir.path() / "run.toml") << kText << "\n[data]\nqueries = \"q.jsonl\"\n";
  }
  const RunConfig c = RunConfig::load(dir.path() / "run.toml");
  REQUIRE(c.queries.has_value());
  CHECK(*c.queries == dir.path() / "q.jsonl");
  CHECK(kind_of([&] { RunConfig::load(dir.path() / "missing.toml"); }) == ErrorKind::io);
}
