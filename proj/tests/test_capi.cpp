// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "interface_support.hpp"
#include "oracles.hpp"
#include "uvcot/uvcot.h"

using iface::TempDir;

TEST_CASE("c api: math") {
  CHECK(uvcot_sigmoid(1.0) == doctest::Approx(oracle::kSigmoid1).epsilon(1e-15));
  CHECK(uvcot_shifted_preference_prob(2.0, 1.0, 0.0) == doctest::Approx(oracle::kSigmoid1).epsilon(1e-15));
  uvcot_pair_logps p{-1.0, -1.5, -2.0, -1.0, 0.8, 0.3};
  double sd = 0, d = 0, gw = 0, gl = 0;
  REQUIRE(uvcot_sdpo_loss(&p, 0.5, 0.0, &sd) == UVCOT_OK);
  REQUIRE(uvcot_dpo_loss(&p, 0.5, &d) == UVCOT_OK);
  CHECK(sd == d);
  REQUIRE(uvcot_sdpo_grad_logps(&p, 0.5, 1.0, &gw, &gl) == UVCOT_OK);
  CHECK(gw == doctest::Approx(-gl));
  CHECK(gw < 0.0);
  CHECK(uvcot_sdpo_loss(nullptr, 0.5, 1.0, &sd) == UVCOT_ERR_INVALID_ARGUMENT);
  CHECK(std::string(uvcot_last_error()).size() > 0);
  CHECK(uvcot_sdpo_loss(&p, -1.0, 1.0, &sd) != UVCOT_OK);
}

TEST_CASE("c api: config handles") {
  uvcot_config* cfg = nullptr;
  REQUIRE(uvcot_config_parse(iface::small_config().c_str(), &cfg) == UVCOT_OK);
  CHECK(uvcot_config_validate(cfg) == UVCOT_OK);
  CHECK(uvcot_config_set(cfg, "loss.nonsense", "1") == UVCOT_ERR_CONFIG);
  CHECK(std::string(uvcot_last_error()).find("loss.nonsense") != std::string::npos);
  CHECK(uvcot_config_apply_ablation(cfg, "no-gamma") == UVCOT_OK);
  CHECK(uvcot_config_apply_ablation(cfg, "bogus") == UVCOT_ERR_CONFIG);
  CHECK(uvcot_config_set(cfg, "datagen.k_pairs", "99") == UVCOT_OK);
  CHECK(uvcot_config_validate(cfg) == UVCOT_ERR_CONFIG);
  CHECK(uvcot_config_queries_path(cfg) == nullptr);
  uvcot_config_free(cfg);

  uvcot_config* bad = nullptr;
  CHECK(uvcot_config_parse("beta = 1", &bad) == UVCOT_ERR_PARSE);
  CHECK(bad == nullptr);
  CHECK(uvcot_config_load("/nope/none.toml", &bad) == UVCOT_ERR_IO);
  CHECK(uvcot_exit_code(UVCOT_OK) == 0);
  CHECK(uvcot_exit_code(UVCOT_ERR_EMPTY_RESULT) == 2);
  CHECK(uvcot_exit_code(UVCOT_ERR_PARTIAL_ITERATION) == 3);
  CHECK(uvcot_exit_code(UVCOT_ERR_CONFIG) == 1);
}

TEST_CASE("c api: policy round trip") {
  TempDir dir;
  uvcot_policy* p = nullptr;
  REQUIRE(uvcot_policy_create(8, &p) == UVCOT_OK);
  CHECK(uvcot_policy_feature_dim(p) == 8);
  const std::vector<double> w{0.1, -0.2, 0.3, 1e-17, 5.0, -6.25, 0.0, 1.0 / 3.0};
  REQUIRE(uvcot_policy_set_weights(p, w.data(), w.size()) == UVCOT_OK);
  CHECK(uvcot_policy_set_weights(p, w.data(), 3) == UVCOT_ERR_DIMENSION);
  REQUIRE(uvcot_policy_save(p, (dir / "p.json").c_str()) == UVCOT_OK);
  uvcot_policy* q = nullptr;
  REQUIRE(uvcot_policy_load((dir / "p.json").c_str(), &q) == UVCOT_OK);
  std::vector<double> back(8);
  REQUIRE(uvcot_policy_weights(q, back.data(), back.size()) == UVCOT_OK);
  CHECK(back == w);
  uvcot_policy_free(p);
  uvcot_policy_free(q);
  iface::spit(dir / "broken.json", "{\"weights\": [1, 2");
  CHECK(uvcot_policy_load((dir / "broken.json").c_str(), &q) == UVCOT_ERR_PARSE);
}

TEST_CASE("c api: gen-data, train, iterate") {
  TempDir dir;
  uvcot_config* cfg = nullptr;
  REQUIRE(uvcot_config_parse(iface::small_config().c_str(), &cfg) == UVCOT_OK);
  REQUIRE(uvcot_make_queries(cfg, 40, 3, (dir / "q.jsonl").c_str()) == UVCOT_OK);

  uvcot_gen_data_summary g{};
  REQUIRE(uvcot_run_gen_data(cfg, (dir / "q.jsonl").c_str(), (dir / "pairs.jsonl").c_str(), nullptr, &g) ==
          UVCOT_OK);
  CHECK(g.queries == 40);
  CHECK(g.pairs > 0);
  CHECK(g.pairs <= 40 * 3);

  uvcot_policy* p = nullptr;
  REQUIRE(uvcot_policy_create(8, &p) == UVCOT_OK);
  REQUIRE(uvcot_policy_save(p, (dir / "p0.json").c_str()) == UVCOT_OK);
  uvcot_policy_free(p);
  uvcot_train_summary t{};
  REQUIRE(uvcot_run_train(cfg, (dir / "pairs.jsonl").c_str(), (dir / "q.jsonl").c_str(),
                          (dir / "p0.json").c_str(), (dir / "p1.json").c_str(), nullptr, &t) == UVCOT_OK);
  CHECK(t.pairs == g.pairs);
  CHECK(t.epochs == 3);
  CHECK(iface::slurp(dir / "p1.json.loss.csv").rfind("epoch,mean_loss\n", 0) == 0);

  uvcot_iterate_summary it{};
  REQUIRE(uvcot_run_iterate(cfg, (dir / "q.jsonl").c_str(), (dir / "run").c_str(), &it) == UVCOT_OK);
  CHECK(it.completed_iterations == 2);
  CHECK(it.aborted == 0);

  REQUIRE(uvcot_config_set(cfg, "loss.min_margin", "5") == UVCOT_OK);
  CHECK(uvcot_run_gen_data(cfg, (dir / "q.jsonl").c_str(), (dir / "none.jsonl").c_str(), nullptr, &g) ==
        UVCOT_ERR_EMPTY_RESULT);
  CHECK(uvcot_run_iterate(cfg, (dir / "q.jsonl").c_str(), (dir / "run2").c_str(), &it) ==
        UVCOT_ERR_PARTIAL_ITERATION);
  CHECK(it.completed_iterations == 0);
  CHECK(std::string(uvcot_last_error()).find("stopped after 0 completed") != std::string::npos);
  uvcot_config_free(cfg);
}
