// Copyright 2026 The corrstruct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "corrstruct/error.hpp"
#include "corrstruct/evaluation.hpp"
#include "corrstruct/manifest.hpp"
#include "corrstruct/synth.hpp"
#include "support.hpp"

using namespace corrstruct;
using corrstruct::testing::thrown_code;

namespace {

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.learn.max_iters = 3;
  cfg.learn.structures_per_iter = 2;
  cfg.learn.link_subsample = 8;
  cfg.protocol.splits = 2;
  return cfg;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("cmc counts ranks cumulatively") {
  const std::vector<std::size_t> ranks{3, 1, 1, 7};
  const CMCCurve c = cmc_from_ranks(ranks, 5);
  CHECK(c.rates == std::vector<double>{0.5, 0.5, 0.75, 0.75, 0.75});
  CHECK(c.rate(3) == 0.75);
  CHECK(thrown_code([] { cmc_from_ranks({}, 3); }) == ErrorCode::kEmptyRanks);
  CHECK(thrown_code([] { cmc_from_ranks(std::vector<std::size_t>{0, 1}, 3); }) ==
        ErrorCode::kInvalidSpec);
}

TEST_CASE("method names round trip") {
  for (Method m : {Method::kProposed, Method::kNonStructure, Method::kSimpleAverage,
                   Method::kAcGlobal, Method::kNonGlobal, Method::kMulti}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK(!parse_method("bogus"));
  const auto single = all_single_methods();
  CHECK(single.size() == 5);
  CHECK(std::find(single.begin(), single.end(), Method::kMulti) == single.end());
}

TEST_CASE("identity splits are disjoint, sorted and reproducible") {
  std::vector<std::size_t> train, test, train2, test2;
  split_identities(10, 0.5, 7, train, test);
  CHECK(train.size() == 5);
  CHECK(test.size() == 5);
  CHECK(std::is_sorted(train.begin(), train.end()));
  CHECK(std::is_sorted(test.begin(), test.end()));
  std::set<std::size_t> all(train.begin(), train.end());
  all.insert(test.begin(), test.end());
  CHECK(all.size() == 10);
  split_identities(10, 0.5, 7, train2, test2);
  CHECK(train == train2);

  bool differs = false;
  for (std::uint64_t seed = 8; seed < 16; ++seed) {
    split_identities(10, 0.5, seed, train2, test2);
    differs = differs || train2 != train;
  }
  CHECK(differs);

  split_identities(4, 0.1, 1, train, test);
  CHECK(train.size() == 2);
  CHECK(test.size() == 2);
}

TEST_CASE("datasets pair probes with galleries by person") {
  const PipelineConfig cfg = small_config();
  SynthDataset synth = generate_dataset(3, 4, testing::shift_spec(2), cfg.gallery_grid);
  std::reverse(synth.rows.begin(), synth.rows.end());
  std::reverse(synth.images.begin(), synth.images.end());
  const Dataset data = build_dataset(synth.rows, synth.images, cfg);
  REQUIRE(data.size() == 4);
  for (std::size_t k = 0; k < data.size(); ++k) {
    CHECK(data.probe_rows[k].camera_id == "A");
    CHECK(data.gallery_rows[k].camera_id == "B");
    CHECK(data.probe_rows[k].person_id == data.gallery_rows[k].person_id);
    CHECK(data.probe_raw[k].rows() == 84);
    CHECK(data.gallery_raw[k].rows() == 297);
  }
  synth.images.pop_back();
  CHECK(thrown_code([&] { build_dataset(synth.rows, synth.images, cfg); }) ==
        ErrorCode::kLengthMismatch);
}

TEST_CASE("datasets read from disk match the in-memory ones") {
  const PipelineConfig cfg = small_config();
  const SynthDataset synth = generate_dataset(4, 4, testing::shift_spec(2), cfg.gallery_grid);
  const auto dir = testing::scratch_dir("dataset");
  write_dataset(dir, synth);
  const Dataset disk = load_dataset(parse_manifest(dir / "manifest.csv"), cfg);
  const Dataset mem = build_dataset(synth.rows, synth.images, cfg);
  REQUIRE(disk.size() == mem.size());
  for (std::size_t k = 0; k < mem.size(); ++k) {
    CHECK(disk.probe_rows[k] == mem.probe_rows[k]);
    CHECK(disk.probe_raw[k] == mem.probe_raw[k]);
    CHECK(disk.gallery_raw[k] == mem.gallery_raw[k]);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("experiments report per-split and mean cmc curves") {
  const PipelineConfig cfg = small_config();
  const Dataset data = testing::synth_dataset(6, 8, testing::shift_spec(4), cfg);
  const std::vector<Method> methods{Method::kProposed, Method::kNonStructure};
  const ExperimentReport r = run_experiment(data, cfg, methods, 21);
  REQUIRE(r.splits.size() == 2);
  for (const auto& s : r.splits) {
    CHECK(s.train.size() == 4);
    CHECK(s.test.size() == 4);
    for (Method m : methods) {
      const auto& rates = s.cmc.at(m).rates;
      REQUIRE(rates.size() == 4);
      CHECK(std::is_sorted(rates.begin(), rates.end()));
      CHECK(rates.back() == 1.0);
    }
  }
  for (Method m : methods) {
    for (std::size_t k = 1; k <= 4; ++k) {
      const double expect = (r.splits[0].cmc.at(m).rate(k) + r.splits[1].cmc.at(m).rate(k)) / 2.0;
      CHECK(r.mean.at(m).rate(k) == doctest::Approx(expect));
    }
  }
  CHECK(r.splits[0].seed != r.splits[1].seed);

  const ExperimentReport again = run_experiment(data, cfg, methods, 21);
  CHECK(again.fingerprint == r.fingerprint);
  CHECK(again.mean == r.mean);
  CHECK(run_experiment(data, cfg, methods, 22).fingerprint != r.fingerprint);

  const auto dir = testing::scratch_dir("cmc");
  write_cmc_csv(dir / "cmc.csv", r);
  const auto lines = read_lines(dir / "cmc.csv");
  REQUIRE(lines.size() == 1 + 2 * 4);
  CHECK(lines[0] == "method,rank,mean_rate,split_0,split_1");
  CHECK(lines[1].rfind("proposed,1,", 0) == 0);
  CHECK(lines[5].rfind("non-structure,1,", 0) == 0);
  write_timing_csv(dir / "timing.csv", r);
  const auto timing = read_lines(dir / "timing.csv");
  REQUIRE(timing.size() == 3);
  CHECK(timing[0] == "split,seed,train_seconds,match_ms_per_pair");
  CHECK(timing[1].rfind("0," + std::to_string(r.splits[0].seed) + ",", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("experiments reject tiny datasets and empty method lists") {
  const PipelineConfig cfg = small_config();
  Dataset tiny = testing::synth_dataset(6, 4, testing::shift_spec(4), cfg);
  tiny.probe_rows.pop_back();
  tiny.gallery_rows.pop_back();
  tiny.probe_raw.pop_back();
  tiny.gallery_raw.pop_back();
  const std::vector<Method> methods{Method::kNonStructure};
  CHECK(thrown_code([&] { run_experiment(tiny, cfg, methods, 1); }) ==
        ErrorCode::kDatasetTooSmall);
  const Dataset data = testing::synth_dataset(6, 4, testing::shift_spec(4), cfg);
  CHECK(thrown_code([&] { run_experiment(data, cfg, {}, 1); }) == ErrorCode::kInvalidSpec);
}

TEST_CASE("evaluated ranks lie within the gallery") {
  const PipelineConfig cfg = small_config();
  const Dataset data = testing::synth_dataset(9, 10, testing::shift_spec(4), cfg);
  std::vector<std::size_t> train, test;
  split_identities(data.size(), 0.5, 3, train, test);
  const FittedPipeline fit = fit_pipeline(data, train, cfg, 3);
  const std::vector<Method> methods = all_single_methods();
  double ms = -1.0;
  const auto ranks = evaluate_methods(data, test, fit, methods, cfg.learn.t_c, &ms);
  CHECK(ms >= 0.0);
  CHECK(ranks.size() == methods.size());
  for (const auto& [m, r] : ranks) {
    REQUIRE(r.size() == test.size());
    for (std::size_t x : r) {
      CHECK(x >= 1);
      CHECK(x <= test.size());
    }
  }
}
