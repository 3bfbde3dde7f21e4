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

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"

namespace {

const std::string kCli = CORRSTRUCT_CLI_PATH;

// Exit status of the CLI run with `args`; stdout and stderr go to `log`.
int run(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = "\"" + kCli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> lines_of(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

}  // namespace

TEST_CASE("synth, train, match, inspect and eval run end to end") {
  const auto dir = corrstruct::testing::scratch_dir("cli");
  const auto log = dir / "log.txt";
  const std::string data = (dir / "data").string();
  const std::string model = (dir / "model").string();

  REQUIRE(run("--seed 3 synth --out \"" + data + "\" --identities 8 --dy 4", log) == 0);
  CHECK(lines_of(dir / "data/manifest.csv").size() == 17);

  REQUIRE(run("--seed 3 train --manifest \"" + data + "/manifest.csv\" --out \"" + model +
                  "\" --max-iters 2 --trace-csv \"" + (dir / "trace.csv").string() + "\"",
              log) == 0);
  CHECK(std::filesystem::exists(dir / "model/bank.mbnk"));
  CHECK(std::filesystem::exists(dir / "model/structure.cstr"));
  CHECK(std::filesystem::exists(dir / "model/config.toml"));
  CHECK(lines_of(dir / "trace.csv").size() >= 2);

  REQUIRE(run("match --manifest \"" + data + "/manifest.csv\" --model \"" + model +
                  "\" --probe A_p0002 --out \"" + (dir / "match.csv").string() + "\"",
              log) == 0);
  const auto match = lines_of(dir / "match.csv");
  REQUIRE(match.size() == 9);
  CHECK(match[0] == "probe_id,gallery_id,score,rank");
  double prev = 0.0;
  for (std::size_t r = 1; r < match.size(); ++r) {
    const auto f = fields(match[r]);
    REQUIRE(f.size() == 4);
    CHECK(f[0] == "A_p0002");
    CHECK(f[3] == std::to_string(r));
    const double score = std::stod(f[2]);
    if (r > 1) CHECK(score <= prev);
    prev = score;
  }

  REQUIRE(run("inspect --structure \"" + model + "/structure.cstr\" --out \"" +
                  (dir / "heat.csv").string() + "\"",
              log) == 0);
  const auto heat = lines_of(dir / "heat.csv");
  REQUIRE(heat.size() == 84);
  CHECK(fields(heat[0]).size() == 297);

  REQUIRE(run("--seed 4 eval --manifest \"" + data + "/manifest.csv\" --out \"" +
                  (dir / "eval").string() + "\" --splits 1 --max-iters 2 --methods non-structure",
              log) == 0);
  const auto cmc = lines_of(dir / "eval/cmc.csv");
  REQUIRE(cmc.size() == 5);
  CHECK(cmc[0] == "method,rank,mean_rate,split_0");
  CHECK(fields(cmc[4])[2] == "1");
  std::filesystem::remove_all(dir);
}

TEST_CASE("usage and runtime errors map to exit statuses") {
  const auto dir = corrstruct::testing::scratch_dir("cli_err");
  const auto log = dir / "log.txt";
  CHECK(run("", log) == 2);
  CHECK(run("frobnicate", log) == 2);
  CHECK(run("train --out x", log) == 2);
  CHECK(run("--threads 0 synth --out x", log) == 2);
  CHECK(run("--help", log) == 0);
  CHECK(run("train --manifest \"" + (dir / "none.csv").string() + "\" --out \"" +
                (dir / "m").string() + "\"",
            log) == 3);
  const auto err = lines_of(log);
  REQUIRE(!err.empty());
  CHECK(err[0].rfind("error: ", 0) == 0);
  std::filesystem::remove_all(dir);
}
