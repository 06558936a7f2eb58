// End-to-end checks of the ccsgame binary. The binary path comes from the
// build system; commands run through std::system against a temp directory.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ccs/io.hpp"

#ifndef CCSGAME_BIN
#error "CCSGAME_BIN must point at the ccsgame binary"
#endif

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "ccsgame_cli_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args, const fs::path& capture) {
  const std::string cmd =
      std::string(CCSGAME_BIN) + " " + args + " > " + capture.string() + " 2>&1";
  return std::system(cmd.c_str());
}

// Tiny world so the CLI train finishes in well under a second.
void write_tiny_config(const fs::path& path, const std::string& extra = "",
                       double thr_a = 60000.0, double thr_b = 62000.0,
                       double p_frac = 68000.0) {
  std::ofstream out(path);
  out << R"({
  "scenario": "comp-well",
  "seeds": [7],
  "env": {
    "nx": 6, "ny": 3,
    "permeability": {"mode": "lognormal", "mean_md": 100.0, "sigma_log": 0.0, "seed": 1},
    "wells": [
      {"id": "A1", "owner": 0, "i": 1, "j": 1, "kind": "injector", "rate_min": 0.5, "rate_max": 5.0},
      {"id": "B1", "owner": 1, "i": 4, "j": 1, "kind": "injector", "rate_min": 0.5, "rate_max": 5.0}
    ],
    "areas": [
      {"owner": 0, "i_min": 0, "i_max": 2, "j_min": 0, "j_max": 2, "p_threshold": )"
      << thr_a << R"(},
      {"owner": 1, "i_min": 3, "i_max": 5, "j_min": 0, "j_max": 2, "p_threshold": )"
      << thr_b << R"(}
    ],
    "p_frac": )" << p_frac << R"(,
    "substeps_per_step": 2
  },
  "game": {"horizon": 5},
  "train": {
    "episodes": 8, "batch_size": 8, "buffer_capacity": 64,
    "noise": {"sigma_initial": 0.3, "sigma_final": 0.05, "decay_episodes": 6},
    "eval_every": 4, "eval_episodes": 1,
    "actor_hidden": [8], "critic_hidden": [8]
  })" << extra
      << "\n}\n";
}

}  // namespace

TEST_CASE("cli: enumerate-coalitions lists the five partitions of three agents") {
  TempDir tmp;
  const auto capture = tmp.path / "enum.txt";
  REQUIRE(run("enumerate-coalitions --n 3", capture) == 0);
  const std::string text = ccs::io::read_file(capture.string());
  CHECK(text.find("Bell(3) = 5") != std::string::npos);
  int braces = 0;
  for (std::string::size_type pos = 0;
       (pos = text.find("{A", pos)) != std::string::npos; ++pos)
    ++braces;
  CHECK(braces == 5);  // every partition has a block containing A
}

TEST_CASE("cli: a missing config file fails with a nonzero exit and no outputs") {
  TempDir tmp;
  const auto capture = tmp.path / "missing.txt";
  const int rc = run("train --config " + (tmp.path / "nope.json").string() + " --out " +
                         (tmp.path / "out").string(),
                     capture);
  CHECK(rc != 0);
  CHECK_FALSE(fs::exists(tmp.path / "out"));
}

TEST_CASE("cli: training twice with one seed is byte-identical on metrics") {
  TempDir tmp;
  const auto config = tmp.path / "tiny.json";
  write_tiny_config(config);
  const auto out1 = tmp.path / "out1";
  const auto out2 = tmp.path / "out2";
  REQUIRE(run("train --config " + config.string() + " --seed 7 --out " + out1.string(),
              tmp.path / "t1.txt") == 0);
  REQUIRE(run("train --config " + config.string() + " --seed 7 --out " + out2.string(),
              tmp.path / "t2.txt") == 0);
  const auto m1 = out1 / "comp-well" / "seed7" / "metrics.csv";
  const auto m2 = out2 / "comp-well" / "seed7" / "metrics.csv";
  REQUIRE(fs::exists(m1));
  REQUIRE(fs::exists(m2));
  CHECK(ccs::io::read_file(m1.string()) == ccs::io::read_file(m2.string()));
}

TEST_CASE("cli: eval reproduces the NPVs recorded in the checkpoint manifest") {
  TempDir tmp;
  const auto config = tmp.path / "tiny.json";
  write_tiny_config(config);
  const auto out = tmp.path / "out";
  REQUIRE(run("train --config " + config.string() + " --seed 7 --out " + out.string(),
              tmp.path / "train.txt") == 0);
  const auto capture = tmp.path / "eval.txt";
  REQUIRE(run("eval --config " + config.string() + " --seed 7 --out " + out.string(),
              capture) == 0);
  const std::string text = ccs::io::read_file(capture.string());
  CHECK(text.find("reproduced") != std::string::npos);
  CHECK(fs::exists(out / "comp-well" / "seed7" / "eval_summary.json"));
  CHECK(fs::exists(out / "comp-well" / "seed7" / "trajectory.csv"));
  CHECK(fs::exists(out / "comp-well" / "seed7" / "pressure_y5.csv"));
}

TEST_CASE("cli: moo writes a front and a selection on the tiny world") {
  TempDir tmp;
  const auto config = tmp.path / "tiny.json";
  write_tiny_config(config, R"(,
  "moo": {"population": 12, "generations": 5})",
                    250000.0, 260000.0, 400000.0);
  const auto out = tmp.path / "out";
  REQUIRE(run("moo --config " + config.string() + " --seed 3 --out " + out.string(),
              tmp.path / "moo.txt") == 0);
  CHECK(fs::exists(out / "comp-well" / "seed3" / "front.csv"));
  CHECK(fs::exists(out / "comp-well" / "seed3" / "selected.json"));
}

TEST_CASE("cli: env-check passes on the tiny world") {
  TempDir tmp;
  const auto config = tmp.path / "tiny.json";
  write_tiny_config(config);
  const auto capture = tmp.path / "check.txt";
  REQUIRE(run("env-check --config " + config.string(), capture) == 0);
  const std::string text = ccs::io::read_file(capture.string());
  CHECK(text.find("[FAIL]") == std::string::npos);
}

TEST_CASE("cli: unknown subcommands fail") {
  TempDir tmp;
  CHECK(run("frobnicate", tmp.path / "bad.txt") != 0);
}
