#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "dsr_cli_test";

std::string fixture(const std::string& name) {
  return std::string(DSR_FIXTURE_DIR) + "/" + name;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  fs::create_directories(kWork);
  fs::path log = kWork / "out.txt";
  std::string cmd = std::string(DSR_CLI_PATH) + " " + args + " > " +
                    log.string() + " 2>&1";
  int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(log);
  return r;
}

}  // namespace

TEST_CASE("partition prints the block structure") {
  RunResult r = run_cli("partition " + fixture("tri_block.json"));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("3 load blocks") != std::string::npos);
  CHECK(r.out.find("2 switch edges") != std::string::npos);
  CHECK(r.out.find("6 virtual edges") != std::string::npos);

  RunResult j = run_cli("partition --json " + fixture("tri_block.json"));
  CHECK(j.exit_code == 0);
  CHECK(j.out.find("\"gfm_capable\": true") != std::string::npos);
  CHECK(j.out.find("\"switch\": \"S1\"") != std::string::npos);
}

TEST_CASE("build reports model shape and writes LP text") {
  fs::path lp = kWork / "model.lp";
  RunResult r = run_cli("build " + fixture("tri_block.json") +
                        " --kind block --lp " + lp.string());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("kind: block") != std::string::npos);
  CHECK(r.out.find("constraints:") != std::string::npos);
  std::string text = slurp(lp);
  CHECK(text.find("Maximize") != std::string::npos);
  CHECK(text.find("Binary") != std::string::npos);
  CHECK(text.find("End") != std::string::npos);
}

TEST_CASE("solve writes a plan that validate accepts") {
  fs::path plan = kWork / "plan.json";
  RunResult r = run_cli("solve " + fixture("tri_block.json") +
                        " --kind block_gfm --plan " + plan.string());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("status: optimal") != std::string::npos);
  CHECK(fs::exists(plan));

  RunResult v = run_cli("validate " + fixture("tri_block.json") +
                        " --kind block_gfm " + plan.string());
  CHECK(v.exit_code == 0);
  CHECK(v.out.find("plan is feasible") != std::string::npos);

  // a corrupted plan is rejected with the validation exit code
  std::string text = slurp(plan);
  auto pos = text.find("\"S1\": 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 7, "\"S1\": 0");
  fs::path bad = kWork / "bad_plan.json";
  std::ofstream(bad) << text;
  RunResult b = run_cli("validate " + fixture("tri_block.json") +
                        " --kind block_gfm " + bad.string());
  CHECK(b.exit_code == 5);
  CHECK(b.out.find("violation") != std::string::npos);
}

TEST_CASE("diagram renders with and without a plan overlay") {
  fs::path plan = kWork / "dia_plan.json";
  RunResult s = run_cli("solve " + fixture("tri_block.json") +
                        " --kind block --plan " + plan.string());
  REQUIRE(s.exit_code == 0);

  RunResult bare = run_cli("diagram " + fixture("tri_block.json"));
  CHECK(bare.exit_code == 0);
  CHECK(bare.out.find("graph feeder {") != std::string::npos);

  fs::path dot = kWork / "overlay.dot";
  RunResult over = run_cli("diagram " + fixture("tri_block.json") + " --plan " +
                           plan.string() + " --step 0 -o " + dot.string());
  CHECK(over.exit_code == 0);
  CHECK(slurp(dot).find("#d8f3d8") != std::string::npos);
}

TEST_CASE("run compares the three load-control models") {
  fs::path csv = kWork / "stats.csv";
  RunResult r = run_cli("run " + fixture("tri_block.json") + " --csv " +
                        csv.string());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("traditional") != std::string::npos);
  CHECK(r.out.find("block_gfm") != std::string::npos);
  std::string text = slurp(csv);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);  // header + 3 rows
}

TEST_CASE("failure modes map to distinct exit codes") {
  // unreadable input
  CHECK(run_cli("partition /nonexistent.json").exit_code == 2);

  // malformed json
  fs::create_directories(kWork);
  fs::path garbage = kWork / "garbage.json";
  std::ofstream(garbage) << "{not json";
  CHECK(run_cli("partition " + garbage.string()).exit_code == 2);

  // structurally valid but semantically broken feeder
  fs::path invalid = kWork / "invalid.json";
  std::ofstream(invalid) << R"({
    "base_kva": 1000, "base_kv": 4.16,
    "horizon": {"n_steps": 1, "dt_hours": 1},
    "buses": [{"id": "A", "phases": "a", "vmin": 1.5, "vmax": 1.0}]
  })";
  RunResult r = run_cli("partition " + invalid.string());
  CHECK(r.exit_code == 2);
  CHECK(r.out.find("invalid feeder") != std::string::npos);

  // unknown subcommand / missing argument are CLI parse failures
  CHECK(run_cli("frobnicate").exit_code != 0);
  CHECK(run_cli("build").exit_code != 0);

  // a plan validated against the wrong feeder
  fs::path plan = kWork / "mismatch_plan.json";
  RunResult s = run_cli("solve " + fixture("tri_block.json") +
                        " --kind block --plan " + plan.string());
  REQUIRE(s.exit_code == 0);
  RunResult v = run_cli("validate " + fixture("two_block_battery.json") +
                        " --kind block " + plan.string());
  CHECK(v.exit_code == 5);
}
