#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "dsr/blocks.hpp"
#include "dsr/formulation.hpp"

using namespace dsr;

namespace {

FeederModel load(const std::string& name) {
  std::ifstream is(std::string(DSR_FIXTURE_DIR) + "/" + name);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_feeder(ss.str());
}

const FeederModel& analogue() {
  static FeederModel m = load("ieee13_analogue.json");
  return m;
}

void BM_ParseFeeder(benchmark::State& state) {
  std::ifstream is(std::string(DSR_FIXTURE_DIR) + "/ieee13_analogue.json");
  std::ostringstream ss;
  ss << is.rdbuf();
  std::string text = ss.str();
  for (auto _ : state) benchmark::DoNotOptimize(parse_feeder(text));
}
BENCHMARK(BM_ParseFeeder);

void BM_Partition(benchmark::State& state) {
  const FeederModel& m = analogue();
  for (auto _ : state) benchmark::DoNotOptimize(compute_load_blocks(m));
}
BENCHMARK(BM_Partition);

void BM_BuildModel(benchmark::State& state) {
  const FeederModel& m = analogue();
  BlockPartition p = compute_load_blocks(m);
  auto kind = static_cast<FormulationKind>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_dsr(m, p, kind));
  state.SetLabel(to_string(kind));
}
BENCHMARK(BM_BuildModel)->Arg(0)->Arg(1)->Arg(2);

void BM_WriteLp(benchmark::State& state) {
  const FeederModel& m = analogue();
  BlockPartition p = compute_load_blocks(m);
  BuildResult b = build_dsr(m, p, FormulationKind::block_gfm);
  for (auto _ : state) benchmark::DoNotOptimize(write_lp(b.model));
}
BENCHMARK(BM_WriteLp);

}  // namespace

BENCHMARK_MAIN();
