#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "consol/provider.hpp"
#include "consol/reflection.hpp"

namespace {

void BM_RequestDigest(benchmark::State& state) {
  consol::ChatRequest request;
  request.model_tag = "bench-model";
  request.messages = {{consol::Role::kSystem, std::string(state.range(0), 'x')},
                      {consol::Role::kUser, "What is the default job timeout?"}};
  for (auto _ : state) benchmark::DoNotOptimize(consol::request_digest(request));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RequestDigest)->Arg(1 << 10)->Arg(1 << 18);

void BM_MergeFacts(benchmark::State& state) {
  std::vector<consol::Fact> facts;
  for (int i = 0; i < state.range(0); ++i) {
    const int pass = 1 + i % 3;
    facts.push_back({"c/p" + std::to_string(pass) + "/f" + std::to_string(i),
                     "Fact name " + std::to_string(i % (state.range(0) / 2 + 1)),
                     consol::MemoryType::kSemantic, "content", "c", pass});
  }
  for (auto _ : state) benchmark::DoNotOptimize(consol::reflection::merge_facts(facts));
}
BENCHMARK(BM_MergeFacts)->Arg(30)->Arg(3000);

}  // namespace
