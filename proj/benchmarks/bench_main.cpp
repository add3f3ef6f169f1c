#include <filesystem>

#include <benchmark/benchmark.h>

#include "protattn/metrics.hpp"
#include "protattn/properties.hpp"
#include "protattn/structure.hpp"
#include "protattn/synthetic.hpp"
#include "protattn/tensors.hpp"

using namespace protattn;

namespace {

// 512 tokens, 12 layers x 12 heads: the size of one full-length dump.
void BM_ReadAttention(benchmark::State& state) {
  Rng rng(1);
  std::vector<TokenFlag> flags(512, TokenFlag::Residue);
  flags.front() = TokenFlag::Cls;
  flags.back() = TokenFlag::Sep;
  const auto tensor = random_attention(rng, "big", 12, 12, flags, 1.0);
  const auto path = std::filesystem::temp_directory_path() / "protattn_bench.atns";
  write_attention(path, tensor);
  for (auto _ : state) benchmark::DoNotOptimize(read_attention(path));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(std::filesystem::file_size(path)));
  std::filesystem::remove(path);
}
BENCHMARK(BM_ReadAttention)->Unit(benchmark::kMillisecond);

void BM_ScoreHeads(benchmark::State& state) {
  SyntheticSpec spec;
  spec.n_proteins = static_cast<std::size_t>(state.range(0));
  spec.min_length = 100;
  spec.max_length = 200;
  spec.n_layers = 4;
  spec.n_heads = 4;
  auto data = make_synthetic(spec);
  InMemoryAttention source(std::move(data.attention));
  const std::vector<Property> props{property_by_name("contact"), property_by_name("binding_site")};
  for (auto _ : state) benchmark::DoNotOptimize(score_heads(data.records, source, props, AnalysisConfig{}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScoreHeads)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_DeriveContacts(benchmark::State& state) {
  Rng rng(2);
  const auto record = random_record(rng, "p", static_cast<std::size_t>(state.range(0)), 0.0, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(derive_contacts(record));
}
BENCHMARK(BM_DeriveContacts)->Arg(128)->Arg(512)->Arg(2048);

}  // namespace

BENCHMARK_MAIN();
