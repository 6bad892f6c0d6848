#pragma once

// End-to-end helpers: seed derivation for each stage and the record -> graph
// path shared by the command-line tool and the test harness.

#include <cstdint>
#include <string_view>
#include <vector>

#include "stgraph/features.hpp"
#include "stgraph/graph.hpp"
#include "stgraph/random.hpp"
#include "stgraph/records.hpp"
#include "stgraph/synth.hpp"
#include "stgraph/training.hpp"

namespace stgraph {

inline constexpr std::uint64_t kDefaultMasterSeed = 20240101;

inline std::uint64_t stage_seed(std::uint64_t master_seed, std::string_view stage) {
  return mix_seed(master_seed, fnv1a64(stage));
}

struct BuildOptions {
  GraphMode mode = GraphMode::coarse;
  double dist_km = 30.0;
  double window_h = 24.0;
  int resolution = 7;
  SplitRatios ratios{};
  bool stratified = false;
};

// Balanced, validated records ready for graph construction.
inline std::vector<CrashRecord> ingest_records(const std::vector<CrashRecord>& records, std::uint64_t master_seed) {
  return balance_undersample(records, stage_seed(master_seed, "balance"));
}

inline Graph build_graph(const std::vector<CrashRecord>& records, const EmbeddingProvider& provider,
                         const BuildOptions& opt, std::uint64_t master_seed) {
  Graph g = opt.mode == GraphMode::fine ? build_fine(records, provider, {opt.dist_km, opt.window_h})
                                        : build_coarse(records, provider, {opt.resolution, std::nullopt});
  assign_split(g, opt.ratios, stage_seed(master_seed, "split;" + to_string(opt.mode)), opt.stratified);
  return g;
}

struct PreparedGraphs {
  std::vector<CrashRecord> records;
  Graph fine;
  Graph coarse;
};

// synth -> ingest -> both graphs, all seeded from one master seed.
inline PreparedGraphs prepare_synthetic(const SynthParams& params, std::uint64_t master_seed,
                                        BuildOptions opt = {}) {
  PreparedGraphs out;
  out.records = ingest_records(generate(params).records, master_seed);
  const HashEmbeddingProvider provider;
  opt.mode = GraphMode::fine;
  out.fine = build_graph(out.records, provider, opt, master_seed);
  opt.mode = GraphMode::coarse;
  out.coarse = build_graph(out.records, provider, opt, master_seed);
  return out;
}

}  // namespace stgraph
