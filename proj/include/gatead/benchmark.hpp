#pragma once

// Train-free evaluation plumbing shared by the sweep command and the tests:
// a ground-truthed synthetic category and a scorer that turns a model plus
// labeled queries into a MetricsReport.

#include <string>
#include <vector>

#include "gatead/eval.hpp"
#include "gatead/score.hpp"
#include "gatead/synth.hpp"
#include "gatead/train.hpp"

namespace gatead {

struct BenchmarkSpec {
    SynthSpec grid;                // shape, texture and anomaly strength
    std::size_t support_count = 1;
    std::size_t normal_count = 20;
    std::size_t anomalous_count = 20;
    std::uint64_t seed = 0;        // grid seeds and block placement derive from this
};

struct LabeledQuery {
    std::string name;
    PatchGrid grid;
    std::uint8_t label = 0;
    BinaryMask mask;  // at grid resolution
};

struct Benchmark {
    std::vector<PatchGrid> support;
    std::vector<LabeledQuery> queries;
};

/// Support grids, then normal queries, then anomalous queries with the block
/// placed uniformly at random inside the grid.
Benchmark make_synthetic_benchmark(const BenchmarkSpec& spec);

struct EvaluationResult {
    std::vector<AnomalyResult> results;  // one per query, same order
    MetricsReport metrics;
};

/// Scores every query. Image metrics need both labels present; pixel metrics
/// need at least one defect pixel. Masks smaller than the pixel map are lifted
/// with nearest-neighbor resizing.
EvaluationResult evaluate_queries(const TrainedModel& model, const std::vector<LabeledQuery>& queries,
                                  const ScoreConfig& cfg);

}  // namespace gatead
