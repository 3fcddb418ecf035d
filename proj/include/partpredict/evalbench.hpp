#ifndef PARTPREDICT_EVALBENCH_HPP
#define PARTPREDICT_EVALBENCH_HPP

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "partpredict/content.hpp"
#include "partpredict/dataset.hpp"
#include "partpredict/hfcn.hpp"
#include "partpredict/parttree.hpp"
#include "partpredict/rdosim.hpp"

namespace partpredict {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// Percentage encode-time reduction relative to the baseline.
double speedup_percent(double t_baseline, double t_test);  // NonPositiveBaselineError

// PSNR in dB from accumulated squared error; lossless capped at 99 dB.
double psnr_from_sse(double sse, std::int64_t pixel_count);

struct RdPoint {
  double rate = 0.0;
  double quality = 0.0;
};

struct RdCurve {
  std::vector<RdPoint> points;
};

// Bjontegaard metrics: cubic least-squares fit (linear fallback on degenerate
// geometry), exact polynomial integration over the overlapping range.
double bd_rate(const RdCurve& anchor, const RdCurve& test);   // percent
double bd_psnr(const RdCurve& anchor, const RdCurve& test);   // dB

// ---------------------------------------------------------------------------
// Predictors
// ---------------------------------------------------------------------------

// Anything that proposes a (possibly inconsistent) partition tree.
class PartitionPredictor {
 public:
  virtual ~PartitionPredictor() = default;
  virtual PartitionTree predict(const Superblock& sb, QpValue q) = 0;
  virtual std::vector<PartitionTree> predict_batch(const std::vector<SampleRecord>& records) {
    std::vector<PartitionTree> out;
    out.reserve(records.size());
    for (const SampleRecord& r : records) out.push_back(predict(r.sb, QpValue(r.q)));
    return out;
  }
};

class HfcnPredictor : public PartitionPredictor {
 public:
  explicit HfcnPredictor(HfcnNet& net) : net_(&net) {}
  PartitionTree predict(const Superblock& sb, QpValue q) override {
    return predict_tree(*net_, sb, q);
  }
  std::vector<PartitionTree> predict_batch(const std::vector<SampleRecord>& records) override {
    return predict_trees(*net_, records);
  }

 private:
  HfcnNet* net_;
};

// Looks up precomputed search labels by (pixels, q); the benchmark's
// zero-error reference model.
class OraclePredictor : public PartitionPredictor {
 public:
  void add(const Superblock& sb, int q, const PartitionTree& tree);
  // Runs the partition search for every (superblock, qp) pair up front.
  void prime(const std::vector<Superblock>& sbs, const std::vector<int>& qp_set);
  PartitionTree predict(const Superblock& sb, QpValue q) override;  // RangeError on a miss

 private:
  std::unordered_map<std::uint64_t, PartitionTree> table_;
};

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

enum class BenchMode { kRdoBaseline, kHfcn, kHfcnRdoFallback };

BenchMode bench_mode_from_name(const std::string& name);  // ConfigError
std::string bench_mode_name(BenchMode mode);

struct SequenceInput {
  std::string name;
  std::vector<Frame> frames;
};

struct QpRun {
  int qp = 0;
  double rate = 0.0;
  double sse = 0.0;
  double psnr = 0.0;
  double seconds = 0.0;
};

struct SequenceRun {
  std::string sequence;
  int width = 0;
  int height = 0;
  BenchMode mode = BenchMode::kRdoBaseline;
  std::vector<QpRun> points;  // ascending by qp
  double total_seconds = 0.0;
  std::int64_t encodes = 0;
  std::int64_t inconsistent = 0;

  RdCurve curve() const;
  double inconsistency_rate() const {
    return encodes == 0 ? 0.0
                        : static_cast<double>(inconsistent) / static_cast<double>(encodes);
  }
};

// Encodes every superblock of every frame at every qp under one mode.
// Prediction time is part of the measured encode time; superblock extraction
// is not. The predictor is required for the two model-driven modes.
std::vector<SequenceRun> run_benchmark(const std::vector<SequenceInput>& sequences,
                                       const std::vector<int>& qp_set, BenchMode mode,
                                       PartitionPredictor* predictor);

struct SequenceSummary {
  std::string sequence;
  int width = 0;
  int height = 0;
  std::string mode;
  double delta_t_pct = 0.0;
  double bd_rate_pct = 0.0;
  double bd_psnr_db = 0.0;
  double inconsistency_rate = 0.0;
};

// Per-sequence Eq.-2 speedup over all qps plus BD metrics vs the baseline.
std::vector<SequenceSummary> summarize(const std::vector<SequenceRun>& baseline,
                                       const std::vector<SequenceRun>& test);

struct QpSpeedupRow {
  int qp = 0;
  double delta_t_pct = 0.0;
};

// Per-QP speedup aggregated over sequences, ascending by qp.
std::vector<QpSpeedupRow> speedup_vs_qp(const std::vector<SequenceRun>& baseline,
                                        const std::vector<SequenceRun>& test);

// ---------------------------------------------------------------------------
// Prediction quality
// ---------------------------------------------------------------------------

// Per-level percentage of matrix elements whose predicted class matches the
// label, over the whole set.
std::array<double, 4> accuracy_per_level(PartitionPredictor& predictor,
                                         const std::vector<SampleRecord>& records);

// Per-level accuracy of always answering the most frequent class.
std::array<double, 4> majority_baseline(const std::vector<SampleRecord>& records);

// Fraction of predicted trees that fail is_consistent.
double prediction_inconsistency(PartitionPredictor& predictor,
                                const std::vector<SampleRecord>& records);

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

void write_summary_csv(const std::vector<SequenceSummary>& rows, const std::string& path);
void write_speedup_csv(const std::vector<QpSpeedupRow>& rows, const std::string& path);
// Deterministic per-point results (no timings): sequence, mode, qp, rate, psnr.
void write_rd_curves_csv(const std::vector<SequenceRun>& runs, const std::string& path);
void write_accuracy_csv(const std::array<double, 4>& accuracy,
                        const std::array<double, 4>& baseline, double inconsistency,
                        const std::string& path);

}  // namespace partpredict

#endif
