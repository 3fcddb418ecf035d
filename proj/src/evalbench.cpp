#include "partpredict/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "partpredict/util.hpp"

namespace partpredict {

double speedup_percent(double t_baseline, double t_test) {
  if (!(t_baseline > 0.0)) {
    throw NonPositiveBaselineError("baseline time must be positive");
  }
  return (t_baseline - t_test) / t_baseline * 100.0;
}

double psnr_from_sse(double sse, std::int64_t pixel_count) {
  if (pixel_count <= 0) throw RangeError("pixel count must be positive");
  if (sse <= 0.0) return 99.0;
  const double psnr = 10.0 * std::log10(255.0 * 255.0 * static_cast<double>(pixel_count) / sse);
  return std::min(psnr, 99.0);
}

namespace {

// Least-squares polynomial fit in centered x. Falls back from cubic to linear
// when the normal equations are (near-)singular, e.g. repeated x values.
struct PolyFit {
  double x0 = 0.0;
  std::array<double, 4> coef{};  // c0 + c1 u + c2 u^2 + c3 u^3, u = x - x0
  int degree = 3;
};

bool solve_normal(const std::vector<double>& u, const std::vector<double>& y, int degree,
                  std::array<double, 4>& coef) {
  const int m = degree + 1;
  double a[4][5] = {};
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) s += std::pow(u[i], r + c);
      a[r][c] = s;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += std::pow(u[i], r) * y[i];
    a[r][m] = s;
  }
  for (int col = 0; col < m; ++col) {
    int pivot = col;
    for (int r = col + 1; r < m; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) < 1e-10) return false;
    for (int c = 0; c <= m; ++c) std::swap(a[col][c], a[pivot][c]);
    for (int r = 0; r < m; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c <= m; ++c) a[r][c] -= f * a[col][c];
    }
  }
  coef = {};
  for (int r = 0; r < m; ++r) coef[static_cast<std::size_t>(r)] = a[r][m] / a[r][r];
  return true;
}

PolyFit fit_poly(const std::vector<double>& xs, const std::vector<double>& ys) {
  PolyFit fit;
  double mean = 0.0;
  for (double x : xs) mean += x;
  fit.x0 = mean / static_cast<double>(xs.size());
  std::vector<double> u(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) u[i] = xs[i] - fit.x0;
  if (solve_normal(u, ys, 3, fit.coef)) {
    fit.degree = 3;
    return fit;
  }
  if (solve_normal(u, ys, 1, fit.coef)) {
    fit.degree = 1;
    return fit;
  }
  throw InsufficientPointsError("degenerate rate-distortion curve");
}

// Exact antiderivative of the fitted polynomial over [a, b].
double integrate(const PolyFit& f, double a, double b) {
  const double ua = a - f.x0, ub = b - f.x0;
  auto anti = [&f](double t) {
    return f.coef[0] * t + f.coef[1] * t * t / 2.0 + f.coef[2] * t * t * t / 3.0 +
           f.coef[3] * t * t * t * t / 4.0;
  };
  return anti(ub) - anti(ua);
}

struct BdAxes {
  std::vector<double> x, y;
  double lo = 0.0, hi = 0.0;
};

void validate_curve(const RdCurve& curve) {
  if (curve.points.size() < 4) {
    throw InsufficientPointsError("BD metrics need at least 4 points per curve");
  }
  for (const RdPoint& p : curve.points) {
    if (!(p.rate > 0.0)) throw RangeError("rates must be positive");
  }
}

double overlap_mean_diff(const std::vector<double>& ax, const std::vector<double>& ay,
                         const std::vector<double>& bx, const std::vector<double>& by) {
  const auto [a_lo, a_hi] = std::minmax_element(ax.begin(), ax.end());
  const auto [b_lo, b_hi] = std::minmax_element(bx.begin(), bx.end());
  const double lo = std::max(*a_lo, *b_lo);
  const double hi = std::min(*a_hi, *b_hi);
  if (!(hi > lo)) throw NoOverlapError("curves do not overlap");
  const PolyFit fa = fit_poly(ax, ay);
  const PolyFit fb = fit_poly(bx, by);
  return (integrate(fb, lo, hi) - integrate(fa, lo, hi)) / (hi - lo);
}

}  // namespace

double bd_rate(const RdCurve& anchor, const RdCurve& test) {
  validate_curve(anchor);
  validate_curve(test);
  std::vector<double> ax, ay, bx, by;
  for (const RdPoint& p : anchor.points) {
    ax.push_back(p.quality);
    ay.push_back(std::log10(p.rate));
  }
  for (const RdPoint& p : test.points) {
    bx.push_back(p.quality);
    by.push_back(std::log10(p.rate));
  }
  const double diff = overlap_mean_diff(ax, ay, bx, by);
  return (std::pow(10.0, diff) - 1.0) * 100.0;
}

double bd_psnr(const RdCurve& anchor, const RdCurve& test) {
  validate_curve(anchor);
  validate_curve(test);
  std::vector<double> ax, ay, bx, by;
  for (const RdPoint& p : anchor.points) {
    ax.push_back(std::log10(p.rate));
    ay.push_back(p.quality);
  }
  for (const RdPoint& p : test.points) {
    bx.push_back(std::log10(p.rate));
    by.push_back(p.quality);
  }
  return overlap_mean_diff(ax, ay, bx, by);
}

// ---------------------------------------------------------------------------
// Oracle predictor
// ---------------------------------------------------------------------------

namespace {

std::uint64_t oracle_key(const Superblock& sb, int q) {
  // FNV-1a over the pixels, mixed with q.
  std::uint64_t h = 1469598103934665603ull;
  for (std::uint8_t p : sb.px) {
    h ^= p;
    h *= 1099511628211ull;
  }
  h ^= static_cast<std::uint64_t>(q);
  h *= 1099511628211ull;
  return h;
}

}  // namespace

void OraclePredictor::add(const Superblock& sb, int q, const PartitionTree& tree) {
  table_[oracle_key(sb, q)] = tree;
}

void OraclePredictor::prime(const std::vector<Superblock>& sbs, const std::vector<int>& qp_set) {
  for (const Superblock& sb : sbs) {
    for (int q : qp_set) add(sb, q, rdo_search(sb, QpValue(q)).tree);
  }
}

PartitionTree OraclePredictor::predict(const Superblock& sb, QpValue q) {
  const auto it = table_.find(oracle_key(sb, q.value()));
  if (it == table_.end()) throw RangeError("oracle predictor has no entry for this block");
  return it->second;
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

BenchMode bench_mode_from_name(const std::string& name) {
  if (name == "rdo_baseline") return BenchMode::kRdoBaseline;
  if (name == "hfcn") return BenchMode::kHfcn;
  if (name == "hfcn_rdo_fallback") return BenchMode::kHfcnRdoFallback;
  throw ConfigError("unknown benchmark mode '" + name + "'");
}

std::string bench_mode_name(BenchMode mode) {
  switch (mode) {
    case BenchMode::kRdoBaseline: return "rdo_baseline";
    case BenchMode::kHfcn: return "hfcn";
    case BenchMode::kHfcnRdoFallback: return "hfcn_rdo_fallback";
  }
  return "rdo_baseline";
}

RdCurve SequenceRun::curve() const {
  RdCurve c;
  for (const QpRun& p : points) c.points.push_back({p.rate, p.psnr});
  return c;
}

std::vector<SequenceRun> run_benchmark(const std::vector<SequenceInput>& sequences,
                                       const std::vector<int>& qp_set, BenchMode mode,
                                       PartitionPredictor* predictor) {
  if (sequences.empty()) throw InsufficientDataError("no sequences to benchmark");
  if (qp_set.empty()) throw InsufficientDataError("empty qp set");
  if (mode != BenchMode::kRdoBaseline && predictor == nullptr) {
    throw ConfigError(bench_mode_name(mode) + " requires a predictor");
  }
  std::vector<int> qps = qp_set;
  std::sort(qps.begin(), qps.end());

  std::vector<SequenceRun> runs;
  for (const SequenceInput& seq : sequences) {
    if (seq.frames.empty()) throw InsufficientDataError("sequence '" + seq.name + "' has no frames");
    SequenceRun run;
    run.sequence = seq.name;
    run.width = seq.frames.front().width;
    run.height = seq.frames.front().height;
    run.mode = mode;

    std::vector<Superblock> sbs;
    for (const Frame& f : seq.frames) {
      const auto blocks = extract_superblocks(f);
      sbs.insert(sbs.end(), blocks.begin(), blocks.end());
    }
    const std::int64_t pixels =
        static_cast<std::int64_t>(sbs.size()) * kSuperblockPixels;

    for (int qp : qps) {
      const QpValue q(qp);
      QpRun point;
      point.qp = qp;
      Stopwatch watch;
      for (const Superblock& sb : sbs) {
        EncodeResult r;
        switch (mode) {
          case BenchMode::kRdoBaseline:
            r = rdo_search(sb, q);
            break;
          case BenchMode::kHfcn: {
            const PartitionTree raw = predictor->predict(sb, q);
            run.inconsistent += !is_consistent(raw);
            r = encode_with_tree(sb, q, correct_top_down(raw));
            break;
          }
          case BenchMode::kHfcnRdoFallback: {
            const PartitionTree raw = predictor->predict(sb, q);
            if (is_consistent(raw)) {
              r = encode_with_tree(sb, q, raw);
            } else {
              ++run.inconsistent;
              r = rdo_search(sb, q);
            }
            break;
          }
        }
        point.rate += r.total_rate;
        point.sse += r.total_distortion;
        ++run.encodes;
      }
      point.seconds = watch.seconds();
      point.psnr = psnr_from_sse(point.sse, pixels);
      run.total_seconds += point.seconds;
      run.points.push_back(point);
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

std::vector<SequenceSummary> summarize(const std::vector<SequenceRun>& baseline,
                                       const std::vector<SequenceRun>& test) {
  if (baseline.size() != test.size()) {
    throw InsufficientDataError("baseline and test cover different sequences");
  }
  std::vector<SequenceSummary> rows;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const SequenceRun& b = baseline[i];
    const SequenceRun& t = test[i];
    if (b.sequence != t.sequence || b.points.size() != t.points.size()) {
      throw InsufficientDataError("mismatched benchmark runs for '" + t.sequence + "'");
    }
    for (std::size_t k = 0; k < b.points.size(); ++k) {
      if (b.points[k].qp != t.points[k].qp) {
        throw InsufficientDataError("qp sets differ between modes");
      }
    }
    SequenceSummary row;
    row.sequence = t.sequence;
    row.width = t.width;
    row.height = t.height;
    row.mode = bench_mode_name(t.mode);
    row.delta_t_pct = speedup_percent(b.total_seconds, t.total_seconds);
    // Curves of a badly mispredicting model may not reach the baseline's
    // quality range at all; report NaN for that sequence instead of dying.
    try {
      row.bd_rate_pct = bd_rate(b.curve(), t.curve());
      row.bd_psnr_db = bd_psnr(b.curve(), t.curve());
    } catch (const NoOverlapError&) {
      row.bd_rate_pct = std::numeric_limits<double>::quiet_NaN();
      row.bd_psnr_db = std::numeric_limits<double>::quiet_NaN();
    }
    row.inconsistency_rate = t.inconsistency_rate();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<QpSpeedupRow> speedup_vs_qp(const std::vector<SequenceRun>& baseline,
                                        const std::vector<SequenceRun>& test) {
  if (baseline.empty() || baseline.size() != test.size()) {
    throw InsufficientDataError("need matching baseline and test runs");
  }
  const std::size_t qp_count = baseline.front().points.size();
  if (qp_count < 2) throw InsufficientDataError("need at least two qp values");
  std::vector<QpSpeedupRow> rows;
  for (std::size_t k = 0; k < qp_count; ++k) {
    double tb = 0.0, tt = 0.0;
    const int qp = baseline.front().points[k].qp;
    for (std::size_t i = 0; i < baseline.size(); ++i) {
      if (baseline[i].points.size() != qp_count || test[i].points.size() != qp_count ||
          baseline[i].points[k].qp != qp || test[i].points[k].qp != qp) {
        throw InsufficientDataError("qp sets differ across runs");
      }
      tb += baseline[i].points[k].seconds;
      tt += test[i].points[k].seconds;
    }
    rows.push_back({qp, speedup_percent(tb, tt)});
  }
  std::sort(rows.begin(), rows.end(),
            [](const QpSpeedupRow& a, const QpSpeedupRow& b) { return a.qp < b.qp; });
  return rows;
}

// ---------------------------------------------------------------------------
// Prediction quality
// ---------------------------------------------------------------------------

std::array<double, 4> accuracy_per_level(PartitionPredictor& predictor,
                                         const std::vector<SampleRecord>& records) {
  if (records.empty()) throw EmptyDatasetError("no records to evaluate");
  const std::vector<PartitionTree> trees = predictor.predict_batch(records);
  std::array<double, 4> accuracy{};
  for (int level = 0; level < 4; ++level) {
    const int dim = PartitionTree::level_dim(level);
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) {
          hits += trees[i].at(level, r, c) == records[i].labels.at(level, r, c);
        }
      }
    }
    accuracy[static_cast<std::size_t>(level)] =
        100.0 * static_cast<double>(hits) /
        (static_cast<double>(records.size()) * dim * dim);
  }
  return accuracy;
}

std::array<double, 4> majority_baseline(const std::vector<SampleRecord>& records) {
  if (records.empty()) throw EmptyDatasetError("no records to evaluate");
  std::array<double, 4> out{};
  for (int level = 0; level < 4; ++level) {
    const int dim = PartitionTree::level_dim(level);
    std::array<std::int64_t, 4> counts{};
    for (const SampleRecord& rec : records) {
      for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) {
          ++counts[static_cast<std::size_t>(rec.labels.at(level, r, c))];
        }
      }
    }
    const std::int64_t best = *std::max_element(counts.begin(), counts.end());
    out[static_cast<std::size_t>(level)] =
        100.0 * static_cast<double>(best) /
        (static_cast<double>(records.size()) * dim * dim);
  }
  return out;
}

double prediction_inconsistency(PartitionPredictor& predictor,
                                const std::vector<SampleRecord>& records) {
  if (records.empty()) throw EmptyDatasetError("no records to evaluate");
  const std::vector<PartitionTree> trees = predictor.predict_batch(records);
  std::int64_t bad = 0;
  for (const PartitionTree& t : trees) bad += !is_consistent(t);
  return static_cast<double>(bad) / static_cast<double>(trees.size());
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

namespace {

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

}  // namespace

void write_summary_csv(const std::vector<SequenceSummary>& rows, const std::string& path) {
  auto out = open_csv(path);
  out << "sequence,resolution,mode,delta_t_pct,bd_rate_pct,bd_psnr_db,inconsistency_rate\n";
  char line[256];
  for (const SequenceSummary& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%dx%d,%s,%.2f,%.4f,%.4f,%.4f\n",
                  r.sequence.c_str(), r.width, r.height, r.mode.c_str(), r.delta_t_pct,
                  r.bd_rate_pct, r.bd_psnr_db, r.inconsistency_rate);
    out << line;
  }
}

void write_speedup_csv(const std::vector<QpSpeedupRow>& rows, const std::string& path) {
  auto out = open_csv(path);
  out << "qp,delta_t_pct\n";
  char line[64];
  for (const QpSpeedupRow& r : rows) {
    std::snprintf(line, sizeof(line), "%d,%.2f\n", r.qp, r.delta_t_pct);
    out << line;
  }
}

void write_rd_curves_csv(const std::vector<SequenceRun>& runs, const std::string& path) {
  auto out = open_csv(path);
  out << "sequence,mode,qp,rate,psnr\n";
  char line[256];
  for (const SequenceRun& run : runs) {
    for (const QpRun& p : run.points) {
      std::snprintf(line, sizeof(line), "%s,%s,%d,%.4f,%.6f\n", run.sequence.c_str(),
                    bench_mode_name(run.mode).c_str(), p.qp, p.rate, p.psnr);
      out << line;
    }
  }
}

void write_accuracy_csv(const std::array<double, 4>& accuracy,
                        const std::array<double, 4>& baseline, double inconsistency,
                        const std::string& path) {
  auto out = open_csv(path);
  out << "level,accuracy_pct,majority_baseline_pct\n";
  char line[96];
  for (int level = 0; level < 4; ++level) {
    std::snprintf(line, sizeof(line), "%d,%.2f,%.2f\n", level,
                  accuracy[static_cast<std::size_t>(level)],
                  baseline[static_cast<std::size_t>(level)]);
    out << line;
  }
  std::snprintf(line, sizeof(line), "inconsistency_rate,%.4f,\n", inconsistency);
  out << line;
}

}  // namespace partpredict
