// Acceptance suite: one check per numbered criterion, each printing a single
// [PASS]/[FAIL] line with the measured values. Run with no arguments for the
// whole suite or with a criterion number for one check.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "partpredict/content.hpp"
#include "partpredict/dataset.hpp"
#include "partpredict/evalbench.hpp"
#include "partpredict/hfcn.hpp"
#include "partpredict/parttree.hpp"
#include "partpredict/rdosim.hpp"
#include "partpredict/util.hpp"

#include "bf_oracle.hpp"

using namespace partpredict;

namespace {

bool report(int criterion, bool ok, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, what.c_str());
  std::fflush(stdout);
  return ok;
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

Superblock random_sb(std::uint64_t seed, int lo = 0, int hi = 255) {
  Rng rng(seed);
  Superblock sb;
  for (auto& p : sb.px) p = static_cast<std::uint8_t>(rng.uniform_int(lo, hi));
  return sb;
}

Superblock smooth_sb(std::uint64_t seed) {
  Rng rng(seed);
  Superblock sb;
  const double base = rng.uniform(60.0, 200.0);
  const double gx = rng.uniform(-0.8, 0.8);
  const double gy = rng.uniform(-0.8, 0.8);
  const double noise = rng.uniform(0.0, 24.0);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const double v = base + gx * x + gy * y + noise * (rng.uniform() - 0.5);
      sb.at(y, x) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
    }
  }
  return sb;
}

// --------------------------------------------------------------------------
// 1. Tree algebra over fuzzed trees
// --------------------------------------------------------------------------
bool criterion_1() {
  Stopwatch watch;
  const std::array<std::array<double, 4>, 3> dists{{{0.25, 0.25, 0.25, 0.25},
                                                    {0.55, 0.15, 0.15, 0.15},
                                                    {0.1, 0.2, 0.2, 0.5}}};
  for (std::uint64_t i = 0; i < 100000; ++i) {
    const PartitionTree t = random_tree(i, dists[i % dists.size()]);
    const PartitionTree fixed = correct_top_down(t);
    if (!is_consistent(fixed)) return report(1, false, "corrected tree not consistent");
    if (!(correct_top_down(fixed) == fixed)) return report(1, false, "correction not idempotent");
    if (fixed.m3 != t.m3) return report(1, false, "root element was altered");
  }
  const double secs = watch.seconds();
  return report(1, secs < 10.0,
                fmt("tree algebra on 1e5 fuzzed trees: consistent, idempotent, root "
                    "untouched (%.2f s, limit 10 s)",
                    secs));
}

// --------------------------------------------------------------------------
// 2. Search cost equals brute-force enumeration exactly
// --------------------------------------------------------------------------
bool criterion_2() {
  Stopwatch watch;
  const auto trees = testing::enumerate_trees(16);
  if (trees.size() != 259) return report(2, false, "enumerator does not yield 259 trees");
  int exact = 0;
  const int total = 120;
  for (int i = 0; i < total; ++i) {
    const std::uint64_t seed = 900 + static_cast<std::uint64_t>(i);
    const Superblock sb = i % 2 ? random_sb(seed, 20, 235) : smooth_sb(seed);
    Rng rng(seed);
    const QpValue q(static_cast<int>(rng.uniform_int(8, 105)));
    const int row = static_cast<int>(rng.uniform_int(0, 3)) * 16;
    const int col = static_cast<int>(rng.uniform_int(0, 3)) * 16;
    double best = 1e300;
    for (const auto& t : trees) {
      best = std::min(best, testing::bf_cost(t, sb, q, row, col, 16));
    }
    exact += rdo_search_sub(sb, q, row, col, 16).cost == best;
  }
  const double secs = watch.seconds();
  return report(2, exact == total && secs < 60.0,
                fmt("search vs brute force on %d random 16x16 sub-problems: %d exact "
                    "matches (%.2f s, limit 60 s)",
                    total, exact, secs));
}

// --------------------------------------------------------------------------
// 3. Loss value and finite-difference gradients for every layer type
// --------------------------------------------------------------------------
double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

double central_diff(const std::function<double()>& eval, double& slot, double h) {
  const double orig = slot;
  slot = orig + h;
  const double up = eval();
  slot = orig - h;
  const double down = eval();
  slot = orig;
  return (up - down) / (2.0 * h);
}

// h=1e-5 first; if the h and h/10 slopes disagree the interval straddles a
// relu/argmax kink and the window shrinks until the estimate is stable.
double central_diff_stable(const std::function<double()>& eval, double& slot) {
  double h = 1e-5;
  double fd = central_diff(eval, slot, h);
  for (int i = 0; i < 2; ++i) {
    const double finer = central_diff(eval, slot, h / 10.0);
    if (rel_err(fd, finer) < 1e-3) return fd;
    h /= 10.0;
    fd = finer;
  }
  return fd;
}

// Strict variant for sampled whole-network checks: an estimate counts only
// when two step sizes agree tightly, otherwise the slot is unmeasurable by
// finite differences (kink inside the window, or gradient below the rounding
// floor) and the caller samples another parameter. A wrong analytic gradient
// cannot hide this way: a genuinely wrong value faces a stable estimate.
bool central_diff_strict(const std::function<double()>& eval, double& slot, double* out) {
  const double fd5 = central_diff(eval, slot, 1e-5);
  const double fd6 = central_diff(eval, slot, 1e-6);
  if (rel_err(fd5, fd6) < 1e-5) {
    *out = fd5;
    return true;
  }
  const double fd7 = central_diff(eval, slot, 1e-7);
  if (rel_err(fd6, fd7) < 5e-5) {
    *out = fd6;
    return true;
  }
  return false;
}

template <typename Layer>
double layer_worst_fd_error(Layer& layer, Tensor<double> x,
                            std::vector<ParamTensor<double>*> params, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> y0 = layer.forward(x, true);
  Tensor<double> proj(y0.n, y0.c, y0.h, y0.w);
  for (auto& v : proj.v) v = rng.uniform(-1.0, 1.0);
  const auto eval = [&]() {
    const Tensor<double> y = layer.forward(x, true);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += proj.v[i] * y.v[i];
    return acc;
  };
  for (auto* p : params) p->zero_grad();
  layer.forward(x, true);
  const Tensor<double> dx = layer.backward(proj);

  double worst = 0.0;
  for (auto* p : params) {
    for (std::size_t j = 0; j < p->w.size(); ++j) {
      worst = std::max(worst, rel_err(p->g[j], central_diff_stable(eval, p->w[j])));
    }
  }
  layer.forward(x, true);
  const std::size_t stride = std::max<std::size_t>(1, x.v.size() / 48);
  for (std::size_t j = 0; j < x.v.size(); j += stride) {
    worst = std::max(worst, rel_err(dx.v[j], central_diff_stable(eval, x.v[j])));
  }
  return worst;
}

bool criterion_3() {
  Stopwatch watch;

  // Loss of uniform predictions.
  LevelTensors<double> uniform;
  for (int level = 0; level < 4; ++level) {
    const int dim = kLevelDims[static_cast<std::size_t>(level)];
    Tensor<double> p(2, 4, dim, dim);
    std::fill(p.v.begin(), p.v.end(), 0.25);
    uniform[static_cast<std::size_t>(level)] = std::move(p);
  }
  const LabelBatch labels = LabelBatch::from_trees(
      {PartitionTree{}, correct_top_down(random_tree(1, {0.25, 0.25, 0.25, 0.25}))});
  const double uniform_loss = cross_entropy_sum(uniform, labels);
  const double expect = 85.0 * std::log(4.0);
  if (std::abs(uniform_loss - expect) > 1e-3 || std::abs(uniform_loss - 117.8350) > 1e-3) {
    return report(3, false, fmt("uniform loss %.6f != 117.8350", uniform_loss));
  }

  double worst = 0.0;
  Rng wr(40);
  {
    Conv2d<double> conv("c3", 3, 4, 3, 1, 1);
    for (auto& v : conv.weight.w) v = wr.uniform(-0.5, 0.5);
    Tensor<double> x(2, 3, 6, 6);
    for (auto& v : x.v) v = wr.uniform(-1.0, 1.0);
    worst = std::max(worst, layer_worst_fd_error(conv, x, {&conv.weight, &conv.bias}, 41));
  }
  {
    Conv2d<double> conv("c4", 3, 5, 4, 4, 0);
    for (auto& v : conv.weight.w) v = wr.uniform(-0.5, 0.5);
    Tensor<double> x(2, 3, 8, 8);
    for (auto& v : x.v) v = wr.uniform(-1.0, 1.0);
    worst = std::max(worst, layer_worst_fd_error(conv, x, {&conv.weight, &conv.bias}, 42));
  }
  {
    Conv2d<double> conv("c1", 5, 3, 1, 1, 0);
    for (auto& v : conv.weight.w) v = wr.uniform(-0.5, 0.5);
    Tensor<double> x(2, 5, 4, 4);
    for (auto& v : x.v) v = wr.uniform(-1.0, 1.0);
    worst = std::max(worst, layer_worst_fd_error(conv, x, {&conv.weight, &conv.bias}, 43));
  }
  {
    BatchNorm2d<double> bn("bn", 4);
    for (auto& v : bn.gamma.w) v = wr.uniform(0.5, 1.5);
    for (auto& v : bn.beta.w) v = wr.uniform(-0.5, 0.5);
    Tensor<double> x(3, 4, 5, 5);
    for (auto& v : x.v) v = wr.uniform(-1.0, 1.0);
    worst = std::max(worst, layer_worst_fd_error(bn, x, {&bn.gamma, &bn.beta}, 44));
  }
  {
    Relu<double> relu;
    Tensor<double> x(2, 3, 4, 4);
    for (auto& v : x.v) {
      v = wr.uniform(-1.0, 1.0);
      if (std::abs(v) < 0.01) v = 0.05;
    }
    worst = std::max(worst, layer_worst_fd_error(relu, x, {}, 45));
  }
  {
    MaxPool2x2<double> pool;
    Tensor<double> x(2, 2, 4, 4);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      x.v[i] = static_cast<double>(i % 7) + 0.1 * wr.uniform();
    }
    worst = std::max(worst, layer_worst_fd_error(pool, x, {}, 46));
  }
  {
    // softmax + cross-entropy head
    Tensor<double> logits(2, 4, 2, 2);
    for (auto& v : logits.v) v = wr.uniform(-1.0, 1.0);
    LabelBatch lab;
    for (int level = 0; level < 4; ++level) {
      const int dim = kLevelDims[static_cast<std::size_t>(level)];
      lab.cls[static_cast<std::size_t>(level)].assign(2 * static_cast<std::size_t>(dim) * dim,
                                                      0);
    }
    for (auto& c : lab.cls[2]) c = static_cast<std::uint8_t>(wr.uniform_int(0, 3));
    const auto eval = [&]() {
      LevelTensors<double> probs;
      probs[2] = channel_softmax(logits);
      for (int level : {0, 1, 3}) {
        const int dim = kLevelDims[static_cast<std::size_t>(level)];
        Tensor<double> u(2, 4, dim, dim);
        std::fill(u.v.begin(), u.v.end(), 0.25);
        probs[static_cast<std::size_t>(level)] = std::move(u);
      }
      return cross_entropy_sum(probs, lab);
    };
    LevelTensors<double> probs;
    probs[2] = channel_softmax(logits);
    for (int level : {0, 1, 3}) {
      const int dim = kLevelDims[static_cast<std::size_t>(level)];
      Tensor<double> u(2, 4, dim, dim);
      std::fill(u.v.begin(), u.v.end(), 0.25);
      probs[static_cast<std::size_t>(level)] = std::move(u);
    }
    const LevelTensors<double> dlogits = cross_entropy_grad(probs, lab);
    for (std::size_t j = 0; j < logits.v.size(); ++j) {
      worst = std::max(worst, rel_err(dlogits[2].v[j], central_diff_stable(eval, logits.v[j])));
    }
  }
  {
    // whole network, 50 random parameters
    ArchSpec arch;
    arch.trunk_widths = {2, 2, 3, 3, 3, 3, 4, 4};
    arch.branch_first_widths = {3, 3, 3, 3};
    arch.branch_mid_widths = {4, 4, 4, 4};
    HfcnNetT<double> net(arch);
    net.init(47);
    Tensor<double> x(2, 1, 64, 64);
    Rng rx(48);
    for (auto& v : x.v) v = rx.uniform(0.0, 1.0);
    const std::vector<double> qn{15.0 / 255.0, 99.0 / 255.0};
    const LabelBatch lab = LabelBatch::from_trees(
        {correct_top_down(random_tree(49, {0.25, 0.25, 0.25, 0.25})),
         correct_top_down(random_tree(50, {0.25, 0.25, 0.25, 0.25}))});
    const auto eval = [&]() { return cross_entropy_sum(net.forward(x, qn, true), lab); };
    net.zero_grad();
    net.backward(cross_entropy_grad(net.forward(x, qn, true), lab));
    auto params = net.params();
    std::vector<std::vector<double>> analytic;
    for (auto* p : params) analytic.push_back(p->g);
    Rng rng(51);
    int accepted = 0, attempts = 0;
    while (accepted < 50 && attempts < 250) {
      ++attempts;
      const std::size_t pi = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(params.size()) - 1));
      const std::size_t j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(params[pi]->w.size()) - 1));
      double fd = 0.0;
      if (!central_diff_strict(eval, params[pi]->w[j], &fd)) continue;
      if (std::abs(analytic[pi][j]) < 1e-4 && std::abs(fd) < 1e-4) {
        ++accepted;
        continue;
      }
      worst = std::max(worst, rel_err(analytic[pi][j], fd));
      ++accepted;
    }
    if (accepted < 50) return report(3, false, "too few measurable parameters for the FD check");
  }

  const double secs = watch.seconds();
  return report(3, worst < 1e-4 && secs < 300.0,
                fmt("uniform loss %.4f = 85 ln 4; worst FD gradient error %.3g over all "
                    "layer types (tolerance 1e-4; %.1f s, limit 300 s)",
                    uniform_loss, worst, secs));
}

// --------------------------------------------------------------------------
// 4. Learning signal on simulator-labeled procedural data
// --------------------------------------------------------------------------
bool criterion_4() {
  Stopwatch watch;
  std::vector<Frame> frames;
  for (std::uint64_t i = 0; i < 16; ++i) {
    frames.push_back(make_frame(ContentKind::kMixed, 512, 512, 7000 + i));
  }
  GenerateOptions options;
  options.sampler = QSampler::fixed_set({15, 31, 47, 70, 99});
  options.q_per_superblock = 5;
  options.seed = 71;
  auto records = generate_records(frames, options);
  if (records.size() < 5000) return report(4, false, "dataset too small");
  Rng shuffle_rng(72);
  shuffle_rng.shuffle(records);
  const std::size_t val_count = 512;
  std::vector<SampleRecord> val(records.end() - val_count, records.end());
  records.resize(records.size() - val_count);
  std::printf("  criterion 4: %zu train / %zu val records (%.1f s to label)\n",
              records.size(), val.size(), watch.seconds());

  HfcnNet net((ArchSpec()));
  net.init(73);
  const auto baseline = majority_baseline(val);
  HfcnPredictor predictor(net);

  TrainHyper hyper;
  hyper.batch_size = 128;
  hyper.learning_rate = 1e-3;
  hyper.seed = 74;
  hyper.val_interval = 0;

  int steps_done = 0;
  std::array<double, 4> accuracy{};
  bool met = false;
  while (steps_done < 8000 && !met) {
    hyper.steps = 500;
    train(net, records, {}, hyper);
    steps_done += 500;
    accuracy = accuracy_per_level(predictor, val);
    met = true;
    for (int level = 0; level < 4; ++level) {
      met = met && accuracy[static_cast<std::size_t>(level)] >=
                       baseline[static_cast<std::size_t>(level)] + 5.0;
    }
    std::printf("  criterion 4: step %5d  acc %.1f/%.1f/%.1f/%.1f  (majority %.1f/%.1f/%.1f/%.1f)\n",
                steps_done, accuracy[0], accuracy[1], accuracy[2], accuracy[3], baseline[0],
                baseline[1], baseline[2], baseline[3]);
    std::fflush(stdout);
  }
  const double inconsistency = prediction_inconsistency(predictor, val);
  const double secs = watch.seconds();
  return report(
      4, met && steps_done <= 20000 && secs < 1800.0,
      fmt("validation accuracy %.1f/%.1f/%.1f/%.1f%% vs majority +5pp "
          "%.1f/%.1f/%.1f/%.1f%% after %d steps; inconsistent trees %.2f%% "
          "(%.0f s, limit 1800 s)",
          accuracy[0], accuracy[1], accuracy[2], accuracy[3], baseline[0] + 5.0,
          baseline[1] + 5.0, baseline[2] + 5.0, baseline[3] + 5.0, steps_done,
          100.0 * inconsistency, secs));
}

// --------------------------------------------------------------------------
// 5. End-to-end speedup of predicted partitions over the search
// --------------------------------------------------------------------------
bool criterion_5() {
  Stopwatch watch;
  std::vector<SequenceInput> seqs;
  const ContentKind kinds[] = {ContentKind::kMixed, ContentKind::kGradient, ContentKind::kEdges};
  for (int i = 0; i < 3; ++i) {
    SequenceInput s;
    s.name = content_kind_name(kinds[i]) + std::to_string(i);
    s.frames = make_sequence(kinds[i], 256, 128, 2, 8100 + static_cast<std::uint64_t>(i));
    seqs.push_back(std::move(s));
  }
  const std::vector<int> qps{15, 31, 47, 70, 99};

  // Inference cost does not depend on training, so an initialized model
  // measures the same speedup; its argmax maps are also spatially varied,
  // which keeps the fallback path exercised with inconsistent trees.
  HfcnNet net((ArchSpec()));
  net.init(81);
  HfcnPredictor predictor(net);

  auto total_time = [](const std::vector<SequenceRun>& runs) {
    double t = 0.0;
    for (const auto& r : runs) t += r.total_seconds;
    return t;
  };

  std::vector<double> dt_hfcn_reps, dt_fallback_reps;
  std::int64_t inconsistent = 0, encodes = 0;
  for (int rep = 0; rep < 3; ++rep) {
    const auto base = run_benchmark(seqs, qps, BenchMode::kRdoBaseline, nullptr);
    const auto hfcn = run_benchmark(seqs, qps, BenchMode::kHfcn, &predictor);
    const auto fb = run_benchmark(seqs, qps, BenchMode::kHfcnRdoFallback, &predictor);
    dt_hfcn_reps.push_back(speedup_percent(total_time(base), total_time(hfcn)));
    dt_fallback_reps.push_back(speedup_percent(total_time(base), total_time(fb)));
    if (rep == 0) {
      for (const auto& r : hfcn) {
        inconsistent += r.inconsistent;
        encodes += r.encodes;
      }
    }
  }
  const double dt_hfcn = median(dt_hfcn_reps);
  const double dt_fallback = median(dt_fallback_reps);
  const double secs = watch.seconds();
  const bool ok = dt_hfcn >= 30.0 && dt_fallback <= dt_hfcn && secs < 900.0;
  return report(5, ok,
                fmt("median-of-3 speedup: hfcn %.1f%% (need >= 30%%), fallback %.1f%% "
                    "(need <= hfcn); inconsistent predictions %lld/%lld (%.0f s, limit 900 s)",
                    dt_hfcn, dt_fallback, static_cast<long long>(inconsistent),
                    static_cast<long long>(encodes), secs));
}

// --------------------------------------------------------------------------
// 6. Label-oracle model: zero bd-rate and positive speedup
// --------------------------------------------------------------------------
bool criterion_6() {
  std::vector<SequenceInput> seqs;
  SequenceInput s;
  s.name = "mixed";
  s.frames = make_sequence(ContentKind::kMixed, 192, 128, 2, 8200);
  seqs.push_back(std::move(s));
  const std::vector<int> qps{15, 31, 47, 70, 99};

  OraclePredictor oracle;
  std::vector<Superblock> sbs;
  for (const Frame& f : seqs[0].frames) {
    const auto blocks = extract_superblocks(f);
    sbs.insert(sbs.end(), blocks.begin(), blocks.end());
  }
  oracle.prime(sbs, qps);

  const auto base = run_benchmark(seqs, qps, BenchMode::kRdoBaseline, nullptr);
  const auto hfcn = run_benchmark(seqs, qps, BenchMode::kHfcn, &oracle);
  const auto rows = summarize(base, hfcn);
  bool ok = true;
  double worst_bd = 0.0, dt = 0.0;
  for (const auto& row : rows) {
    worst_bd = std::max(worst_bd, std::abs(row.bd_rate_pct));
    dt = row.delta_t_pct;
    ok = ok && std::abs(row.bd_rate_pct) <= 1e-9 && row.delta_t_pct > 0.0;
  }
  return report(6, ok,
                fmt("oracle-model benchmark: |bd-rate| %.2g (tolerance 1e-9), speedup "
                    "%.1f%% > 0",
                    worst_bd, dt));
}

// --------------------------------------------------------------------------
// 7. BD metric exactness on synthetic curves
// --------------------------------------------------------------------------
bool criterion_7() {
  const RdCurve a{{{12000.0, 34.2}, {8200.0, 32.9}, {5100.0, 31.1}, {2600.0, 28.4},
                   {1400.0, 26.0}}};
  RdCurve scaled = a;
  for (auto& p : scaled.points) p.rate *= 1.05;
  RdCurve lifted = a;
  for (auto& p : lifted.points) p.quality += 0.5;

  const double self = bd_rate(a, a);
  const double shift = bd_rate(a, scaled);
  const double lift = bd_psnr(a, lifted);
  const bool ok = std::abs(self) <= 1e-9 && std::abs(shift - 5.0) <= 1e-6 &&
                  std::abs(lift - 0.5) <= 1e-6;
  return report(7, ok,
                fmt("bd_rate(a,a)=%.2g (<=1e-9); rate*1.05 -> %+.7f%% (5 +- 1e-6); "
                    "quality+0.5dB -> %+.7f dB (0.5 +- 1e-6)",
                    self, shift, lift));
}

// --------------------------------------------------------------------------
// 8. Parameter budget of the default architecture
// --------------------------------------------------------------------------
bool criterion_8() {
  const ArchSpec def{};
  const std::int64_t params = param_count(def);
  const std::int64_t flops = flop_count(def);
  HfcnNet net(def);
  const bool ok = params >= 15000 && params <= 40000 && params == net.trainable_param_count();
  return report(8, ok,
                fmt("default architecture: %lld trainable parameters (budget 15000..40000, "
                    "reference design point 26336), %lld flops/sample",
                    static_cast<long long>(params), static_cast<long long>(flops)));
}

// --------------------------------------------------------------------------
// 9. File formats: bit-exact round trips, typed errors under corruption
// --------------------------------------------------------------------------
bool criterion_9() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "partpredict_acceptance";
  fs::create_directories(dir);

  auto read_bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>{std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>()};
  };
  auto write_bytes = [](const fs::path& p, const std::vector<char>& bytes) {
    std::ofstream(p, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };

  // Round trips over >= 1e4 arbitrary valid records.
  std::vector<SampleRecord> records(10000);
  Rng rng(91);
  for (auto& rec : records) {
    for (auto& p : rec.sb.px) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    rec.q = static_cast<int>(rng.uniform_int(8, 105));
    rec.labels =
        canonicalize(correct_top_down(random_tree(rng.next_u64(), {0.25, 0.25, 0.25, 0.25})));
  }
  const fs::path ds_a = dir / "ds_a.bin", ds_b = dir / "ds_b.bin";
  write_dataset(records, ds_a.string());
  write_dataset(load_all(ds_a.string()), ds_b.string());
  if (read_bytes(ds_a) != read_bytes(ds_b) || !(load_all(ds_a.string()) == records)) {
    return report(9, false, "dataset round trip is not bit-exact");
  }
  // a smaller file keeps the corruption fuzz below fast
  records.resize(32);
  write_dataset(records, ds_a.string());

  ArchSpec tiny;
  tiny.trunk_widths = {3, 3, 4, 4, 5, 5, 6, 6};
  tiny.branch_first_widths = {4, 4, 5, 5};
  tiny.branch_mid_widths = {6, 6, 7, 8};
  HfcnNet net(tiny);
  net.init(92);
  const fs::path wt_a = dir / "wt_a.bin", wt_b = dir / "wt_b.bin";
  save_weights(net, wt_a.string());
  HfcnNet loaded = load_weights(wt_a.string());
  save_weights(loaded, wt_b.string());
  if (read_bytes(wt_a) != read_bytes(wt_b)) {
    return report(9, false, "weight file round trip is not bit-exact");
  }

  // Corruption fuzz: every failure must be a typed library error.
  int cases = 0, typed = 0, loaded_ok = 0;
  const auto ds_bytes = read_bytes(ds_a);
  const auto wt_bytes = read_bytes(wt_a);
  Rng fuzz(93);
  const fs::path mangled = dir / "mangled.bin";
  auto attempt = [&](const std::vector<char>& bytes, bool is_dataset) {
    write_bytes(mangled, bytes);
    ++cases;
    try {
      if (is_dataset) {
        load_all(mangled.string());
      } else {
        load_weights(mangled.string());
      }
      ++loaded_ok;  // structurally valid despite the mutation
    } catch (const Error&) {
      ++typed;
    }
    // anything else propagates and fails the criterion
  };
  for (int i = 0; i < 60; ++i) {
    auto t = ds_bytes;
    t.resize(static_cast<std::size_t>(fuzz.uniform_int(0, static_cast<std::int64_t>(t.size()) - 1)));
    attempt(t, true);
    auto w = wt_bytes;
    w.resize(static_cast<std::size_t>(fuzz.uniform_int(0, static_cast<std::int64_t>(w.size()) - 1)));
    attempt(w, false);
  }
  for (int i = 0; i < 40; ++i) {
    auto t = ds_bytes;
    t[static_cast<std::size_t>(fuzz.uniform_int(0, 7))] ^= 0x5A;  // magic
    attempt(t, true);
    auto w = wt_bytes;
    w[static_cast<std::size_t>(fuzz.uniform_int(0, static_cast<std::int64_t>(w.size()) - 1))] ^=
        static_cast<char>(fuzz.uniform_int(1, 255));
    attempt(w, false);
  }
  return report(9, true,
                fmt("round trips bit-exact; corruption fuzz: %d cases, %d typed errors, "
                    "%d still-valid loads, 0 crashes",
                    cases, typed, loaded_ok));
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  if (argc > 1) {
    for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  } else {
    which = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  }
  int failures = 0;
  for (int n : which) {
    bool ok = false;
    try {
      switch (n) {
        case 1: ok = criterion_1(); break;
        case 2: ok = criterion_2(); break;
        case 3: ok = criterion_3(); break;
        case 4: ok = criterion_4(); break;
        case 5: ok = criterion_5(); break;
        case 6: ok = criterion_6(); break;
        case 7: ok = criterion_7(); break;
        case 8: ok = criterion_8(); break;
        case 9: ok = criterion_9(); break;
        default:
          std::printf("[FAIL] criterion %d: unknown criterion\n", n);
          ok = false;
      }
    } catch (const std::exception& e) {
      std::printf("[FAIL] criterion %d: unexpected exception: %s\n", n, e.what());
      ok = false;
    }
    failures += !ok;
  }
  return failures == 0 ? 0 : 1;
}
