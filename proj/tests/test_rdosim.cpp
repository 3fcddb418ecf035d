#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "partpredict/rdosim.hpp"
#include "partpredict/util.hpp"

#include "bf_oracle.hpp"

using namespace partpredict;

namespace {

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

PartitionTree uniform_tree(MergeCode code) {
  PartitionTree t;
  t.m3 = code;
  t.m2.fill(code);
  t.m1.fill(code);
  t.m0.fill(code);
  return t;
}

}  // namespace

TEST_CASE("qp range is validated") {
  CHECK_THROWS_AS(QpValue(-1), RangeError);
  CHECK_THROWS_AS(QpValue(256), RangeError);
  CHECK(QpValue(0).value() == 0);
  CHECK(QpValue(255).value() == 255);
}

TEST_CASE("quantizer step and lambda formulas") {
  CHECK(qstep_for(0) == doctest::Approx(4.0));
  CHECK(qstep_for(24) == doctest::Approx(8.0));
  CHECK(lambda_for(24) == doctest::Approx(0.85 * 64.0));
}

TEST_CASE("dc prediction of a borderless constant-128 block") {
  const Superblock sb = Superblock::constant(128);
  const BlockPrediction p = predict_block(sb, sb, {0, 0, 8, 8});
  CHECK(p.mode == PredMode::kDc);
  CHECK(p.sse == 0.0);
  for (int i = 0; i < 64; ++i) CHECK(p.px[i] == 128);
}

TEST_CASE("horizontal predictor wins on row-constant content") {
  Superblock sb;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) sb.at(y, x) = static_cast<std::uint8_t>(40 + 3 * y);
  }
  const BlockPrediction p = predict_block(sb, sb, {8, 8, 8, 8});
  CHECK(p.mode == PredMode::kHorz);
  CHECK(p.sse == 0.0);
}

TEST_CASE("prediction is deterministic") {
  const Superblock sb = random_sb(11);
  const BlockPrediction a = predict_block(sb, sb, {16, 32, 16, 16});
  const BlockPrediction b = predict_block(sb, sb, {16, 32, 16, 16});
  CHECK(a.mode == b.mode);
  CHECK(a.sse == b.sse);
}

TEST_CASE("invalid block shapes are rejected") {
  const Superblock sb = Superblock::constant(100);
  CHECK_THROWS_AS(predict_block(sb, sb, {0, 0, 7, 8}), BadBlockSizeError);
  CHECK_THROWS_AS(predict_block(sb, sb, {0, 0, 64, 16}), BadBlockSizeError);
  CHECK_THROWS_AS(search_block_cost(sb, QpValue(40), {0, 0, 3, 3}), BadBlockSizeError);
}

TEST_CASE("perfectly predicted block costs only its header") {
  const Superblock sb = Superblock::constant(128);
  const RdCost c = search_block_cost(sb, QpValue(40), {0, 0, 16, 16});
  CHECK(c.distortion == 0.0);
  CHECK(c.rate == kHeaderBits);
  CHECK(c.cost == doctest::Approx(lambda_for(40) * kHeaderBits));
}

TEST_CASE("at q=255 every level quantizes to zero") {
  const Superblock sb = random_sb(3);
  const RdCost c = search_block_cost(sb, QpValue(255), {0, 0, 8, 8});
  CHECK(c.rate == kHeaderBits);
  // Reconstruction equals the prediction, so distortion is the prediction SSE.
  const BlockPrediction p = predict_block(sb, sb, {0, 0, 8, 8});
  CHECK(c.distortion == doctest::Approx(p.sse));
}

TEST_CASE("doubling residual magnitudes never decreases the rate") {
  int dist_violations = 0;
  double dist_sum_single = 0.0, dist_sum_double = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Superblock one = Superblock::constant(128);
    Superblock two = Superblock::constant(128);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        const int r = static_cast<int>(rng.uniform_int(-60, 60));
        one.at(y, x) = static_cast<std::uint8_t>(128 + r / 2);
        two.at(y, x) = static_cast<std::uint8_t>(128 + r);
      }
    }
    // Block at (0,0) has no borders, so prediction is the constant 128 and the
    // residual of `two` is exactly twice that of `one`.
    const int q = static_cast<int>(rng.uniform_int(8, 105));
    const RdCost lo = search_block_cost(one, QpValue(q), {0, 0, 8, 8});
    const RdCost hi = search_block_cost(two, QpValue(q), {0, 0, 8, 8});
    CHECK(hi.rate >= lo.rate);
    dist_violations += hi.distortion < lo.distortion;
    dist_sum_single += lo.distortion;
    dist_sum_double += hi.distortion;
  }
  // Quantization error is not pointwise monotone in the residual, so single
  // blocks may dip; the aggregate must grow.
  CHECK(dist_sum_double >= dist_sum_single);
  std::printf("distortion dips under doubling: %d / 100 blocks\n", dist_violations);
}

TEST_CASE("constant-gray superblock collapses to one coded block") {
  const Superblock sb = Superblock::constant(128);
  for (int q : {15, 31, 47, 70, 99}) {
    const EncodeResult r = rdo_search(sb, QpValue(q));
    CHECK(r.tree == uniform_tree(MergeCode::kFullMerge));
    CHECK(r.total_distortion == 0.0);
    CHECK(r.total_rate == kHeaderBits);
  }
}

TEST_CASE("sharp vertical boundary prefers a vertical or quad split") {
  Superblock sb;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) sb.at(y, x) = static_cast<std::uint8_t>(x < 32 ? 60 : 190);
  }
  const QpValue q(47);
  const EncodeResult r = rdo_search(sb, q);
  CHECK((r.tree.m3 == MergeCode::kVertMerge || r.tree.m3 == MergeCode::kNoMerge));

  // Returned cost beats each level-3 alternative evaluated directly.
  const double none = search_block_cost(sb, q, {0, 0, 64, 64}).cost;
  const double horz = search_block_cost(sb, q, {0, 0, 64, 32}).cost +
                      search_block_cost(sb, q, {32, 0, 64, 32}).cost;
  const double vert = search_block_cost(sb, q, {0, 0, 32, 64}).cost +
                      search_block_cost(sb, q, {0, 32, 32, 64}).cost;
  const double split = rdo_search_sub(sb, q, 0, 0, 32).cost +
                       rdo_search_sub(sb, q, 0, 32, 32).cost +
                       rdo_search_sub(sb, q, 32, 0, 32).cost +
                       rdo_search_sub(sb, q, 32, 32, 32).cost +
                       lambda_for(q.value()) * kSplitHeaderBits;
  CHECK(r.search_cost <= none);
  CHECK(r.search_cost <= horz);
  CHECK(r.search_cost <= vert);
  CHECK(r.search_cost <= split + 1e-9);
}

TEST_CASE("search result beats the two uniform candidate trees") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Superblock sb = seed % 2 ? random_sb(seed) : smooth_sb(seed);
    const QpValue q(static_cast<int>(15 + 10 * seed));
    const EncodeResult r = rdo_search(sb, q);
    CHECK(r.search_cost <= search_tree_cost(sb, q, uniform_tree(MergeCode::kFullMerge)));
    CHECK(r.search_cost <= search_tree_cost(sb, q, uniform_tree(MergeCode::kNoMerge)));
    CHECK(r.search_cost == doctest::Approx(search_tree_cost(sb, q, r.tree)).epsilon(1e-12));
  }
}

TEST_CASE("search equals brute-force enumeration on 16x16 sub-problems") {
  const auto trees = testing::enumerate_trees(16);
  REQUIRE(trees.size() == 259);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Superblock sb = seed % 2 ? random_sb(seed + 50, 30, 220) : smooth_sb(seed + 50);
    Rng rng(seed);
    const int q = static_cast<int>(rng.uniform_int(8, 105));
    const int row = static_cast<int>(rng.uniform_int(0, 3)) * 16;
    const int col = static_cast<int>(rng.uniform_int(0, 3)) * 16;
    double best = 1e300;
    for (const auto& t : trees) {
      best = std::min(best, testing::bf_cost(t, sb, QpValue(q), row, col, 16));
    }
    const SubSearchResult dp = rdo_search_sub(sb, QpValue(q), row, col, 16);
    REQUIRE(dp.cost == best);  // exact: identical float composition
    ++checked;
  }
  CHECK(checked == 10);
}

TEST_CASE("encode_with_tree reproduces the search encode exactly") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Superblock sb = seed % 2 ? random_sb(seed + 9) : smooth_sb(seed + 9);
    const QpValue q(static_cast<int>(20 + 13 * seed));
    const EncodeResult searched = rdo_search(sb, q);
    const EncodeResult fixed = encode_with_tree(sb, q, searched.tree);
    CHECK(fixed.total_rate == searched.total_rate);
    CHECK(fixed.total_distortion == searched.total_distortion);
    CHECK(fixed.reconstruction == searched.reconstruction);
  }
}

TEST_CASE("encode_with_tree rejects inconsistent trees") {
  PartitionTree bad = uniform_tree(MergeCode::kFullMerge);
  bad.m1[7] = MergeCode::kNoMerge;
  CHECK_THROWS_AS(encode_with_tree(Superblock::constant(90), QpValue(40), bad),
                  InconsistentTreeError);
}

TEST_CASE("search and encode are deterministic") {
  const Superblock sb = smooth_sb(77);
  const QpValue q(47);
  const EncodeResult a = rdo_search(sb, q);
  const EncodeResult b = rdo_search(sb, q);
  CHECK(a.tree == b.tree);
  CHECK(a.total_rate == b.total_rate);
  CHECK(a.reconstruction == b.reconstruction);
  CHECK(a.search_cost == b.search_cost);
}

TEST_CASE("fixed-tree encode is faster than the search") {
  std::vector<Superblock> sbs;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    sbs.push_back(seed % 2 ? random_sb(seed + 200) : smooth_sb(seed + 200));
  }
  const QpValue q(47);
  std::vector<PartitionTree> trees;
  for (const Superblock& sb : sbs) trees.push_back(rdo_search(sb, q).tree);

  std::vector<double> search_times, encode_times;
  for (int rep = 0; rep < 5; ++rep) {
    Stopwatch search_watch;
    for (const Superblock& sb : sbs) rdo_search(sb, q);
    search_times.push_back(search_watch.seconds());

    Stopwatch encode_watch;
    for (std::size_t i = 0; i < sbs.size(); ++i) encode_with_tree(sbs[i], q, trees[i]);
    encode_times.push_back(encode_watch.seconds());
  }
  const double search_med = median(search_times);
  const double encode_med = median(encode_times);
  std::printf("timing probe: rdo_search %.3f ms/sb, encode %.3f ms/sb, ratio %.2f\n",
              1e3 * search_med / 64.0, 1e3 * encode_med / 64.0, search_med / encode_med);
  CHECK(encode_med < search_med);
}

TEST_CASE("reconstruction quality degrades with q, few exceptions") {
  const std::vector<int> qs{8, 30, 50, 70, 90, 105};
  int comparisons = 0, violations = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Superblock sb = Superblock::constant(120);
    Rng rng(seed);
    for (auto& p : sb.px) {
      p = static_cast<std::uint8_t>(std::clamp<long>(p + std::lround(12 * rng.gaussian()), 0l, 255l));
    }
    double prev_psnr = 1e9;
    for (int q : qs) {
      const EncodeResult r = rdo_search(sb, QpValue(q));
      const double sse = std::max(r.total_distortion, 1e-12);
      const double psnr = 10.0 * std::log10(255.0 * 255.0 * 4096.0 / sse);
      if (q != qs.front()) {
        ++comparisons;
        violations += psnr > prev_psnr;
      }
      prev_psnr = psnr;
    }
  }
  std::printf("psnr monotonicity: %d violations over %d comparisons\n", violations, comparisons);
  CHECK(violations <= comparisons / 20);  // <= 5%
}
