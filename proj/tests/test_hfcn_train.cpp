#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "partpredict/content.hpp"
#include "partpredict/hfcn.hpp"

using namespace partpredict;

namespace {

ArchSpec tiny_arch() {
  ArchSpec a;
  a.trunk_widths = {3, 3, 4, 4, 5, 5, 6, 6};
  a.branch_first_widths = {4, 4, 5, 5};
  a.branch_mid_widths = {6, 6, 7, 8};
  return a;
}

Superblock random_sb(std::uint64_t seed) {
  Rng rng(seed);
  Superblock sb;
  for (auto& p : sb.px) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
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

// Fraction of the 85 outputs predicted correctly, over all records.
double element_accuracy(HfcnNet& net, const std::vector<SampleRecord>& records) {
  const auto trees = predict_trees(net, records);
  std::int64_t hits = 0, total = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (int level = 0; level < 4; ++level) {
      const int dim = PartitionTree::level_dim(level);
      for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) {
          hits += trees[i].at(level, r, c) == records[i].labels.at(level, r, c);
          ++total;
        }
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("training reduces the loss on learnable data") {
  const Frame frame = make_frame(ContentKind::kMixed, 256, 256, 3);
  GenerateOptions options;
  options.sampler = QSampler::fixed_set({15, 47, 99});
  options.seed = 5;
  const auto records = generate_records({frame}, options);

  HfcnNet net(tiny_arch());
  net.init(7);
  TrainHyper hyper;
  hyper.batch_size = 16;
  hyper.steps = 200;
  hyper.learning_rate = 2e-3;
  hyper.seed = 11;
  hyper.val_interval = 0;
  const TrainHistory history = train(net, records, {}, hyper);
  REQUIRE(history.entries.size() == 200);

  double first = 0.0, last = 0.0;
  for (int i = 0; i < 10; ++i) {
    first += history.entries[static_cast<std::size_t>(i)].train_loss;
    last += history.entries[history.entries.size() - 1 - static_cast<std::size_t>(i)].train_loss;
  }
  std::printf("descent: first-10 avg %.3f -> last-10 avg %.3f\n", first / 10, last / 10);
  CHECK(last < first);
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
  std::vector<SampleRecord> records(8);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].sb = random_sb(i);
    records[i].q = 15 + static_cast<int>(10 * i);
    records[i].labels = correct_top_down(random_tree(i, {0.25, 0.25, 0.25, 0.25}));
  }
  HfcnNet net(tiny_arch());
  net.init(9);
  std::vector<std::vector<float>> before;
  for (auto* p : net.params()) before.push_back(p->w);

  TrainHyper hyper;
  hyper.batch_size = 4;
  hyper.steps = 5;
  hyper.learning_rate = 0.0;
  hyper.val_interval = 0;
  train(net, records, {}, hyper);

  const auto params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) REQUIRE(params[i]->w == before[i]);
}

TEST_CASE("training is deterministic for a fixed seed") {
  std::vector<SampleRecord> records(12);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].sb = random_sb(100 + i);
    records[i].q = 20 + static_cast<int>(5 * i);
    records[i].labels = correct_top_down(random_tree(50 + i, {0.25, 0.25, 0.25, 0.25}));
  }
  auto run = [&records] {
    HfcnNet net(tiny_arch());
    net.init(4);
    TrainHyper hyper;
    hyper.batch_size = 6;
    hyper.steps = 30;
    hyper.seed = 77;
    hyper.val_interval = 0;
    const TrainHistory h = train(net, records, {}, hyper);
    std::vector<std::vector<float>> ws;
    for (auto* p : net.params()) ws.push_back(p->w);
    return std::make_pair(h.entries.back().train_loss, ws);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("empty training set is rejected") {
  HfcnNet net(tiny_arch());
  net.init(1);
  CHECK_THROWS_AS(train(net, {}, {}, TrainHyper{}), EmptyDatasetError);
}

TEST_CASE("a tiny set is memorized, including the qp dependence") {
  // 16 superblocks, each labeled differently at q=15 and q=99; only the QP
  // plane can resolve the two.
  std::vector<SampleRecord> records;
  for (std::uint64_t i = 0; i < 16; ++i) {
    const Superblock sb = random_sb(500 + i);
    SampleRecord lo;
    lo.sb = sb;
    lo.q = 15;
    lo.labels = uniform_tree(MergeCode::kNoMerge);
    SampleRecord hi;
    hi.sb = sb;
    hi.q = 99;
    hi.labels = uniform_tree(MergeCode::kFullMerge);
    records.push_back(lo);
    records.push_back(hi);
  }

  HfcnNet net(tiny_arch());
  net.init(13);
  TrainHyper hyper;
  hyper.batch_size = 32;
  hyper.learning_rate = 3e-3;
  hyper.seed = 3;
  hyper.val_interval = 0;

  double accuracy = 0.0;
  int steps_used = 0;
  for (int round = 0; round < 10 && accuracy < 0.99; ++round) {
    hyper.steps = 200;
    train(net, records, {}, hyper);
    steps_used += 200;
    accuracy = element_accuracy(net, records);
  }
  std::printf("memorization: %.2f%% after %d steps\n", 100.0 * accuracy, steps_used);
  CHECK(steps_used <= 2000);
  CHECK(accuracy >= 0.99);

  // Same pixels, different q, different predicted tree.
  const PartitionTree lo = predict_tree(net, records[0].sb, QpValue(15));
  const PartitionTree hi = predict_tree(net, records[0].sb, QpValue(99));
  CHECK(lo != hi);
}

TEST_CASE("validation losses are recorded at the requested interval") {
  std::vector<SampleRecord> records(10);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].sb = random_sb(300 + i);
    records[i].q = 40;
    records[i].labels = uniform_tree(MergeCode::kFullMerge);
  }
  HfcnNet net(tiny_arch());
  net.init(2);
  TrainHyper hyper;
  hyper.batch_size = 5;
  hyper.steps = 9;
  hyper.val_interval = 3;
  const TrainHistory h = train(net, records, records, hyper);
  REQUIRE(h.entries.size() == 9);
  for (const auto& e : h.entries) {
    CHECK(e.val_loss.has_value() == (e.step % 3 == 0));
  }
}
