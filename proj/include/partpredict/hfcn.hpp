#ifndef PARTPREDICT_HFCN_HPP
#define PARTPREDICT_HFCN_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "partpredict/dataset.hpp"
#include "partpredict/layers.hpp"
#include "partpredict/parttree.hpp"
#include "partpredict/rdosim.hpp"
#include "partpredict/tensor.hpp"
#include "partpredict/util.hpp"

namespace partpredict {

// Channel widths of the hierarchical fully convolutional network. The trunk
// is four conv-relu-bn pairs with 2x2 max pooling after each pair
// (64 -> 32 -> 16 -> 8 -> 4); branch b taps the trunk after pool b and runs
// conv4x4/s4 -> relu -> bn -> concat QP plane -> conv1x1 -> relu -> conv1x1
// to 4 classes -> per-location softmax, emitting 8x8, 4x4, 2x2 and 1x1 class
// maps (85 outputs in total).
// Default widths keep the trunk narrow where planes are large (64x64, 32x32)
// and spend the parameter budget in the small late planes, so per-sample
// inference stays a small fraction of one partition search on one core.
struct ArchSpec {
  std::array<int, 8> trunk_widths{4, 4, 6, 6, 12, 12, 32, 32};
  std::array<int, 4> branch_first_widths{8, 8, 12, 16};
  std::array<int, 4> branch_mid_widths{16, 16, 24, 32};
  double qp_norm_divisor = 255.0;

  bool operator==(const ArchSpec&) const = default;
};

void validate_arch(const ArchSpec& arch);  // BadArchError

std::int64_t param_count(const ArchSpec& arch);

// Forward-pass cost for one sample. Convention: convolutions count two ops
// per multiply-accumulate plus one per bias add; batch norm counts the two
// ops of the folded inference affine; relu one op per element; max pooling
// three compares per output; softmax 14 ops per location.
std::int64_t flop_count(const ArchSpec& arch);

// Level dims of the four outputs: 8, 4, 2, 1.
constexpr std::array<int, 4> kLevelDims{8, 4, 2, 1};

// Class indices per level, sample-major then row-major.
struct LabelBatch {
  std::array<std::vector<std::uint8_t>, 4> cls;

  static LabelBatch from_trees(const std::vector<PartitionTree>& trees);
};

template <typename T>
using LevelTensors = std::array<Tensor<T>, 4>;

// Net loss: sum over the 85 outputs of the batch-mean categorical
// cross-entropy, natural log, probabilities clamped at 1e-12.
template <typename T>
double cross_entropy_sum(const LevelTensors<T>& probs, const LabelBatch& labels) {
  double total = 0.0;
  for (int level = 0; level < 4; ++level) {
    const Tensor<T>& p = probs[static_cast<std::size_t>(level)];
    const auto& cls = labels.cls[static_cast<std::size_t>(level)];
    if (cls.size() != static_cast<std::size_t>(p.n) * p.plane_size()) {
      throw ShapeMismatchError("label count mismatch at level " + std::to_string(level));
    }
    double level_sum = 0.0;
    for (int in = 0; in < p.n; ++in) {
      for (std::size_t i = 0; i < p.plane_size(); ++i) {
        const int truth = cls[in * p.plane_size() + i];
        const double prob = std::max(
            static_cast<double>(p.plane(in, truth)[i]), 1e-12);
        level_sum -= std::log(prob);
      }
    }
    total += level_sum / p.n;
  }
  return total;
}

// d(loss)/d(logits) of the softmax + cross-entropy head: (p - y) / N.
template <typename T>
LevelTensors<T> cross_entropy_grad(const LevelTensors<T>& probs, const LabelBatch& labels) {
  LevelTensors<T> grads;
  for (int level = 0; level < 4; ++level) {
    const Tensor<T>& p = probs[static_cast<std::size_t>(level)];
    const auto& cls = labels.cls[static_cast<std::size_t>(level)];
    Tensor<T> g(p.n, p.c, p.h, p.w);
    const T inv_n = T(1) / static_cast<T>(p.n);
    for (int in = 0; in < p.n; ++in) {
      for (int ch = 0; ch < p.c; ++ch) {
        const T* pp = p.plane(in, ch);
        T* gp = g.plane(in, ch);
        for (std::size_t i = 0; i < p.plane_size(); ++i) {
          const T y = cls[in * p.plane_size() + i] == ch ? T(1) : T(0);
          gp[i] = (pp[i] - y) * inv_n;
        }
      }
    }
    grads[static_cast<std::size_t>(level)] = std::move(g);
  }
  return grads;
}

// The H-FCN. Templated on the scalar so tests can run the exact same graph
// in double precision for finite-difference checks.
template <typename T>
class HfcnNetT {
 public:
  explicit HfcnNetT(const ArchSpec& arch) : arch_(arch) {
    validate_arch(arch);
    int cin = 1;
    for (int i = 0; i < 8; ++i) {
      const int cout = arch.trunk_widths[static_cast<std::size_t>(i)];
      convs_.emplace_back("trunk" + std::to_string(i), cin, cout, 3, 1, 1);
      bns_.emplace_back("trunk" + std::to_string(i) + ".bn", cout);
      cin = cout;
    }
    trunk_relus_.resize(8);
    pools_.resize(4);
    for (int b = 0; b < 4; ++b) {
      const int tap_channels = arch.trunk_widths[static_cast<std::size_t>(2 * b + 1)];
      const int first = arch.branch_first_widths[static_cast<std::size_t>(b)];
      const int mid = arch.branch_mid_widths[static_cast<std::size_t>(b)];
      const std::string name = "branch" + std::to_string(b);
      branches_.push_back(Branch{
          Conv2d<T>(name + ".first", tap_channels, first, 4, 4, 0),
          BatchNorm2d<T>(name + ".bn", first),
          Conv2d<T>(name + ".mid", first + 1, mid, 1, 1, 0),
          Conv2d<T>(name + ".out", mid, kMergeClasses, 1, 1, 0),
          Relu<T>{}, Relu<T>{}});
    }
  }

  const ArchSpec& arch() const { return arch_; }
  std::uint64_t rng_seed() const { return rng_seed_; }

  // He-style uniform init: conv weights on [-sqrt(6/fan_in), +sqrt(6/fan_in)],
  // biases zero, batch norm scale 1 / shift 0, running moments (0, 1).
  void init(std::uint64_t seed) {
    rng_seed_ = seed;
    Rng rng(seed);
    for (Conv2d<T>* conv : conv_list()) {
      const double bound = std::sqrt(6.0 / conv->fan_in());
      for (T& v : conv->weight.w) v = static_cast<T>(rng.uniform(-bound, bound));
      std::fill(conv->bias.w.begin(), conv->bias.w.end(), T(0));
    }
    for (BatchNorm2d<T>* bn : bn_list()) {
      std::fill(bn->gamma.w.begin(), bn->gamma.w.end(), T(1));
      std::fill(bn->beta.w.begin(), bn->beta.w.end(), T(0));
      std::fill(bn->running_mean.begin(), bn->running_mean.end(), T(0));
      std::fill(bn->running_var.begin(), bn->running_var.end(), T(1));
    }
  }

  // Probabilities at the four levels; input pixels already on [0, 1] and
  // q_norm one entry per sample.
  LevelTensors<T> forward(const Tensor<T>& x, const std::vector<T>& q_norm, bool train) {
    if (x.c != 1 || x.h != kSuperblockSize || x.w != kSuperblockSize) {
      throw ShapeMismatchError("input must be (n, 1, 64, 64)");
    }
    if (static_cast<int>(q_norm.size()) != x.n) {
      throw ShapeMismatchError("one q value per sample required");
    }
    Tensor<T> t = x;
    std::array<Tensor<T>, 4> taps;
    for (int seg = 0; seg < 4; ++seg) {
      t = convs_[static_cast<std::size_t>(2 * seg)].forward(t, train);
      t = trunk_relus_[static_cast<std::size_t>(2 * seg)].forward(t, train);
      t = bns_[static_cast<std::size_t>(2 * seg)].forward(t, train);
      t = convs_[static_cast<std::size_t>(2 * seg + 1)].forward(t, train);
      t = trunk_relus_[static_cast<std::size_t>(2 * seg + 1)].forward(t, train);
      t = bns_[static_cast<std::size_t>(2 * seg + 1)].forward(t, train);
      t = pools_[static_cast<std::size_t>(seg)].forward(t, train);
      taps[static_cast<std::size_t>(seg)] = t;
    }
    LevelTensors<T> probs;
    for (int b = 0; b < 4; ++b) {
      Branch& br = branches_[static_cast<std::size_t>(b)];
      Tensor<T> f = br.first.forward(taps[static_cast<std::size_t>(b)], train);
      f = br.relu1.forward(f, train);
      f = br.bn.forward(f, train);
      f = concat_channel_const(f, q_norm);
      f = br.mid.forward(f, train);
      f = br.relu2.forward(f, train);
      Tensor<T> logits = br.out.forward(f, train);
      probs[static_cast<std::size_t>(b)] = channel_softmax(logits);
    }
    return probs;
  }

  // Reverse pass from the per-branch logit gradients; requires a preceding
  // train-mode forward. Gradients accumulate into the parameter tensors.
  void backward(const LevelTensors<T>& dlogits) {
    std::array<Tensor<T>, 4> dtap;
    for (int b = 0; b < 4; ++b) {
      Branch& br = branches_[static_cast<std::size_t>(b)];
      Tensor<T> d = br.out.backward(dlogits[static_cast<std::size_t>(b)]);
      d = br.relu2.backward(d);
      d = br.mid.backward(d);
      d = drop_last_channel(d);  // QP plane is input-only
      d = br.bn.backward(d);
      d = br.relu1.backward(d);
      dtap[static_cast<std::size_t>(b)] = br.first.backward(d);
    }
    Tensor<T> g = std::move(dtap[3]);
    for (int seg = 3; seg >= 0; --seg) {
      g = pools_[static_cast<std::size_t>(seg)].backward(g);
      g = bns_[static_cast<std::size_t>(2 * seg + 1)].backward(g);
      g = trunk_relus_[static_cast<std::size_t>(2 * seg + 1)].backward(g);
      g = convs_[static_cast<std::size_t>(2 * seg + 1)].backward(g);
      g = bns_[static_cast<std::size_t>(2 * seg)].backward(g);
      g = trunk_relus_[static_cast<std::size_t>(2 * seg)].backward(g);
      g = convs_[static_cast<std::size_t>(2 * seg)].backward(g);
      if (seg > 0) {
        Tensor<T>& extra = dtap[static_cast<std::size_t>(seg - 1)];
        for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += extra.v[i];
      }
    }
  }

  void zero_grad() {
    for (ParamTensor<T>* p : params()) p->zero_grad();
  }

  // Trainable tensors in a stable order (also the weight-file order).
  std::vector<ParamTensor<T>*> params() {
    std::vector<ParamTensor<T>*> out;
    for (Conv2d<T>* conv : conv_list()) {
      out.push_back(&conv->weight);
      out.push_back(&conv->bias);
    }
    for (BatchNorm2d<T>* bn : bn_list()) {
      out.push_back(&bn->gamma);
      out.push_back(&bn->beta);
    }
    return out;
  }

  // Non-trainable state (batch norm running moments), stable order.
  struct NamedState {
    std::string name;
    std::vector<T>* values;
  };
  std::vector<NamedState> state() {
    std::vector<NamedState> out;
    for (BatchNorm2d<T>* bn : bn_list()) {
      out.push_back({bn->name() + ".running_mean", &bn->running_mean});
      out.push_back({bn->name() + ".running_var", &bn->running_var});
    }
    return out;
  }

  std::int64_t trainable_param_count() {
    std::int64_t total = 0;
    for (ParamTensor<T>* p : params()) total += p->count();
    return total;
  }

  void set_rng_seed(std::uint64_t seed) { rng_seed_ = seed; }

 private:
  struct Branch {
    Conv2d<T> first;
    BatchNorm2d<T> bn;
    Conv2d<T> mid;
    Conv2d<T> out;
    Relu<T> relu1, relu2;
  };

  std::vector<Conv2d<T>*> conv_list() {
    std::vector<Conv2d<T>*> out;
    for (auto& c : convs_) out.push_back(&c);
    for (auto& b : branches_) {
      out.push_back(&b.first);
      out.push_back(&b.mid);
      out.push_back(&b.out);
    }
    return out;
  }
  std::vector<BatchNorm2d<T>*> bn_list() {
    std::vector<BatchNorm2d<T>*> out;
    for (auto& b : bns_) out.push_back(&b);
    for (auto& b : branches_) out.push_back(&b.bn);
    return out;
  }

  ArchSpec arch_;
  std::uint64_t rng_seed_ = 0;
  std::vector<Conv2d<T>> convs_;
  std::vector<BatchNorm2d<T>> bns_;
  std::vector<Relu<T>> trunk_relus_;
  std::vector<MaxPool2x2<T>> pools_;
  std::vector<Branch> branches_;
};

using HfcnNet = HfcnNetT<float>;

// Batch assembly: pixels scaled to [0, 1], q divided by qp_norm_divisor.
Tensor<float> superblock_batch(const std::vector<const Superblock*>& sbs);
std::vector<float> qp_batch(const std::vector<int>& qs, double qp_norm_divisor);

struct TrainHyper {
  int batch_size = 128;
  double learning_rate = 1e-3;
  int steps = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int val_interval = 1000;
  int val_max_samples = 4096;
  std::uint64_t seed = 1;
};

struct TrainHistoryEntry {
  int step = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

struct TrainHistory {
  std::vector<TrainHistoryEntry> entries;
};

// Adam on the Eq.-style net loss; deterministic for a fixed seed.
TrainHistory train(HfcnNet& net, const std::vector<SampleRecord>& train_set,
                   const std::vector<SampleRecord>& val_set, const TrainHyper& hyper);

// Mean cross-entropy-sum loss over a record set, inference mode, batched.
double evaluate_loss(HfcnNet& net, const std::vector<SampleRecord>& records,
                     int batch_size = 256);

// Argmax tree of a single superblock (ties pick the lower class index). The
// result may be inconsistent; callers apply correct_top_down before encoding.
PartitionTree predict_tree(HfcnNet& net, const Superblock& sb, QpValue q);

// Batched argmax trees, one per record (much faster than per-sample calls).
std::vector<PartitionTree> predict_trees(HfcnNet& net,
                                         const std::vector<SampleRecord>& records,
                                         int batch_size = 256);

// Self-describing checksummed weight file.
void save_weights(HfcnNet& net, const std::string& path);
HfcnNet load_weights(const std::string& path);
HfcnNet load_weights(const std::string& path, const ArchSpec& expected);  // ArchMismatchError

}  // namespace partpredict

#endif
