#include "partpredict/hfcn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace partpredict {

namespace {

// Conv shapes and activation sizes implied by an ArchSpec, for counting.
struct ShapeWalk {
  struct ConvShape {
    int cin, cout, k, spatial_out;
  };
  std::vector<ConvShape> convs;
  std::vector<std::pair<int, int>> bns;        // (channels, spatial)
  std::vector<std::pair<int, int>> relus;      // (channels, spatial)
  std::vector<std::pair<int, int>> pools;      // (channels, spatial_out)
  std::vector<int> softmax_locations;

  explicit ShapeWalk(const ArchSpec& a) {
    int cin = 1;
    int spatial = kSuperblockSize;
    for (int i = 0; i < 8; ++i) {
      const int cout = a.trunk_widths[static_cast<std::size_t>(i)];
      convs.push_back({cin, cout, 3, spatial});
      relus.push_back({cout, spatial});
      bns.push_back({cout, spatial});
      cin = cout;
      if (i % 2 == 1) {
        spatial /= 2;
        pools.push_back({cout, spatial});
      }
    }
    for (int b = 0; b < 4; ++b) {
      const int tap_c = a.trunk_widths[static_cast<std::size_t>(2 * b + 1)];
      const int tap_s = 32 >> b;
      const int out_s = tap_s / 4;
      const int first = a.branch_first_widths[static_cast<std::size_t>(b)];
      const int mid = a.branch_mid_widths[static_cast<std::size_t>(b)];
      convs.push_back({tap_c, first, 4, out_s});
      relus.push_back({first, out_s});
      bns.push_back({first, out_s});
      convs.push_back({first + 1, mid, 1, out_s});
      relus.push_back({mid, out_s});
      convs.push_back({mid, kMergeClasses, 1, out_s});
      softmax_locations.push_back(out_s * out_s);
    }
  }
};

}  // namespace

void validate_arch(const ArchSpec& arch) {
  for (int w : arch.trunk_widths) {
    if (w < 1) throw BadArchError("trunk widths must be positive");
  }
  for (int w : arch.branch_first_widths) {
    if (w < 1) throw BadArchError("branch first widths must be positive");
  }
  for (int w : arch.branch_mid_widths) {
    if (w < 1) throw BadArchError("branch mid widths must be positive");
  }
  if (!(arch.qp_norm_divisor > 0.0)) throw BadArchError("qp_norm_divisor must be positive");
}

std::int64_t param_count(const ArchSpec& arch) {
  validate_arch(arch);
  const ShapeWalk walk(arch);
  std::int64_t total = 0;
  for (const auto& c : walk.convs) {
    total += static_cast<std::int64_t>(c.cout) * c.cin * c.k * c.k + c.cout;
  }
  for (const auto& bn : walk.bns) total += 2 * bn.first;  // scale and shift
  return total;
}

std::int64_t flop_count(const ArchSpec& arch) {
  validate_arch(arch);
  const ShapeWalk walk(arch);
  std::int64_t total = 0;
  for (const auto& c : walk.convs) {
    const std::int64_t out_elems = static_cast<std::int64_t>(c.cout) * c.spatial_out * c.spatial_out;
    total += out_elems * (2 * c.k * c.k * c.cin + 1);
  }
  for (const auto& bn : walk.bns) {
    total += 2 * static_cast<std::int64_t>(bn.first) * bn.second * bn.second;
  }
  for (const auto& r : walk.relus) {
    total += static_cast<std::int64_t>(r.first) * r.second * r.second;
  }
  for (const auto& p : walk.pools) {
    total += 3 * static_cast<std::int64_t>(p.first) * p.second * p.second;
  }
  for (int locs : walk.softmax_locations) total += 14 * static_cast<std::int64_t>(locs);
  return total;
}

LabelBatch LabelBatch::from_trees(const std::vector<PartitionTree>& trees) {
  LabelBatch out;
  for (int level = 0; level < 4; ++level) {
    const int dim = kLevelDims[static_cast<std::size_t>(level)];
    auto& cls = out.cls[static_cast<std::size_t>(level)];
    cls.reserve(trees.size() * static_cast<std::size_t>(dim) * dim);
    for (const PartitionTree& t : trees) {
      for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) {
          cls.push_back(static_cast<std::uint8_t>(t.at(level, r, c)));
        }
      }
    }
  }
  return out;
}

Tensor<float> superblock_batch(const std::vector<const Superblock*>& sbs) {
  Tensor<float> x(static_cast<int>(sbs.size()), 1, kSuperblockSize, kSuperblockSize);
  constexpr float kInv255 = 1.0f / 255.0f;
  for (std::size_t i = 0; i < sbs.size(); ++i) {
    float* dst = x.plane(static_cast<int>(i), 0);
    const std::uint8_t* src = sbs[i]->px.data();
    for (int j = 0; j < kSuperblockPixels; ++j) dst[j] = src[j] * kInv255;
  }
  return x;
}

std::vector<float> qp_batch(const std::vector<int>& qs, double qp_norm_divisor) {
  std::vector<float> out(qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) {
    out[i] = static_cast<float>(qs[i] / qp_norm_divisor);
  }
  return out;
}

namespace {

struct BatchView {
  Tensor<float> x;
  std::vector<float> q_norm;
  LabelBatch labels;
};

BatchView make_batch(const std::vector<SampleRecord>& records,
                     const std::vector<std::size_t>& indices, double qp_norm) {
  BatchView b;
  std::vector<const Superblock*> sbs;
  std::vector<int> qs;
  std::vector<PartitionTree> trees;
  sbs.reserve(indices.size());
  for (std::size_t idx : indices) {
    sbs.push_back(&records[idx].sb);
    qs.push_back(records[idx].q);
    trees.push_back(records[idx].labels);
  }
  b.x = superblock_batch(sbs);
  b.q_norm = qp_batch(qs, qp_norm);
  b.labels = LabelBatch::from_trees(trees);
  return b;
}

}  // namespace

TrainHistory train(HfcnNet& net, const std::vector<SampleRecord>& train_set,
                   const std::vector<SampleRecord>& val_set, const TrainHyper& hyper) {
  if (train_set.empty()) throw EmptyDatasetError("training set is empty");
  if (hyper.batch_size < 1) throw RangeError("batch size must be positive");
  if (hyper.steps < 0) throw RangeError("step count must be nonnegative");

  auto params = net.params();
  std::vector<std::vector<float>> adam_m(params.size()), adam_v(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_m[i].assign(params[i]->w.size(), 0.0f);
    adam_v[i].assign(params[i]->w.size(), 0.0f);
  }

  Rng rng(hyper.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::size_t cursor = 0;

  TrainHistory history;
  history.entries.reserve(static_cast<std::size_t>(hyper.steps));
  const int batch = std::min<int>(hyper.batch_size, static_cast<int>(train_set.size()));

  for (int step = 1; step <= hyper.steps; ++step) {
    std::vector<std::size_t> indices;
    indices.reserve(static_cast<std::size_t>(batch));
    for (int j = 0; j < batch; ++j) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      indices.push_back(order[cursor++]);
    }
    const BatchView b = make_batch(train_set, indices, net.arch().qp_norm_divisor);

    const LevelTensors<float> probs = net.forward(b.x, b.q_norm, true);
    const double loss = cross_entropy_sum(probs, b.labels);
    net.zero_grad();
    net.backward(cross_entropy_grad(probs, b.labels));

    const double bc1 = 1.0 - std::pow(hyper.beta1, step);
    const double bc2 = 1.0 - std::pow(hyper.beta2, step);
    const float beta1 = static_cast<float>(hyper.beta1);
    const float beta2 = static_cast<float>(hyper.beta2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      float* w = params[i]->w.data();
      const float* g = params[i]->g.data();
      float* m = adam_m[i].data();
      float* v = adam_v[i].data();
      const std::size_t count = params[i]->w.size();
      for (std::size_t j = 0; j < count; ++j) {
        m[j] = beta1 * m[j] + (1.0f - beta1) * g[j];
        v[j] = beta2 * v[j] + (1.0f - beta2) * g[j] * g[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        w[j] -= static_cast<float>(hyper.learning_rate * mhat /
                                   (std::sqrt(vhat) + hyper.epsilon));
      }
    }

    TrainHistoryEntry entry;
    entry.step = step;
    entry.train_loss = loss;
    if (!val_set.empty() && hyper.val_interval > 0 && step % hyper.val_interval == 0) {
      const std::size_t n = std::min<std::size_t>(
          val_set.size(), static_cast<std::size_t>(hyper.val_max_samples));
      const std::vector<SampleRecord> subset(val_set.begin(),
                                             val_set.begin() + static_cast<std::ptrdiff_t>(n));
      entry.val_loss = evaluate_loss(net, subset);
    }
    history.entries.push_back(entry);
  }
  return history;
}

double evaluate_loss(HfcnNet& net, const std::vector<SampleRecord>& records, int batch_size) {
  if (records.empty()) throw EmptyDatasetError("no records to evaluate");
  double total = 0.0;
  std::size_t done = 0;
  while (done < records.size()) {
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(batch_size),
                                                records.size() - done);
    std::vector<std::size_t> indices(n);
    std::iota(indices.begin(), indices.end(), done);
    const BatchView b = make_batch(records, indices, net.arch().qp_norm_divisor);
    const LevelTensors<float> probs = net.forward(b.x, b.q_norm, false);
    total += cross_entropy_sum(probs, b.labels) * static_cast<double>(n);
    done += n;
  }
  return total / static_cast<double>(records.size());
}

namespace {

PartitionTree argmax_tree(const LevelTensors<float>& probs, int sample) {
  PartitionTree tree;
  for (int level = 0; level < 4; ++level) {
    const Tensor<float>& p = probs[static_cast<std::size_t>(level)];
    const int dim = kLevelDims[static_cast<std::size_t>(level)];
    for (int y = 0; y < dim; ++y) {
      for (int x = 0; x < dim; ++x) {
        int best = 0;
        float bv = p.at(sample, 0, y, x);
        for (int ch = 1; ch < kMergeClasses; ++ch) {
          const float v = p.at(sample, ch, y, x);
          if (v > bv) {  // ties keep the lower class index
            bv = v;
            best = ch;
          }
        }
        tree.set(level, y, x, static_cast<MergeCode>(best));
      }
    }
  }
  return tree;
}

}  // namespace

PartitionTree predict_tree(HfcnNet& net, const Superblock& sb, QpValue q) {
  const std::vector<const Superblock*> sbs{&sb};
  const Tensor<float> x = superblock_batch(sbs);
  const std::vector<float> qn = qp_batch({q.value()}, net.arch().qp_norm_divisor);
  return argmax_tree(net.forward(x, qn, false), 0);
}

std::vector<PartitionTree> predict_trees(HfcnNet& net,
                                         const std::vector<SampleRecord>& records,
                                         int batch_size) {
  std::vector<PartitionTree> out;
  out.reserve(records.size());
  std::size_t done = 0;
  while (done < records.size()) {
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(batch_size),
                                                records.size() - done);
    std::vector<const Superblock*> sbs(n);
    std::vector<int> qs(n);
    for (std::size_t i = 0; i < n; ++i) {
      sbs[i] = &records[done + i].sb;
      qs[i] = records[done + i].q;
    }
    const Tensor<float> x = superblock_batch(sbs);
    const std::vector<float> qn = qp_batch(qs, net.arch().qp_norm_divisor);
    const LevelTensors<float> probs = net.forward(x, qn, false);
    for (std::size_t i = 0; i < n; ++i) out.push_back(argmax_tree(probs, static_cast<int>(i)));
    done += n;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weight file
// ---------------------------------------------------------------------------

namespace {

constexpr char kWeightMagic[8] = {'H', 'F', 'C', 'N', 'W', 'T', '0', '1'};
constexpr std::uint16_t kWeightVersion = 1;
constexpr std::uint16_t kEndianTag = 0x1234;

void put_u16(std::vector<std::uint8_t>& buf, std::uint16_t v) {
  buf.push_back(static_cast<std::uint8_t>(v & 0xFF));
  buf.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
void put_i32(std::vector<std::uint8_t>& buf, std::int32_t v) {
  put_u32(buf, static_cast<std::uint32_t>(v));
}
void put_f64(std::vector<std::uint8_t>& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(buf, bits);
}
void put_f32s(std::vector<std::uint8_t>& buf, const float* values, std::size_t count) {
  const std::size_t offset = buf.size();
  buf.resize(offset + 4 * count);
  std::memcpy(buf.data() + offset, values, 4 * count);
}

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  void need(std::size_t bytes) const {
    if (pos_ + bytes > size_) throw CorruptFileError("weight file truncated");
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | data_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | data_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 8;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), len);
    pos_ += len;
    return s;
  }
  void f32s(float* out, std::size_t count) {
    need(4 * count);
    std::memcpy(out, data_ + pos_, 4 * count);
    pos_ += 4 * count;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_weights(HfcnNet& net, const std::string& path) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kWeightMagic, kWeightMagic + sizeof(kWeightMagic));
  put_u16(buf, kWeightVersion);
  put_u16(buf, kEndianTag);
  put_u64(buf, net.rng_seed());
  const ArchSpec& a = net.arch();
  for (int w : a.trunk_widths) put_i32(buf, w);
  for (int w : a.branch_first_widths) put_i32(buf, w);
  for (int w : a.branch_mid_widths) put_i32(buf, w);
  put_f64(buf, a.qp_norm_divisor);

  const auto params = net.params();
  const auto state = net.state();
  put_u32(buf, static_cast<std::uint32_t>(params.size() + state.size()));
  for (const ParamTensor<float>* p : params) {
    put_u16(buf, static_cast<std::uint16_t>(p->name.size()));
    buf.insert(buf.end(), p->name.begin(), p->name.end());
    put_u32(buf, static_cast<std::uint32_t>(p->w.size()));
    put_f32s(buf, p->w.data(), p->w.size());
  }
  for (const auto& s : state) {
    put_u16(buf, static_cast<std::uint16_t>(s.name.size()));
    buf.insert(buf.end(), s.name.begin(), s.name.end());
    put_u32(buf, static_cast<std::uint32_t>(s.values->size()));
    put_f32s(buf, s.values->data(), s.values->size());
  }
  put_u32(buf, crc32(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

HfcnNet load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> buf{std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>()};
  if (buf.size() < sizeof(kWeightMagic) + 8) throw CorruptFileError("weight file too short");
  const std::uint32_t stored = static_cast<std::uint32_t>(buf[buf.size() - 4]) |
                               static_cast<std::uint32_t>(buf[buf.size() - 3]) << 8 |
                               static_cast<std::uint32_t>(buf[buf.size() - 2]) << 16 |
                               static_cast<std::uint32_t>(buf[buf.size() - 1]) << 24;
  if (crc32(buf.data(), buf.size() - 4) != stored) {
    throw CorruptFileError("weight file checksum mismatch");
  }

  Reader r(buf.data(), buf.size() - 4);
  if (r.str(sizeof(kWeightMagic)) != std::string(kWeightMagic, sizeof(kWeightMagic))) {
    throw CorruptFileError("bad weight file magic");
  }
  if (r.u16() != kWeightVersion) throw CorruptFileError("unsupported weight file version");
  if (r.u16() != kEndianTag) throw CorruptFileError("foreign endianness in weight file");
  const std::uint64_t seed = r.u64();
  ArchSpec arch;
  for (int& w : arch.trunk_widths) w = r.i32();
  for (int& w : arch.branch_first_widths) w = r.i32();
  for (int& w : arch.branch_mid_widths) w = r.i32();
  arch.qp_norm_divisor = r.f64();
  validate_arch(arch);

  HfcnNet net(arch);
  net.set_rng_seed(seed);
  const auto params = net.params();
  const auto state = net.state();
  const std::uint32_t blob_count = r.u32();
  if (blob_count != params.size() + state.size()) {
    throw CorruptFileError("unexpected tensor count in weight file");
  }
  auto read_blob = [&r](const std::string& want_name, float* dst, std::size_t want_count) {
    const std::uint16_t name_len = r.u16();
    const std::string name = r.str(name_len);
    const std::uint32_t count = r.u32();
    if (name != want_name || count != want_count) {
      throw CorruptFileError("unexpected tensor '" + name + "' in weight file");
    }
    r.f32s(dst, count);
  };
  for (ParamTensor<float>* p : params) read_blob(p->name, p->w.data(), p->w.size());
  for (const auto& s : state) read_blob(s.name, s.values->data(), s.values->size());
  if (r.pos() != buf.size() - 4) throw CorruptFileError("trailing bytes in weight file");
  return net;
}

HfcnNet load_weights(const std::string& path, const ArchSpec& expected) {
  HfcnNet net = load_weights(path);
  if (!(net.arch() == expected)) {
    throw ArchMismatchError("weight file architecture differs from the requested one");
  }
  return net;
}

}  // namespace partpredict
