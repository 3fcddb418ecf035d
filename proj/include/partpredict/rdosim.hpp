#ifndef PARTPREDICT_RDOSIM_HPP
#define PARTPREDICT_RDOSIM_HPP

#include <array>
#include <cmath>
#include <cstdint>

#include "partpredict/errors.hpp"
#include "partpredict/parttree.hpp"

namespace partpredict {

constexpr int kSuperblockSize = 64;
constexpr int kSuperblockPixels = kSuperblockSize * kSuperblockSize;

// 64x64 luma block, row-major.
struct Superblock {
  std::array<std::uint8_t, kSuperblockPixels> px{};

  std::uint8_t at(int row, int col) const { return px[row * kSuperblockSize + col]; }
  std::uint8_t& at(int row, int col) { return px[row * kSuperblockSize + col]; }
  const std::uint8_t* row(int r) const { return px.data() + r * kSuperblockSize; }

  static Superblock constant(std::uint8_t value) {
    Superblock sb;
    sb.px.fill(value);
    return sb;
  }

  bool operator==(const Superblock&) const = default;
};

// Internal-scale quantization parameter, 0-255.
class QpValue {
 public:
  explicit QpValue(int q) : q_(q) {
    if (q < 0 || q > 255) throw RangeError("QP must be in [0, 255]");
  }
  int value() const { return q_; }
  bool operator==(const QpValue&) const = default;

 private:
  int q_;
};

struct RdCost {
  double distortion = 0.0;  // sum of squared pixel error
  double rate = 0.0;        // abstract bits
  double cost = 0.0;        // distortion + lambda(q) * rate
};

struct EncodeResult {
  PartitionTree tree;
  double total_rate = 0.0;
  Superblock reconstruction;
  double wall_time = 0.0;  // seconds, always > 0
  double total_distortion = 0.0;
  // Optimal cost under the search model; only meaningful for rdo_search.
  double search_cost = 0.0;
};

// Quantizer step and Lagrange multiplier of the cost model.
inline double qstep_for(int q) { return std::exp2(q / 24.0 + 2.0); }
inline double lambda_for(int q) {
  const double s = qstep_for(q);
  return 0.85 * s * s;
}

constexpr double kHeaderBits = 4.0;       // per coded block
constexpr double kSplitHeaderBits = 4.0;  // per split decision

struct BlockRect {
  int row = 0;
  int col = 0;
  int width = 0;
  int height = 0;
};

enum class PredMode : std::uint8_t { kDc = 0, kHorz = 1, kVert = 2 };

struct BlockPrediction {
  std::array<std::uint8_t, kSuperblockPixels> px{};  // width*height valid entries
  PredMode mode = PredMode::kDc;
  double sse = 0.0;  // against the source block
};

// Best of DC / horizontal / vertical extension by SSE against the source
// block at `rect`; borders come from `border_plane` (top row / left column
// just outside the rect, substituted by 128 at plane edges). Ties prefer
// DC, then horizontal. Throws BadBlockSizeError for invalid shapes.
BlockPrediction predict_block(const Superblock& source, const Superblock& border_plane,
                              const BlockRect& rect);

// Rate-distortion cost of coding one block with borders taken from the
// source plane itself (the search model: block costs are then independent
// of partition decisions elsewhere, which makes the exhaustive bottom-up
// search exact).
RdCost search_block_cost(const Superblock& sb, QpValue q, const BlockRect& rect);

// Search cost of a whole (consistent) tree: leaf costs in coding order plus
// a split header per split decision, composed exactly as the search does.
double search_tree_cost(const Superblock& sb, QpValue q, const PartitionTree& tree);

// Optimal search over the square sub-block at (row, col, size): returns the
// minimum cost over every partition of that block and the winning merge
// choice at its level.
struct SubSearchResult {
  double cost = 0.0;
  MergeCode choice = MergeCode::kFullMerge;
};
SubSearchResult rdo_search_sub(const Superblock& sb, QpValue q, int row, int col, int size);

// Exhaustive bottom-up partition search; returns the cost-optimal canonical
// tree, plus rate/reconstruction/time from actually encoding it.
EncodeResult rdo_search(const Superblock& sb, QpValue q);

// Encode with a fixed (consistent) tree, no search. Rate and reconstruction
// are bit-identical to what rdo_search produces for the same tree.
EncodeResult encode_with_tree(const Superblock& sb, QpValue q, const PartitionTree& tree);

}  // namespace partpredict

#endif
