#ifndef PARTPREDICT_PARTTREE_HPP
#define PARTPREDICT_PARTTREE_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "partpredict/errors.hpp"

namespace partpredict {

// How a group of four sibling blocks combines into its parent. The numbering
// is the class index used by labels, the dataset format and the model.
enum class MergeCode : std::uint8_t {
  kNoMerge = 0,    // parent is split into the four children
  kHorzMerge = 1,  // children pair into two full-width, half-height blocks
  kVertMerge = 2,  // children pair into two half-width, full-height blocks
  kFullMerge = 3,  // children merge into one square block
};

constexpr int kMergeClasses = 4;
constexpr int kTreeElementCount = 85;  // 64 + 16 + 4 + 1

// Four-level merge-matrix description of a 64x64 superblock partition.
// Level k holds an (8>>k) x (8>>k) matrix; element (i,j) describes how the
// four child blocks of size 4<<k inside the square region of side 8<<k at
// (i*(8<<k), j*(8<<k)) pixels combine. Values are immutable plain data;
// operations below are pure functions.
struct PartitionTree {
  std::array<MergeCode, 64> m0{};  // 8x8, merges of 4x4 blocks
  std::array<MergeCode, 16> m1{};  // 4x4, merges of 8x8 blocks
  std::array<MergeCode, 4> m2{};   // 2x2, merges of 16x16 blocks
  MergeCode m3 = MergeCode::kNoMerge;  // merge of the four 32x32 blocks

  static int level_dim(int level) { return 8 >> level; }

  MergeCode at(int level, int row, int col) const;
  void set(int level, int row, int col, MergeCode code);

  // Flat views in dataset order: level 3, then 2, 1, 0, each row-major.
  std::array<std::uint8_t, kTreeElementCount> to_bytes() const;
  static PartitionTree from_bytes(const std::array<std::uint8_t, kTreeElementCount>& bytes);

  bool operator==(const PartitionTree&) const = default;
};

enum class SplitKind : std::uint8_t { kNone = 0, kHorz = 1, kVert = 2, kSplit = 3 };

struct Decision {
  int block_size = 0;  // 64, 32, 16 or 8
  int row = 0;         // pixel position of the block's top-left corner
  int col = 0;
  SplitKind kind = SplitKind::kNone;

  bool operator==(const Decision&) const = default;
};

using DecisionSeq = std::vector<Decision>;

struct LeafBlock {
  int width = 0;
  int height = 0;
  int row = 0;
  int col = 0;

  bool operator==(const LeafBlock&) const = default;
};

// True iff no element sits under a FullMerge parent without being FullMerge
// itself. Elements under Horz/Vert parents are don't-care and never checked.
bool is_consistent(const PartitionTree& tree);

// Top-down repair: starting at level 2 and descending, forces every element
// whose (already corrected) parent is FullMerge to FullMerge. m3 is never
// touched. Idempotent; output always passes is_consistent.
PartitionTree correct_top_down(const PartitionTree& tree);

// Canonical form for stable equality: every element not consumed by the
// decision traversal is forced to FullMerge. Requires a consistent tree.
PartitionTree canonicalize(const PartitionTree& tree);

// Preorder (depth-first, raster child order) expansion into the split
// decisions an encoder consumes. 4x4 blocks are implied by an 8x8 Split and
// emit no entry. Throws InconsistentTreeError on an inconsistent tree.
DecisionSeq to_decisions(const PartitionTree& tree);

// The coded blocks. Rectangles tile the 64x64 area exactly, in coding order.
std::vector<LeafBlock> leaf_blocks(const PartitionTree& tree);

// 85 i.i.d. draws from class_probs (4 nonnegative entries summing to 1
// within 1e-9, else BadDistributionError). Deterministic per seed.
PartitionTree random_tree(std::uint64_t seed, const std::array<double, 4>& class_probs);

// Four lines of space-separated integers, levels 3 down to 0.
std::string dump_tree(const PartitionTree& tree);
PartitionTree parse_tree(const std::string& text);

}  // namespace partpredict

#endif
