#ifndef PARTPREDICT_TESTS_BF_ORACLE_HPP
#define PARTPREDICT_TESTS_BF_ORACLE_HPP

// Independent brute-force oracle for the partition search: enumerates every
// partition tree of a square block and evaluates each tree's cost by direct
// recursion over its own node structure. Shares only the per-block cost
// primitive with the search under test, and composes sums in the same
// raster-then-header order so equal trees produce bit-equal costs.

#include <vector>

#include "partpredict/rdosim.hpp"

namespace partpredict::testing {

struct BfNode {
  SplitKind kind = SplitKind::kNone;
  std::vector<BfNode> children;  // four entries iff kind == kSplit and size > 8
};

inline std::vector<BfNode> enumerate_trees(int size) {
  std::vector<BfNode> out;
  out.push_back({SplitKind::kNone, {}});
  out.push_back({SplitKind::kHorz, {}});
  out.push_back({SplitKind::kVert, {}});
  if (size == 8) {
    out.push_back({SplitKind::kSplit, {}});
    return out;
  }
  const std::vector<BfNode> subs = enumerate_trees(size / 2);
  for (const BfNode& a : subs) {
    for (const BfNode& b : subs) {
      for (const BfNode& c : subs) {
        for (const BfNode& d : subs) {
          out.push_back({SplitKind::kSplit, {a, b, c, d}});
        }
      }
    }
  }
  return out;
}

inline double bf_cost(const BfNode& node, const Superblock& sb, QpValue q, int row, int col,
                      int size) {
  const int half = size / 2;
  switch (node.kind) {
    case SplitKind::kNone:
      return search_block_cost(sb, q, {row, col, size, size}).cost;
    case SplitKind::kHorz:
      return search_block_cost(sb, q, {row, col, size, half}).cost +
             search_block_cost(sb, q, {row + half, col, size, half}).cost;
    case SplitKind::kVert:
      return search_block_cost(sb, q, {row, col, half, size}).cost +
             search_block_cost(sb, q, {row, col + half, half, size}).cost;
    case SplitKind::kSplit:
    default: {
      double sum;
      if (size == 8) {
        sum = ((search_block_cost(sb, q, {row, col, 4, 4}).cost +
                search_block_cost(sb, q, {row, col + 4, 4, 4}).cost) +
               search_block_cost(sb, q, {row + 4, col, 4, 4}).cost) +
              search_block_cost(sb, q, {row + 4, col + 4, 4, 4}).cost;
      } else {
        sum = ((bf_cost(node.children[0], sb, q, row, col, half) +
                bf_cost(node.children[1], sb, q, row, col + half, half)) +
               bf_cost(node.children[2], sb, q, row + half, col, half)) +
              bf_cost(node.children[3], sb, q, row + half, col + half, half);
      }
      return sum + lambda_for(q.value()) * kSplitHeaderBits;
    }
  }
}

}  // namespace partpredict::testing

#endif
