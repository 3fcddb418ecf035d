#include "partpredict/parttree.hpp"

#include <cmath>
#include <sstream>

#include "partpredict/util.hpp"

namespace partpredict {

namespace {

MergeCode* level_ptr(PartitionTree& t, int level) {
  switch (level) {
    case 0: return t.m0.data();
    case 1: return t.m1.data();
    case 2: return t.m2.data();
    default: return &t.m3;
  }
}

const MergeCode* level_ptr(const PartitionTree& t, int level) {
  return level_ptr(const_cast<PartitionTree&>(t), level);
}

// Shared traversal: walks the decision tree and reports each decision plus
// which matrix element produced it. Assumes consistency was checked.
template <typename Fn>
void walk(const PartitionTree& tree, int size, int row, int col, Fn&& fn) {
  const int level = [&] {
    switch (size) {
      case 64: return 3;
      case 32: return 2;
      case 16: return 1;
      default: return 0;
    }
  }();
  const int dim = PartitionTree::level_dim(level);
  const int idx = (row / size) * dim + (col / size);
  const MergeCode code = level_ptr(tree, level)[idx];
  fn(size, row, col, code);
  if (code == MergeCode::kNoMerge && size > 8) {
    const int half = size / 2;
    walk(tree, half, row, col, fn);
    walk(tree, half, row, col + half, fn);
    walk(tree, half, row + half, col, fn);
    walk(tree, half, row + half, col + half, fn);
  }
}

}  // namespace

MergeCode PartitionTree::at(int level, int row, int col) const {
  return level_ptr(*this, level)[row * level_dim(level) + col];
}

void PartitionTree::set(int level, int row, int col, MergeCode code) {
  level_ptr(*this, level)[row * level_dim(level) + col] = code;
}

std::array<std::uint8_t, kTreeElementCount> PartitionTree::to_bytes() const {
  std::array<std::uint8_t, kTreeElementCount> out{};
  std::size_t pos = 0;
  for (int level = 3; level >= 0; --level) {
    const MergeCode* src = level_ptr(*this, level);
    const int count = level_dim(level) * level_dim(level);
    for (int i = 0; i < count; ++i) out[pos++] = static_cast<std::uint8_t>(src[i]);
  }
  return out;
}

PartitionTree PartitionTree::from_bytes(
    const std::array<std::uint8_t, kTreeElementCount>& bytes) {
  PartitionTree t;
  std::size_t pos = 0;
  for (int level = 3; level >= 0; --level) {
    MergeCode* dst = level_ptr(t, level);
    const int count = level_dim(level) * level_dim(level);
    for (int i = 0; i < count; ++i) dst[i] = static_cast<MergeCode>(bytes[pos++] & 3u);
  }
  return t;
}

bool is_consistent(const PartitionTree& tree) {
  for (int level = 2; level >= 0; --level) {
    const int dim = PartitionTree::level_dim(level);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) {
        if (tree.at(level + 1, r / 2, c / 2) == MergeCode::kFullMerge &&
            tree.at(level, r, c) != MergeCode::kFullMerge) {
          return false;
        }
      }
    }
  }
  return true;
}

PartitionTree correct_top_down(const PartitionTree& tree) {
  PartitionTree out = tree;
  for (int level = 2; level >= 0; --level) {
    const int dim = PartitionTree::level_dim(level);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) {
        if (out.at(level + 1, r / 2, c / 2) == MergeCode::kFullMerge) {
          out.set(level, r, c, MergeCode::kFullMerge);
        }
      }
    }
  }
  return out;
}

PartitionTree canonicalize(const PartitionTree& tree) {
  if (!is_consistent(tree)) {
    throw InconsistentTreeError("canonicalize requires a consistent tree");
  }
  PartitionTree out;
  out.m3 = MergeCode::kFullMerge;
  out.m2.fill(MergeCode::kFullMerge);
  out.m1.fill(MergeCode::kFullMerge);
  out.m0.fill(MergeCode::kFullMerge);
  walk(tree, 64, 0, 0, [&](int size, int row, int col, MergeCode code) {
    const int level = size == 64 ? 3 : size == 32 ? 2 : size == 16 ? 1 : 0;
    out.set(level, row / size, col / size, code);
  });
  return out;
}

DecisionSeq to_decisions(const PartitionTree& tree) {
  if (!is_consistent(tree)) {
    throw InconsistentTreeError("to_decisions requires a consistent tree");
  }
  DecisionSeq seq;
  walk(tree, 64, 0, 0, [&](int size, int row, int col, MergeCode code) {
    const SplitKind kind = code == MergeCode::kNoMerge     ? SplitKind::kSplit
                           : code == MergeCode::kHorzMerge ? SplitKind::kHorz
                           : code == MergeCode::kVertMerge ? SplitKind::kVert
                                                           : SplitKind::kNone;
    seq.push_back({size, row, col, kind});
  });
  return seq;
}

std::vector<LeafBlock> leaf_blocks(const PartitionTree& tree) {
  if (!is_consistent(tree)) {
    throw InconsistentTreeError("leaf_blocks requires a consistent tree");
  }
  std::vector<LeafBlock> leaves;
  walk(tree, 64, 0, 0, [&](int size, int row, int col, MergeCode code) {
    const int half = size / 2;
    switch (code) {
      case MergeCode::kFullMerge:
        leaves.push_back({size, size, row, col});
        break;
      case MergeCode::kHorzMerge:
        leaves.push_back({size, half, row, col});
        leaves.push_back({size, half, row + half, col});
        break;
      case MergeCode::kVertMerge:
        leaves.push_back({half, size, row, col});
        leaves.push_back({half, size, row, col + half});
        break;
      case MergeCode::kNoMerge:
        if (size == 8) {
          leaves.push_back({4, 4, row, col});
          leaves.push_back({4, 4, row, col + 4});
          leaves.push_back({4, 4, row + 4, col});
          leaves.push_back({4, 4, row + 4, col + 4});
        }
        break;
    }
  });
  return leaves;
}

PartitionTree random_tree(std::uint64_t seed, const std::array<double, 4>& class_probs) {
  double sum = 0.0;
  for (double p : class_probs) {
    if (!(p >= 0.0)) throw BadDistributionError("class probabilities must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw BadDistributionError("class probabilities must sum to 1");
  }
  Rng rng(seed);
  PartitionTree t;
  auto draw = [&] {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int j = 0; j < 3; ++j) {
      acc += class_probs[static_cast<std::size_t>(j)];
      if (u < acc) return static_cast<MergeCode>(j);
    }
    return MergeCode::kFullMerge;
  };
  for (int level = 3; level >= 0; --level) {
    const int dim = PartitionTree::level_dim(level);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) t.set(level, r, c, draw());
    }
  }
  return t;
}

std::string dump_tree(const PartitionTree& tree) {
  std::ostringstream out;
  for (int level = 3; level >= 0; --level) {
    const int dim = PartitionTree::level_dim(level);
    for (int i = 0; i < dim * dim; ++i) {
      if (i) out << ' ';
      out << static_cast<int>(level_ptr(tree, level)[i]);
    }
    out << '\n';
  }
  return out.str();
}

PartitionTree parse_tree(const std::string& text) {
  std::istringstream in(text);
  PartitionTree t;
  for (int level = 3; level >= 0; --level) {
    MergeCode* dst = level_ptr(t, level);
    const int count = PartitionTree::level_dim(level) * PartitionTree::level_dim(level);
    for (int i = 0; i < count; ++i) {
      int v = 0;
      if (!(in >> v) || v < 0 || v > 3) {
        throw CorruptFileError("malformed partition tree dump");
      }
      dst[i] = static_cast<MergeCode>(v);
    }
  }
  return t;
}

}  // namespace partpredict
