#include "partpredict/rdosim.hpp"

#include <algorithm>
#include <cmath>

#include "partpredict/util.hpp"

namespace partpredict {

namespace {

constexpr int kSb = kSuperblockSize;

bool valid_block_shape(int w, int h) {
  auto ok_side = [](int s) { return s == 4 || s == 8 || s == 16 || s == 32 || s == 64; };
  if (!ok_side(w) || !ok_side(h)) return false;
  return w == h || w == 2 * h || h == 2 * w;
}

struct Borders {
  std::array<std::uint8_t, kSb> top{};
  std::array<std::uint8_t, kSb> left{};
  bool has_top = false;
  bool has_left = false;
};

Borders gather_borders(const Superblock& plane, const BlockRect& r) {
  Borders b;
  if (r.row > 0) {
    b.has_top = true;
    const std::uint8_t* src = plane.row(r.row - 1) + r.col;
    std::copy(src, src + r.width, b.top.begin());
  }
  if (r.col > 0) {
    b.has_left = true;
    for (int y = 0; y < r.height; ++y) b.left[y] = plane.at(r.row + y, r.col - 1);
  }
  return b;
}

// DC value: rounded mean of the available border samples, 128 if none.
int dc_value(const Borders& b, int w, int h) {
  int sum = 0;
  int count = 0;
  if (b.has_top) {
    for (int x = 0; x < w; ++x) sum += b.top[x];
    count += w;
  }
  if (b.has_left) {
    for (int y = 0; y < h; ++y) sum += b.left[y];
    count += h;
  }
  if (count == 0) return 128;
  return (sum + count / 2) / count;
}

struct ModeChoice {
  PredMode mode = PredMode::kDc;
  double sse = 0.0;
  int dc = 128;
  Borders borders;
};

ModeChoice choose_mode(const Superblock& source, const Superblock& border_plane,
                       const BlockRect& r) {
  ModeChoice m;
  m.borders = gather_borders(border_plane, r);
  m.dc = dc_value(m.borders, r.width, r.height);

  std::int64_t sse_dc = 0, sse_h = 0, sse_v = 0;
  for (int y = 0; y < r.height; ++y) {
    const std::uint8_t* src = source.row(r.row + y) + r.col;
    const int hv = m.borders.has_left ? m.borders.left[y] : 128;
    for (int x = 0; x < r.width; ++x) {
      const int s = src[x];
      const int dd = s - m.dc;
      const int dh = s - hv;
      const int dv = s - (m.borders.has_top ? m.borders.top[x] : 128);
      sse_dc += dd * dd;
      sse_h += dh * dh;
      sse_v += dv * dv;
    }
  }
  m.mode = PredMode::kDc;
  std::int64_t best = sse_dc;
  if (sse_h < best) {
    best = sse_h;
    m.mode = PredMode::kHorz;
  }
  if (sse_v < best) {
    best = sse_v;
    m.mode = PredMode::kVert;
  }
  m.sse = static_cast<double>(best);
  return m;
}

int predicted_pixel(const ModeChoice& m, int y, int x) {
  switch (m.mode) {
    case PredMode::kDc: return m.dc;
    case PredMode::kHorz: return m.borders.has_left ? m.borders.left[y] : 128;
    case PredMode::kVert: return m.borders.has_top ? m.borders.top[x] : 128;
  }
  return 128;
}

// Symmetric 4-point Walsh-Hadamard butterfly; the 2D transform applies it to
// rows then columns and scales by 1/4, which is orthonormal (and its own
// inverse).
inline void wht4(double& a, double& b, double& c, double& d) {
  const double s0 = a + b, s1 = c + d;
  const double d0 = a - b, d1 = c - d;
  a = s0 + s1;
  b = s0 - s1;
  c = d0 - d1;
  d = d0 + d1;
}

void wht4x4(double t[16]) {
  for (int y = 0; y < 4; ++y) wht4(t[y * 4 + 0], t[y * 4 + 1], t[y * 4 + 2], t[y * 4 + 3]);
  for (int x = 0; x < 4; ++x) wht4(t[0 + x], t[4 + x], t[8 + x], t[12 + x]);
  for (int i = 0; i < 16; ++i) t[i] *= 0.25;
}

// Codes one block: mode choice, per-4x4-tile transform + uniform quantizer,
// reconstruction and rate accounting. `recon_out` may alias `border_plane`
// (the feedback path) or be null (cost probing).
RdCost code_block(const Superblock& source, const Superblock& border_plane, int q,
                  const BlockRect& r, Superblock* recon_out) {
  const ModeChoice m = choose_mode(source, border_plane, r);
  const double qstep = qstep_for(q);
  const double lambda = lambda_for(q);

  double rate = kHeaderBits;
  double distortion = 0.0;

  double tile[16];
  for (int ty = 0; ty < r.height; ty += 4) {
    for (int tx = 0; tx < r.width; tx += 4) {
      for (int y = 0; y < 4; ++y) {
        const std::uint8_t* src = source.row(r.row + ty + y) + r.col + tx;
        for (int x = 0; x < 4; ++x) {
          tile[y * 4 + x] = src[x] - predicted_pixel(m, ty + y, tx + x);
        }
      }
      wht4x4(tile);
      for (int i = 0; i < 16; ++i) {
        const long long level = std::llround(tile[i] / qstep);
        if (level != 0) rate += std::log2(1.0 + static_cast<double>(std::llabs(level)));
        tile[i] = static_cast<double>(level) * qstep;
      }
      wht4x4(tile);
      for (int y = 0; y < 4; ++y) {
        const std::uint8_t* src = source.row(r.row + ty + y) + r.col + tx;
        for (int x = 0; x < 4; ++x) {
          const int pred = predicted_pixel(m, ty + y, tx + x);
          long long px = std::llround(pred + tile[y * 4 + x]);
          px = std::clamp<long long>(px, 0, 255);
          const double err = static_cast<double>(src[x]) - static_cast<double>(px);
          distortion += err * err;
          if (recon_out != nullptr) {
            recon_out->at(r.row + ty + y, r.col + tx + x) = static_cast<std::uint8_t>(px);
          }
        }
      }
    }
  }

  RdCost out;
  out.distortion = distortion;
  out.rate = rate;
  out.cost = distortion + lambda * rate;
  return out;
}

MergeCode code_to_merge(SplitKind k) {
  switch (k) {
    case SplitKind::kNone: return MergeCode::kFullMerge;
    case SplitKind::kHorz: return MergeCode::kHorzMerge;
    case SplitKind::kVert: return MergeCode::kVertMerge;
    default: return MergeCode::kNoMerge;
  }
}

struct SearchChoices {
  std::array<MergeCode, 64> c0{};
  std::array<MergeCode, 16> c1{};
  std::array<MergeCode, 4> c2{};
  MergeCode c3 = MergeCode::kFullMerge;

  void set(int size, int row, int col, MergeCode m) {
    switch (size) {
      case 8: c0[(row / 8) * 8 + col / 8] = m; break;
      case 16: c1[(row / 16) * 4 + col / 16] = m; break;
      case 32: c2[(row / 32) * 2 + col / 32] = m; break;
      default: c3 = m; break;
    }
  }
  MergeCode get(int size, int row, int col) const {
    switch (size) {
      case 8: return c0[(row / 8) * 8 + col / 8];
      case 16: return c1[(row / 16) * 4 + col / 16];
      case 32: return c2[(row / 32) * 2 + col / 32];
      default: return c3;
    }
  }
};

// Exhaustive search over one square block. Every sub-block is evaluated once;
// child optima compose bottom-up, so this is the full dynamic program.
double search_block(const Superblock& sb, int q, int row, int col, int size,
                    SearchChoices& choices) {
  const double lambda = lambda_for(q);
  const int half = size / 2;
  const QpValue qv(q);

  const double none = search_block_cost(sb, qv, {row, col, size, size}).cost;
  const double horz = search_block_cost(sb, qv, {row, col, size, half}).cost +
                      search_block_cost(sb, qv, {row + half, col, size, half}).cost;
  const double vert = search_block_cost(sb, qv, {row, col, half, size}).cost +
                      search_block_cost(sb, qv, {row, col + half, half, size}).cost;

  double split;
  if (size == 8) {
    split = ((search_block_cost(sb, qv, {row, col, 4, 4}).cost +
              search_block_cost(sb, qv, {row, col + 4, 4, 4}).cost) +
             search_block_cost(sb, qv, {row + 4, col, 4, 4}).cost) +
            search_block_cost(sb, qv, {row + 4, col + 4, 4, 4}).cost;
  } else {
    split = ((search_block(sb, q, row, col, half, choices) +
              search_block(sb, q, row, col + half, half, choices)) +
             search_block(sb, q, row + half, col, half, choices)) +
            search_block(sb, q, row + half, col + half, half, choices);
  }
  split += lambda * kSplitHeaderBits;

  // Tie-break toward larger blocks: None > Horz > Vert > Split.
  double best = none;
  MergeCode pick = MergeCode::kFullMerge;
  if (horz < best) {
    best = horz;
    pick = MergeCode::kHorzMerge;
  }
  if (vert < best) {
    best = vert;
    pick = MergeCode::kVertMerge;
  }
  if (split < best) {
    best = split;
    pick = MergeCode::kNoMerge;
  }
  choices.set(size, row, col, pick);
  return best;
}

// Builds the canonical tree from the per-block winning choices: only split
// subtrees are entered, everything else stays FullMerge.
void build_tree(const SearchChoices& choices, int size, int row, int col,
                PartitionTree& out) {
  const MergeCode pick = choices.get(size, row, col);
  const int level = size == 64 ? 3 : size == 32 ? 2 : size == 16 ? 1 : 0;
  out.set(level, row / size, col / size, pick);
  if (pick == MergeCode::kNoMerge && size > 8) {
    const int half = size / 2;
    build_tree(choices, half, row, col, out);
    build_tree(choices, half, row, col + half, out);
    build_tree(choices, half, row + half, col, out);
    build_tree(choices, half, row + half, col + half, out);
  }
}

struct PassTotals {
  double rate = 0.0;
  double distortion = 0.0;
};

// Encodes the tree's coded blocks in decision order; prediction borders come
// from the running reconstruction, so later blocks see their true neighbors.
PassTotals encode_pass(const Superblock& sb, int q, const PartitionTree& tree,
                       Superblock& recon) {
  PassTotals totals;
  auto code = [&](int row, int col, int w, int h) {
    const RdCost c = code_block(sb, recon, q, {row, col, w, h}, &recon);
    totals.rate += c.rate;
    totals.distortion += c.distortion;
  };
  for (const Decision& d : to_decisions(tree)) {
    const int s = d.block_size;
    const int half = s / 2;
    switch (d.kind) {
      case SplitKind::kNone:
        code(d.row, d.col, s, s);
        break;
      case SplitKind::kHorz:
        code(d.row, d.col, s, half);
        code(d.row + half, d.col, s, half);
        break;
      case SplitKind::kVert:
        code(d.row, d.col, half, s);
        code(d.row, d.col + half, half, s);
        break;
      case SplitKind::kSplit:
        totals.rate += kSplitHeaderBits;
        if (s == 8) {
          code(d.row, d.col, 4, 4);
          code(d.row, d.col + 4, 4, 4);
          code(d.row + 4, d.col, 4, 4);
          code(d.row + 4, d.col + 4, 4, 4);
        }
        break;
    }
  }
  return totals;
}

double tree_cost_rec(const Superblock& sb, QpValue q, const PartitionTree& tree,
                     int size, int row, int col, double lambda) {
  const int level = size == 64 ? 3 : size == 32 ? 2 : size == 16 ? 1 : 0;
  const MergeCode code = tree.at(level, row / size, col / size);
  const int half = size / 2;
  switch (code) {
    case MergeCode::kFullMerge:
      return search_block_cost(sb, q, {row, col, size, size}).cost;
    case MergeCode::kHorzMerge:
      return search_block_cost(sb, q, {row, col, size, half}).cost +
             search_block_cost(sb, q, {row + half, col, size, half}).cost;
    case MergeCode::kVertMerge:
      return search_block_cost(sb, q, {row, col, half, size}).cost +
             search_block_cost(sb, q, {row, col + half, half, size}).cost;
    case MergeCode::kNoMerge:
    default: {
      double sum;
      if (size == 8) {
        sum = ((search_block_cost(sb, q, {row, col, 4, 4}).cost +
                search_block_cost(sb, q, {row, col + 4, 4, 4}).cost) +
               search_block_cost(sb, q, {row + 4, col, 4, 4}).cost) +
              search_block_cost(sb, q, {row + 4, col + 4, 4, 4}).cost;
      } else {
        sum = ((tree_cost_rec(sb, q, tree, half, row, col, lambda) +
                tree_cost_rec(sb, q, tree, half, row, col + half, lambda)) +
               tree_cost_rec(sb, q, tree, half, row + half, col, lambda)) +
              tree_cost_rec(sb, q, tree, half, row + half, col + half, lambda);
      }
      return sum + lambda * kSplitHeaderBits;
    }
  }
}

}  // namespace

BlockPrediction predict_block(const Superblock& source, const Superblock& border_plane,
                              const BlockRect& rect) {
  if (!valid_block_shape(rect.width, rect.height)) {
    throw BadBlockSizeError("unsupported block shape " + std::to_string(rect.width) + "x" +
                            std::to_string(rect.height));
  }
  const ModeChoice m = choose_mode(source, border_plane, rect);
  BlockPrediction out;
  out.mode = m.mode;
  out.sse = m.sse;
  for (int y = 0; y < rect.height; ++y) {
    for (int x = 0; x < rect.width; ++x) {
      out.px[y * rect.width + x] = static_cast<std::uint8_t>(predicted_pixel(m, y, x));
    }
  }
  return out;
}

RdCost search_block_cost(const Superblock& sb, QpValue q, const BlockRect& rect) {
  if (!valid_block_shape(rect.width, rect.height)) {
    throw BadBlockSizeError("unsupported block shape");
  }
  return code_block(sb, sb, q.value(), rect, nullptr);
}

double search_tree_cost(const Superblock& sb, QpValue q, const PartitionTree& tree) {
  if (!is_consistent(tree)) {
    throw InconsistentTreeError("search_tree_cost requires a consistent tree");
  }
  return tree_cost_rec(sb, q, tree, kSb, 0, 0, lambda_for(q.value()));
}

SubSearchResult rdo_search_sub(const Superblock& sb, QpValue q, int row, int col, int size) {
  if ((size != 8 && size != 16 && size != 32 && size != 64) || row % size != 0 ||
      col % size != 0 || row + size > kSb || col + size > kSb) {
    throw BadBlockSizeError("invalid sub-search block");
  }
  SearchChoices choices;
  SubSearchResult out;
  out.cost = search_block(sb, q.value(), row, col, size, choices);
  out.choice = choices.get(size, row, col);
  return out;
}

EncodeResult rdo_search(const Superblock& sb, QpValue q) {
  Stopwatch timer;
  SearchChoices choices;
  const double best = search_block(sb, q.value(), 0, 0, kSb, choices);

  PartitionTree tree;
  tree.m3 = MergeCode::kFullMerge;
  tree.m2.fill(MergeCode::kFullMerge);
  tree.m1.fill(MergeCode::kFullMerge);
  tree.m0.fill(MergeCode::kFullMerge);
  build_tree(choices, kSb, 0, 0, tree);

  EncodeResult result;
  result.tree = tree;
  result.search_cost = best;
  const PassTotals totals = encode_pass(sb, q.value(), tree, result.reconstruction);
  result.total_rate = totals.rate;
  result.total_distortion = totals.distortion;
  result.wall_time = timer.seconds();
  return result;
}

EncodeResult encode_with_tree(const Superblock& sb, QpValue q, const PartitionTree& tree) {
  if (!is_consistent(tree)) {
    throw InconsistentTreeError("encode_with_tree requires a consistent tree");
  }
  Stopwatch timer;
  EncodeResult result;
  result.tree = tree;
  const PassTotals totals = encode_pass(sb, q.value(), tree, result.reconstruction);
  result.total_rate = totals.rate;
  result.total_distortion = totals.distortion;
  result.wall_time = timer.seconds();
  return result;
}

}  // namespace partpredict
