#ifndef PARTPREDICT_CONTENT_HPP
#define PARTPREDICT_CONTENT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "partpredict/rdosim.hpp"

namespace partpredict {

// 8-bit luma frame, row-major.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> px;

  Frame() = default;
  Frame(int w, int h) : width(w), height(h), px(static_cast<std::size_t>(w) * h, 0) {}
  std::uint8_t at(int row, int col) const { return px[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t& at(int row, int col) { return px[static_cast<std::size_t>(row) * width + col]; }
};

// Procedural sources. Each kind produces markedly different partition
// statistics: smooth ramps merge almost everywhere, fine checkerboards and
// stroke patterns split down to small blocks at low QP, blurred noise sits
// in between. kMixed tiles a frame from all kinds.
enum class ContentKind { kGradient, kChecker, kNoiseBlur, kEdges, kConstantGray, kMixed };

ContentKind content_kind_from_name(const std::string& name);  // ConfigError
std::string content_kind_name(ContentKind kind);

Frame make_frame(ContentKind kind, int width, int height, std::uint64_t seed);

// A short clip: frame i is the kind's pattern with seed-stable parameters and
// a small per-frame drift, so consecutive frames resemble video.
std::vector<Frame> make_sequence(ContentKind kind, int width, int height, int frame_count,
                                 std::uint64_t seed);

// Binary 8-bit PGM (P5), maxval 255.
Frame read_pgm(const std::string& path);
void write_pgm(const Frame& frame, const std::string& path);

}  // namespace partpredict

#endif
