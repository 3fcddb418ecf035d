#include "partpredict/content.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "partpredict/errors.hpp"
#include "partpredict/util.hpp"

namespace partpredict {

namespace {

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
}

// Smooth luminance ramp with random orientation and a mild sinusoidal sweep.
Frame gradient_frame(int w, int h, Rng& rng, double drift) {
  Frame f(w, h);
  const double base = rng.uniform(40.0, 215.0);
  const double gx = rng.uniform(-1.2, 1.2);
  const double gy = rng.uniform(-1.2, 1.2);
  const double wave = rng.uniform(0.0, 18.0);
  const double period = rng.uniform(90.0, 260.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = base + gx * (x + drift) + gy * y +
                       wave * std::sin((x + drift + 2.0 * y) * 6.2831853 / period);
      f.at(y, x) = clamp_u8(v);
    }
  }
  return f;
}

Frame checker_frame(int w, int h, Rng& rng, double drift) {
  Frame f(w, h);
  const int cell = 1 << rng.uniform_int(2, 5);  // 4..32 px
  const int lo = static_cast<int>(rng.uniform_int(10, 90));
  const int hi = static_cast<int>(rng.uniform_int(160, 245));
  const int phase = static_cast<int>(drift);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool on = (((x + phase) / cell) + (y / cell)) % 2 == 0;
      f.at(y, x) = static_cast<std::uint8_t>(on ? hi : lo);
    }
  }
  return f;
}

// White noise passed through a few box blurs; the blur radius sets the
// texture scale the partition search reacts to.
Frame noise_blur_frame(int w, int h, Rng& rng, double drift) {
  std::vector<double> a(static_cast<std::size_t>(w) * h);
  for (double& v : a) v = rng.uniform(0.0, 255.0);
  const int passes = static_cast<int>(rng.uniform_int(0, 3));
  std::vector<double> b(a.size());
  for (int p = 0; p < passes; ++p) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double sum = 0.0;
        int count = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy >= 0 && yy < h && xx >= 0 && xx < w) {
              sum += a[static_cast<std::size_t>(yy) * w + xx];
              ++count;
            }
          }
        }
        b[static_cast<std::size_t>(y) * w + x] = sum / count;
      }
    }
    std::swap(a, b);
  }
  Frame f(w, h);
  const double offset = drift * 0.5;
  for (std::size_t i = 0; i < a.size(); ++i) f.px[i] = clamp_u8(a[i] + offset);
  return f;
}

// High-contrast strokes on a flat background, loosely text-like.
Frame edges_frame(int w, int h, Rng& rng, double drift) {
  Frame f(w, h);
  const std::uint8_t bg = static_cast<std::uint8_t>(rng.uniform_int(170, 235));
  std::fill(f.px.begin(), f.px.end(), bg);
  const int strokes = static_cast<int>(rng.uniform_int(24, 60));
  for (int s = 0; s < strokes; ++s) {
    const bool horizontal = rng.uniform() < 0.5;
    const std::uint8_t ink = static_cast<std::uint8_t>(rng.uniform_int(5, 70));
    const int thickness = static_cast<int>(rng.uniform_int(1, 6));
    const int len = static_cast<int>(rng.uniform_int(8, std::max(9, w / 3)));
    const int y = static_cast<int>(rng.uniform_int(0, h - 1));
    const int x = static_cast<int>((rng.uniform_int(0, w - 1) + static_cast<std::int64_t>(drift)) % w);
    for (int t = 0; t < thickness; ++t) {
      for (int l = 0; l < len; ++l) {
        const int yy = horizontal ? y + t : y + l;
        const int xx = horizontal ? x + l : x + t;
        if (yy >= 0 && yy < h && xx >= 0 && xx < w) f.at(yy, xx) = ink;
      }
    }
  }
  return f;
}

Frame tile_mixed_frame(int w, int h, Rng& rng, double drift) {
  Frame f(w, h);
  for (int ty = 0; ty < h; ty += 64) {
    for (int tx = 0; tx < w; tx += 64) {
      const int kind = static_cast<int>(rng.uniform_int(0, 3));
      Rng tile_rng(rng.next_u64());
      const int tw = std::min(64, w - tx);
      const int th = std::min(64, h - ty);
      Frame tile;
      switch (kind) {
        case 0: tile = gradient_frame(tw, th, tile_rng, drift); break;
        case 1: tile = checker_frame(tw, th, tile_rng, drift); break;
        case 2: tile = noise_blur_frame(tw, th, tile_rng, drift); break;
        default: tile = edges_frame(tw, th, tile_rng, drift); break;
      }
      for (int y = 0; y < th; ++y) {
        for (int x = 0; x < tw; ++x) f.at(ty + y, tx + x) = tile.at(y, x);
      }
    }
  }
  return f;
}

Frame frame_for(ContentKind kind, int w, int h, Rng& rng, double drift) {
  switch (kind) {
    case ContentKind::kGradient: return gradient_frame(w, h, rng, drift);
    case ContentKind::kChecker: return checker_frame(w, h, rng, drift);
    case ContentKind::kNoiseBlur: return noise_blur_frame(w, h, rng, drift);
    case ContentKind::kEdges: return edges_frame(w, h, rng, drift);
    case ContentKind::kConstantGray: {
      Frame f(w, h);
      std::fill(f.px.begin(), f.px.end(), static_cast<std::uint8_t>(128));
      return f;
    }
    case ContentKind::kMixed:
    default: return tile_mixed_frame(w, h, rng, drift);
  }
}

}  // namespace

ContentKind content_kind_from_name(const std::string& name) {
  if (name == "gradient") return ContentKind::kGradient;
  if (name == "checker") return ContentKind::kChecker;
  if (name == "noise") return ContentKind::kNoiseBlur;
  if (name == "edges") return ContentKind::kEdges;
  if (name == "gray") return ContentKind::kConstantGray;
  if (name == "mixed") return ContentKind::kMixed;
  throw ConfigError("unknown content kind '" + name + "'");
}

std::string content_kind_name(ContentKind kind) {
  switch (kind) {
    case ContentKind::kGradient: return "gradient";
    case ContentKind::kChecker: return "checker";
    case ContentKind::kNoiseBlur: return "noise";
    case ContentKind::kEdges: return "edges";
    case ContentKind::kConstantGray: return "gray";
    case ContentKind::kMixed: return "mixed";
  }
  return "mixed";
}

Frame make_frame(ContentKind kind, int width, int height, std::uint64_t seed) {
  if (width <= 0 || height <= 0) throw RangeError("frame dimensions must be positive");
  Rng rng(seed);
  return frame_for(kind, width, height, rng, 0.0);
}

std::vector<Frame> make_sequence(ContentKind kind, int width, int height, int frame_count,
                                 std::uint64_t seed) {
  if (frame_count <= 0) throw RangeError("frame count must be positive");
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(frame_count));
  for (int i = 0; i < frame_count; ++i) {
    // Same base seed per frame keeps the pattern parameters stable; the drift
    // argument moves it a little, like motion.
    Rng rng(seed);
    frames.push_back(frame_for(kind, width, height, rng, 1.5 * i));
  }
  return frames;
}

Frame read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  auto next_token = [&in, &path]() {
    std::string tok;
    while (true) {
      int c = in.get();
      if (c == EOF) throw IoError("truncated PGM header in '" + path + "'");
      if (c == '#') {
        while (c != EOF && c != '\n') c = in.get();
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(static_cast<char>(c));
    }
  };
  if (next_token() != "P5") throw IoError("'" + path + "' is not a binary PGM (P5)");
  const int width = std::stoi(next_token());
  const int height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (width <= 0 || height <= 0) throw IoError("bad PGM dimensions in '" + path + "'");
  if (maxval != 255) throw IoError("only 8-bit PGM (maxval 255) is supported");
  Frame f(width, height);
  in.read(reinterpret_cast<char*>(f.px.data()), static_cast<std::streamsize>(f.px.size()));
  if (in.gcount() != static_cast<std::streamsize>(f.px.size())) {
    throw IoError("truncated PGM pixel data in '" + path + "'");
  }
  return f;
}

void write_pgm(const Frame& frame, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "P5\n" << frame.width << " " << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.px.data()),
            static_cast<std::streamsize>(frame.px.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace partpredict
