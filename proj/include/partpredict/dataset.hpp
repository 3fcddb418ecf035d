#ifndef PARTPREDICT_DATASET_HPP
#define PARTPREDICT_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "partpredict/content.hpp"
#include "partpredict/parttree.hpp"
#include "partpredict/rdosim.hpp"
#include "partpredict/util.hpp"

namespace partpredict {

// One labeled training sample: superblock pixels, QP, canonical label tree.
struct SampleRecord {
  Superblock sb;
  int q = 8;
  PartitionTree labels;

  bool operator==(const SampleRecord&) const = default;
};

// Fixed-stride little-endian file layout:
//   header: magic "VP9PARTS" | u16 version=1 | u64 sample_count | 6 zero bytes
//   record: u16 q | 85 label bytes (levels 3,2,1,0 row-major) | 4096 pixels
inline constexpr char kDatasetMagic[8] = {'V', 'P', '9', 'P', 'A', 'R', 'T', 'S'};
inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 24;
inline constexpr std::size_t kRecordBytes = 2 + kTreeElementCount + kSuperblockPixels;

// Non-overlapping 64x64 luma blocks in raster order; partial boundary blocks
// are dropped. Throws FrameTooSmallError below 64x64.
std::vector<Superblock> extract_superblocks(const Frame& frame);

// QP source for dataset generation; draws are restricted to [8, 105].
class QSampler {
 public:
  static QSampler uniform_range(int lo, int hi);
  static QSampler fixed_set(std::vector<int> values);

  int draw(Rng& rng) const;
  const std::vector<int>& values() const { return values_; }

 private:
  QSampler() = default;
  int lo_ = 8;
  int hi_ = 105;
  std::vector<int> values_;  // empty means range mode
};

struct GenerateOptions {
  QSampler sampler = QSampler::uniform_range(8, 105);
  int q_per_superblock = 1;
  std::uint64_t seed = 1;
  int threads = 1;
};

// Labels every superblock of every source frame with the partition search.
// Record order and content are deterministic for a fixed seed regardless of
// thread count (QPs are drawn up front; labeling is pure).
std::vector<SampleRecord> generate_records(const std::vector<Frame>& sources,
                                           const GenerateOptions& options);

void write_dataset(const std::vector<SampleRecord>& records, const std::string& path);

// generate_records + write_dataset.
void generate_dataset(const std::vector<Frame>& sources, const GenerateOptions& options,
                      const std::string& path);

std::uint64_t dataset_sample_count(const std::string& path);

// Reads records [offset, offset+n). CorruptFileError on bad magic, version or
// size mismatch; RangeError when the window exceeds sample_count.
std::vector<SampleRecord> load_batch(const std::string& path, std::uint64_t offset,
                                     std::uint64_t n);

std::vector<SampleRecord> load_all(const std::string& path);

// Deterministic shuffle-then-split; train gets floor(fraction * count).
void split_dataset(const std::string& input_path, double fraction, std::uint64_t seed,
                   const std::string& train_path, const std::string& val_path);

}  // namespace partpredict

#endif
