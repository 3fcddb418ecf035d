#include "partpredict/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "partpredict/errors.hpp"

namespace partpredict {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::vector<std::uint8_t> encode_record(const SampleRecord& rec) {
  std::vector<std::uint8_t> out;
  out.reserve(kRecordBytes);
  put_u16(out, static_cast<std::uint16_t>(rec.q));
  const auto labels = rec.labels.to_bytes();
  out.insert(out.end(), labels.begin(), labels.end());
  out.insert(out.end(), rec.sb.px.begin(), rec.sb.px.end());
  return out;
}

SampleRecord decode_record(const std::uint8_t* p) {
  SampleRecord rec;
  rec.q = get_u16(p);
  std::array<std::uint8_t, kTreeElementCount> labels{};
  for (int i = 0; i < kTreeElementCount; ++i) {
    if (p[2 + i] > 3) throw CorruptFileError("label byte out of range");
    labels[static_cast<std::size_t>(i)] = p[2 + i];
  }
  rec.labels = PartitionTree::from_bytes(labels);
  if (!is_consistent(rec.labels)) throw CorruptFileError("stored label tree is inconsistent");
  std::memcpy(rec.sb.px.data(), p + 2 + kTreeElementCount, kSuperblockPixels);
  return rec;
}

struct DatasetFile {
  std::ifstream stream;
  std::uint64_t count = 0;
};

DatasetFile open_dataset(const std::string& path) {
  DatasetFile f;
  f.stream.open(path, std::ios::binary);
  if (!f.stream) throw IoError("cannot open '" + path + "'");
  std::uint8_t header[kDatasetHeaderBytes];
  f.stream.read(reinterpret_cast<char*>(header), kDatasetHeaderBytes);
  if (f.stream.gcount() != static_cast<std::streamsize>(kDatasetHeaderBytes)) {
    throw CorruptFileError("dataset header truncated in '" + path + "'");
  }
  if (std::memcmp(header, kDatasetMagic, sizeof(kDatasetMagic)) != 0) {
    throw CorruptFileError("bad dataset magic in '" + path + "'");
  }
  if (get_u16(header + 8) != kDatasetVersion) {
    throw CorruptFileError("unsupported dataset version in '" + path + "'");
  }
  f.count = get_u64(header + 10);
  const auto expected = kDatasetHeaderBytes + f.count * kRecordBytes;
  std::error_code ec;
  const auto actual = std::filesystem::file_size(path, ec);
  if (ec || actual != expected) {
    throw CorruptFileError("dataset size mismatch in '" + path + "'");
  }
  return f;
}

}  // namespace

std::vector<Superblock> extract_superblocks(const Frame& frame) {
  if (frame.width < kSuperblockSize || frame.height < kSuperblockSize) {
    throw FrameTooSmallError("frame " + std::to_string(frame.width) + "x" +
                             std::to_string(frame.height) + " has no full superblock");
  }
  const int cols = frame.width / kSuperblockSize;
  const int rows = frame.height / kSuperblockSize;
  std::vector<Superblock> blocks;
  blocks.reserve(static_cast<std::size_t>(rows) * cols);
  for (int br = 0; br < rows; ++br) {
    for (int bc = 0; bc < cols; ++bc) {
      Superblock sb;
      for (int y = 0; y < kSuperblockSize; ++y) {
        const std::uint8_t* src =
            frame.px.data() +
            static_cast<std::size_t>(br * kSuperblockSize + y) * frame.width +
            static_cast<std::size_t>(bc) * kSuperblockSize;
        std::copy(src, src + kSuperblockSize, sb.px.begin() + y * kSuperblockSize);
      }
      blocks.push_back(sb);
    }
  }
  return blocks;
}

QSampler QSampler::uniform_range(int lo, int hi) {
  if (lo < 8 || hi > 105 || lo > hi) {
    throw RangeError("dataset QP range must lie within [8, 105]");
  }
  QSampler s;
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

QSampler QSampler::fixed_set(std::vector<int> values) {
  if (values.empty()) throw RangeError("QP set must not be empty");
  for (int q : values) {
    if (q < 8 || q > 105) throw RangeError("dataset QP values must lie within [8, 105]");
  }
  QSampler s;
  s.values_ = std::move(values);
  return s;
}

int QSampler::draw(Rng& rng) const {
  if (!values_.empty()) {
    return values_[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(values_.size()) - 1))];
  }
  return static_cast<int>(rng.uniform_int(lo_, hi_));
}

std::vector<SampleRecord> generate_records(const std::vector<Frame>& sources,
                                           const GenerateOptions& options) {
  if (sources.empty()) throw EmptyDatasetError("no source frames");
  if (options.q_per_superblock < 1) throw RangeError("q_per_superblock must be >= 1");

  // Draw every (superblock, q) pair up front so record order and QP values do
  // not depend on the worker count.
  Rng rng(options.seed);
  std::vector<SampleRecord> records;
  for (const Frame& frame : sources) {
    for (const Superblock& sb : extract_superblocks(frame)) {
      for (int k = 0; k < options.q_per_superblock; ++k) {
        SampleRecord rec;
        rec.sb = sb;
        rec.q = options.sampler.draw(rng);
        records.push_back(std::move(rec));
      }
    }
  }

  parallel_for(0, static_cast<std::int64_t>(records.size()), options.threads,
               [&records](std::int64_t lo, std::int64_t hi) {
                 for (std::int64_t i = lo; i < hi; ++i) {
                   SampleRecord& rec = records[static_cast<std::size_t>(i)];
                   rec.labels = rdo_search(rec.sb, QpValue(rec.q)).tree;
                 }
               });
  return records;
}

void write_dataset(const std::vector<SampleRecord>& records, const std::string& path) {
  std::vector<std::uint8_t> header;
  header.reserve(kDatasetHeaderBytes);
  header.insert(header.end(), kDatasetMagic, kDatasetMagic + sizeof(kDatasetMagic));
  put_u16(header, kDatasetVersion);
  put_u64(header, records.size());
  header.resize(kDatasetHeaderBytes, 0);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(header.data()),
            static_cast<std::streamsize>(header.size()));
  for (const SampleRecord& rec : records) {
    const auto bytes = encode_record(rec);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

void generate_dataset(const std::vector<Frame>& sources, const GenerateOptions& options,
                      const std::string& path) {
  write_dataset(generate_records(sources, options), path);
}

std::uint64_t dataset_sample_count(const std::string& path) {
  return open_dataset(path).count;
}

std::vector<SampleRecord> load_batch(const std::string& path, std::uint64_t offset,
                                     std::uint64_t n) {
  DatasetFile f = open_dataset(path);
  if (offset + n > f.count) {
    throw RangeError("requested records [" + std::to_string(offset) + ", " +
                     std::to_string(offset + n) + ") of " + std::to_string(f.count));
  }
  f.stream.seekg(static_cast<std::streamoff>(kDatasetHeaderBytes + offset * kRecordBytes));
  std::vector<std::uint8_t> buf(kRecordBytes);
  std::vector<SampleRecord> records;
  records.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    f.stream.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(kRecordBytes));
    if (f.stream.gcount() != static_cast<std::streamsize>(kRecordBytes)) {
      throw CorruptFileError("dataset record truncated in '" + path + "'");
    }
    records.push_back(decode_record(buf.data()));
  }
  return records;
}

std::vector<SampleRecord> load_all(const std::string& path) {
  return load_batch(path, 0, dataset_sample_count(path));
}

void split_dataset(const std::string& input_path, double fraction, std::uint64_t seed,
                   const std::string& train_path, const std::string& val_path) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw RangeError("split fraction must lie strictly between 0 and 1");
  }
  const std::vector<SampleRecord> records = load_all(input_path);
  if (records.empty()) throw EmptyDatasetError("cannot split an empty dataset");

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t train_count =
      static_cast<std::size_t>(fraction * static_cast<double>(records.size()));
  std::vector<SampleRecord> train, val;
  train.reserve(train_count);
  val.reserve(records.size() - train_count);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < train_count ? train : val).push_back(records[order[i]]);
  }
  write_dataset(train, train_path);
  write_dataset(val, val_path);
}

}  // namespace partpredict
