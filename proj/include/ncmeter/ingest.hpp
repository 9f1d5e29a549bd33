#pragma once

// Binary formats.
//
//   NCEMB1  embedding stream
//     "NCEMB1\0\0", u32 version=1, u32 dim, u64 declared_count (0 = unknown)
//     records: u32 label, dim x f32
//   NCWGT1  classifier weights
//     "NCWGT1\0\0", u32 version=1, u32 C, u32 d, u8 has_bias, 3 pad bytes
//     C x d f32 row-major, then C x f32 biases iff has_bias = 1
//   NCSTA1  per-class statistics
//     "NCSTA1\0\0", u32 version=1, u32 C, u32 d
//     per class: u64 count, d x f64 mean, f64 m2
//
// Everything is little-endian. Labels are 0-based token ids.

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ncmeter/binary_io.hpp"
#include "ncmeter/error.hpp"
#include "ncmeter/types.hpp"

namespace ncm {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::string_view kEmbeddingMagic = "NCEMB1";
inline constexpr std::string_view kClassifierMagic = "NCWGT1";
inline constexpr std::string_view kStatsMagic = "NCSTA1";

struct EmbeddingStreamHeader {
  std::uint32_t version = kFormatVersion;
  std::uint32_t dim = 0;
  std::uint64_t declared_count = 0;
};

// ---------------------------------------------------------------------------
// NCEMB1

class EmbeddingStreamReader {
 public:
  explicit EmbeddingStreamReader(std::istream& in, std::optional<std::uint32_t> num_classes = {})
      : reader_(in), num_classes_(num_classes) {
    reader_.expect_magic(kEmbeddingMagic);
    header_.version = reader_.get<std::uint32_t>("header");
    header_.dim = reader_.get<std::uint32_t>("header");
    header_.declared_count = reader_.get<std::uint64_t>("header");
    if (header_.version != kFormatVersion) {
      fail(ErrorKind::format, "unsupported NCEMB1 version " + std::to_string(header_.version));
    }
    if (header_.dim == 0) fail(ErrorKind::format, "NCEMB1 dim must be >= 1");
    raw_.resize(std::size_t{header_.dim} * 4);
  }

  const EmbeddingStreamHeader& header() const { return header_; }
  std::uint32_t dim() const { return header_.dim; }
  std::uint64_t records_read() const { return index_; }

  // Fills `record` with the next record; returns false at end of stream.
  bool next(EmbeddingRecord& record) {
    std::array<char, 4> label_bytes{};
    if (!reader_.read_or_eof(label_bytes.data(), 4, "record label")) {
      if (header_.declared_count != 0 && index_ != header_.declared_count) {
        fail(ErrorKind::truncation, "stream declared " + std::to_string(header_.declared_count) +
                                        " records but ended after " + std::to_string(index_));
      }
      return false;
    }
    if (header_.declared_count != 0 && index_ >= header_.declared_count) {
      fail(ErrorKind::format, "stream holds more records than the declared " +
                                  std::to_string(header_.declared_count));
    }
    reader_.read(raw_.data(), raw_.size(), "record " + std::to_string(index_));
    record.label = binary::Reader::decode<std::uint32_t>(label_bytes.data());
    if (num_classes_ && record.label >= *num_classes_) {
      fail(ErrorKind::data, "record " + std::to_string(index_) + ": label " +
                                std::to_string(record.label) + " out of range [0, " +
                                std::to_string(*num_classes_) + ")");
    }
    record.vector.resize(header_.dim);
    for (std::uint32_t k = 0; k < header_.dim; ++k) {
      float v = binary::Reader::decode<float>(raw_.data() + 4 * k);
      if (!std::isfinite(v)) {
        fail(ErrorKind::data, "record " + std::to_string(index_) + ": non-finite value at entry " +
                                  std::to_string(k));
      }
      record.vector[k] = v;
    }
    ++index_;
    return true;
  }

 private:
  binary::Reader reader_;
  std::optional<std::uint32_t> num_classes_;
  EmbeddingStreamHeader header_;
  std::vector<char> raw_;
  std::uint64_t index_ = 0;
};

inline std::vector<EmbeddingRecord> read_embedding_stream(std::istream& in) {
  EmbeddingStreamReader reader(in);
  std::vector<EmbeddingRecord> out;
  EmbeddingRecord rec;
  while (reader.next(rec)) out.push_back(rec);
  return out;
}

class EmbeddingStreamWriter {
 public:
  EmbeddingStreamWriter(std::ostream& out, std::uint32_t dim, std::uint64_t declared_count = 0)
      : out_(out), dim_(dim) {
    if (dim == 0) fail(ErrorKind::usage, "embedding dim must be >= 1");
    binary::put_magic(out_, kEmbeddingMagic);
    binary::put<std::uint32_t>(out_, kFormatVersion);
    binary::put<std::uint32_t>(out_, dim);
    binary::put<std::uint64_t>(out_, declared_count);
  }

  template <typename T>
  void write(std::uint32_t label, std::span<const T> vec) {
    if (vec.size() != dim_) {
      fail(ErrorKind::data, "record has " + std::to_string(vec.size()) + " entries, stream dim is " +
                                std::to_string(dim_));
    }
    binary::put<std::uint32_t>(out_, label);
    for (T v : vec) binary::put<float>(out_, static_cast<float>(v));
  }

  void write(const EmbeddingRecord& rec) { write(rec.label, std::span<const float>(rec.vector)); }

 private:
  std::ostream& out_;
  std::uint32_t dim_;
};

inline void write_embedding_stream(std::ostream& out, std::span<const EmbeddingRecord> records,
                                   std::uint32_t dim) {
  for (const auto& r : records) {
    if (r.vector.size() != dim) {
      fail(ErrorKind::data, "dimension mismatch: record has " + std::to_string(r.vector.size()) +
                                " entries, expected " + std::to_string(dim));
    }
  }
  EmbeddingStreamWriter writer(out, dim, records.size());
  for (const auto& r : records) writer.write(r);
}

// ---------------------------------------------------------------------------
// NCWGT1

inline ClassifierSet read_classifier(std::istream& in) {
  binary::Reader reader(in);
  reader.expect_magic(kClassifierMagic);
  auto version = reader.get<std::uint32_t>("header");
  if (version != kFormatVersion) {
    fail(ErrorKind::format, "unsupported NCWGT1 version " + std::to_string(version));
  }
  ClassifierSet set;
  set.num_classes = reader.get<std::uint32_t>("header");
  set.dim = reader.get<std::uint32_t>("header");
  auto has_bias = reader.get<std::uint8_t>("header");
  std::array<char, 3> pad{};
  reader.read(pad.data(), pad.size(), "header");
  if (has_bias > 1) fail(ErrorKind::format, "NCWGT1 has_bias must be 0 or 1");
  if (set.dim == 0) fail(ErrorKind::format, "NCWGT1 dim must be >= 1");

  std::uint64_t rows = set.num_classes;
  std::uint64_t expected = rows * set.dim * 4 + (has_bias ? rows * 4 : 0);
  if (auto left = reader.remaining(); left && *left != expected) {
    fail(ErrorKind::format, "NCWGT1 size mismatch: header implies " + std::to_string(expected) +
                                " payload bytes, stream has " + std::to_string(*left));
  }

  std::vector<char> raw(std::size_t{set.dim} * 4);
  for (std::uint64_t c = 0; c < rows; ++c) {
    reader.read(raw.data(), raw.size(), "weight row " + std::to_string(c));
    for (std::uint32_t k = 0; k < set.dim; ++k) {
      float v = binary::Reader::decode<float>(raw.data() + 4 * k);
      if (!std::isfinite(v)) {
        fail(ErrorKind::data, "weight row " + std::to_string(c) + " has a non-finite entry");
      }
      set.weights.push_back(v);
    }
  }
  if (has_bias) {
    std::vector<float> biases;
    for (std::uint64_t c = 0; c < rows; ++c) {
      float v = reader.get<float>("bias");
      if (!std::isfinite(v)) fail(ErrorKind::data, "bias " + std::to_string(c) + " is non-finite");
      biases.push_back(v);
    }
    set.biases = std::move(biases);
  }
  if (!reader.at_eof()) fail(ErrorKind::format, "NCWGT1 has trailing bytes after payload");
  return set;
}

inline void write_classifier(std::ostream& out, const ClassifierSet& set) {
  if (set.weights.size() != std::size_t{set.num_classes} * set.dim) {
    fail(ErrorKind::data, "classifier weights size does not match C x d");
  }
  if (set.biases && set.biases->size() != set.num_classes) {
    fail(ErrorKind::data, "classifier bias count does not match C");
  }
  binary::put_magic(out, kClassifierMagic);
  binary::put<std::uint32_t>(out, kFormatVersion);
  binary::put<std::uint32_t>(out, set.num_classes);
  binary::put<std::uint32_t>(out, set.dim);
  binary::put<std::uint8_t>(out, set.biases ? 1 : 0);
  for (int i = 0; i < 3; ++i) binary::put<std::uint8_t>(out, 0);
  for (float w : set.weights) binary::put<float>(out, w);
  if (set.biases) {
    for (float b : *set.biases) binary::put<float>(out, b);
  }
}

// ---------------------------------------------------------------------------
// NCSTA1

inline StatsCheckpoint read_stats(std::istream& in) {
  binary::Reader reader(in);
  reader.expect_magic(kStatsMagic);
  auto version = reader.get<std::uint32_t>("header");
  if (version != kFormatVersion) {
    fail(ErrorKind::format, "unsupported NCSTA1 version " + std::to_string(version));
  }
  auto num_classes = reader.get<std::uint32_t>("header");
  auto dim = reader.get<std::uint32_t>("header");
  if (dim == 0) fail(ErrorKind::format, "NCSTA1 dim must be >= 1");

  std::uint64_t per_class = 8 + 8 * std::uint64_t{dim} + 8;
  std::uint64_t expected = per_class * num_classes;
  if (auto left = reader.remaining(); left && *left != expected) {
    fail(ErrorKind::format, "NCSTA1 size mismatch: header implies " + std::to_string(expected) +
                                " payload bytes, stream has " + std::to_string(*left));
  }

  StatsCheckpoint stats;
  stats.dim = dim;
  std::vector<char> raw(static_cast<std::size_t>(per_class));
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    reader.read(raw.data(), raw.size(), "class " + std::to_string(c));
    ClassAccumulator acc(dim);
    acc.count = binary::Reader::decode<std::uint64_t>(raw.data());
    bool zero_mean = true;
    for (std::uint32_t k = 0; k < dim; ++k) {
      double v = binary::Reader::decode<double>(raw.data() + 8 + 8 * k);
      if (!std::isfinite(v)) {
        fail(ErrorKind::corruption, "class " + std::to_string(c) + " has a non-finite mean");
      }
      acc.mean[k] = v;
      zero_mean = zero_mean && v == 0.0;
    }
    acc.m2 = binary::Reader::decode<double>(raw.data() + 8 + 8 * std::size_t{dim});
    if (!(acc.m2 >= 0.0) || !std::isfinite(acc.m2)) {
      fail(ErrorKind::corruption, "class " + std::to_string(c) + " has m2 < 0 or non-finite");
    }
    if (acc.count <= 1 && acc.m2 != 0.0) {
      fail(ErrorKind::corruption, "class " + std::to_string(c) + " has m2 != 0 with count <= 1");
    }
    if (acc.count == 0 && !zero_mean) {
      fail(ErrorKind::corruption, "class " + std::to_string(c) + " is empty but has a nonzero mean");
    }
    stats.classes.push_back(std::move(acc));
  }
  if (!reader.at_eof()) fail(ErrorKind::format, "NCSTA1 has trailing bytes after payload");
  return stats;
}

inline void write_stats(std::ostream& out, const StatsCheckpoint& stats) {
  binary::put_magic(out, kStatsMagic);
  binary::put<std::uint32_t>(out, kFormatVersion);
  binary::put<std::uint32_t>(out, stats.num_classes());
  binary::put<std::uint32_t>(out, stats.dim);
  for (const auto& acc : stats.classes) {
    if (acc.dim() != stats.dim) fail(ErrorKind::data, "class mean length does not match dim");
    binary::put<std::uint64_t>(out, acc.count);
    for (double v : acc.mean) binary::put<double>(out, v);
    binary::put<double>(out, acc.m2);
  }
}

}  // namespace ncm
