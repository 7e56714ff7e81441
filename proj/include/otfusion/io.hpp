// Copyright 2026 The otfusion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OTFUSION_IO_HPP_
#define OTFUSION_IO_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otfusion/matrix.hpp"
#include "otfusion/prob_core.hpp"

namespace otfusion {

// .otm layout (all integers little-endian):
//   0  magic    "OTM1"
//   4  version  u32 = 1
//   8  rows     u64
//   16 cols     u64
//   24 dtype    u8 (1 = f32, 2 = f64, 3 = i64)
//   25 pad      7 zero bytes
//   32 payload  rows * cols values, row-major, little-endian
enum class DType : std::uint8_t {
  kFloat32 = 1,
  kFloat64 = 2,
  kInt64 = 3,
};

struct MatrixFileHeader {
  static constexpr std::size_t kSize = 32;
  static constexpr std::array<char, 4> kMagic = {'O', 'T', 'M', '1'};
  static constexpr std::uint32_t kVersion = 1;

  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  DType dtype = DType::kFloat64;

  std::size_t element_size() const { return dtype == DType::kFloat32 ? 4 : 8; }
};

const char* dtype_name(DType dtype);

std::array<std::uint8_t, MatrixFileHeader::kSize> encode_header(
    const MatrixFileHeader& header);

// Parses and validates a header against the total byte length of the file
// it came from. Throws FormatError carrying the offending byte offset.
MatrixFileHeader decode_header(std::span<const std::uint8_t> bytes,
                               std::uint64_t file_size);

std::vector<std::uint8_t> encode_matrix(const Matrix& m, DType dtype);
std::vector<std::uint8_t> encode_labels(std::span<const std::int64_t> labels);

// Writes to a temporary sibling and renames it over `path` on success.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);

// dtype must be kFloat32 or kFloat64; values must be finite and fit.
void write_matrix(const std::filesystem::path& path, const Matrix& m,
                  DType dtype = DType::kFloat64);
// N x 1 matrix of dtype kInt64.
void write_labels(const std::filesystem::path& path,
                  std::span<const std::int64_t> labels);

// Reads only the header; the file length is still checked against it.
MatrixFileHeader read_header(const std::filesystem::path& path);

// Real-valued matrix (f32 values widened to f64). Throws TypeError on i64.
Matrix read_matrix(const std::filesystem::path& path);
// Single-column i64 file. Throws TypeError on real dtypes.
std::vector<std::int64_t> read_labels(const std::filesystem::path& path);

struct SourceFile {
  std::string id;
  std::filesystem::path path;
};

// Dataset descriptor. Text format, one entry per line; lines starting with '#'
// are comments:
//   name <text>
//   feature <source-id> <path>      (repeatable, ordered, unique ids)
//   semantic <source-id> <path>     (repeatable, ordered, unique ids)
//   labels <path>
//   class_names <name>,<name>,...
// Relative paths are resolved against the manifest's directory.
struct Manifest {
  std::string name;
  std::vector<SourceFile> feature_files;
  std::vector<SourceFile> semantic_files;
  std::optional<std::filesystem::path> labels_path;
  std::vector<std::string> class_names;

  // Filled by validation.
  std::size_t n_samples = 0;
  std::size_t n_classes = 0;
};

// Parses without touching the filesystem.
Manifest parse_manifest(std::string_view text,
                        const std::filesystem::path& base_dir);

// Checks that every referenced file exists, carries the right dtype and
// agrees on N (and K for semantic files); fills n_samples/n_classes.
// Throws PathError, TypeError or ConsistencyError.
void validate_manifest(Manifest& manifest);

// parse_manifest + validate_manifest.
Manifest load_manifest(const std::filesystem::path& path);

// Serializes paths exactly as stored.
std::string format_manifest(const Manifest& manifest);

struct Dataset {
  std::string name;
  std::vector<std::string> feature_ids;
  std::vector<FeatureMatrix> features;
  std::vector<ProbMatrix> semantic;
  std::optional<std::vector<std::int64_t>> labels;
};

// Reads every file of a validated manifest. Semantic rows are checked at
// kIngestRowSumTol and renormalized in 64-bit.
Dataset load_dataset(const Manifest& manifest);

}  // namespace otfusion

#endif  // OTFUSION_IO_HPP_
