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

#include "otfusion/io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "otfusion/errors.hpp"

namespace otfusion {

namespace fs = std::filesystem;

namespace {

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int b = 0; b < bytes; ++b) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t offset,
                     int bytes) {
  std::uint64_t v = 0;
  for (int b = 0; b < bytes; ++b) {
    v |= static_cast<std::uint64_t>(in[offset + b]) << (8 * b);
  }
  return v;
}

std::vector<std::uint8_t> read_bytes(std::ifstream& in, std::size_t count,
                                     const fs::path& path) {
  std::vector<std::uint8_t> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw PathError("short read from " + path.string());
  }
  return buf;
}

struct OpenedFile {
  std::ifstream stream;
  MatrixFileHeader header;
};

OpenedFile open_matrix_file(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw PathError("no such file: " + path.string());
  }
  const std::uint64_t size = fs::file_size(path, ec);
  if (ec) throw PathError("cannot stat " + path.string());
  OpenedFile f{std::ifstream(path, std::ios::binary), {}};
  if (!f.stream) throw PathError("cannot open " + path.string());
  const std::size_t head =
      static_cast<std::size_t>(std::min<std::uint64_t>(size, MatrixFileHeader::kSize));
  const auto bytes = read_bytes(f.stream, head, path);
  f.header = decode_header(bytes, size);
  return f;
}

}  // namespace

const char* dtype_name(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return "f32";
    case DType::kFloat64: return "f64";
    case DType::kInt64: return "i64";
  }
  return "?";
}

std::array<std::uint8_t, MatrixFileHeader::kSize> encode_header(
    const MatrixFileHeader& header) {
  std::vector<std::uint8_t> v;
  v.reserve(MatrixFileHeader::kSize);
  for (char c : MatrixFileHeader::kMagic) v.push_back(static_cast<std::uint8_t>(c));
  put_le(v, MatrixFileHeader::kVersion, 4);
  put_le(v, header.rows, 8);
  put_le(v, header.cols, 8);
  v.push_back(static_cast<std::uint8_t>(header.dtype));
  v.resize(MatrixFileHeader::kSize, 0);
  std::array<std::uint8_t, MatrixFileHeader::kSize> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

MatrixFileHeader decode_header(std::span<const std::uint8_t> bytes,
                               std::uint64_t file_size) {
  // Magic bytes are checked one at a time so a short file with a bad prefix
  // reports the bad byte rather than the truncation.
  for (std::size_t b = 0; b < MatrixFileHeader::kMagic.size(); ++b) {
    if (b >= bytes.size()) break;
    if (bytes[b] != static_cast<std::uint8_t>(MatrixFileHeader::kMagic[b])) {
      throw FormatError(b, "bad magic (expected \"OTM1\")");
    }
  }
  if (bytes.size() < MatrixFileHeader::kSize) {
    throw FormatError(bytes.size(), "truncated header (" +
                                        std::to_string(bytes.size()) +
                                        " of 32 bytes)");
  }
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != MatrixFileHeader::kVersion) {
    throw FormatError(4, "unsupported version " + std::to_string(version));
  }
  MatrixFileHeader h;
  h.rows = get_le(bytes, 8, 8);
  h.cols = get_le(bytes, 16, 8);
  const std::uint8_t dtype = bytes[24];
  if (dtype < 1 || dtype > 3) {
    throw FormatError(24, "unknown dtype " + std::to_string(dtype));
  }
  h.dtype = static_cast<DType>(dtype);
  for (std::size_t b = 25; b < MatrixFileHeader::kSize; ++b) {
    if (bytes[b] != 0) throw FormatError(b, "non-zero header padding");
  }

  // Payload size, guarding against overflow before comparing with the
  // actual file length.
  const std::uint64_t elem = h.element_size();
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t room = file_size - MatrixFileHeader::kSize;
  if (h.cols != 0 && h.rows > max / h.cols) {
    throw FormatError(MatrixFileHeader::kSize,
                      "declared shape overflows; file truncated");
  }
  const std::uint64_t count = h.rows * h.cols;
  if (count > room / elem) {
    throw FormatError(file_size, "truncated payload: declared " +
                                     std::to_string(h.rows) + "x" +
                                     std::to_string(h.cols) + " " +
                                     dtype_name(h.dtype) + " needs " +
                                     std::to_string(count) + " values");
  }
  const std::uint64_t expected = MatrixFileHeader::kSize + count * elem;
  if (file_size != expected) {
    throw FormatError(expected, "trailing bytes after payload (file is " +
                                    std::to_string(file_size) + " bytes)");
  }
  return h;
}

std::vector<std::uint8_t> encode_matrix(const Matrix& m, DType dtype) {
  if (dtype == DType::kInt64) {
    throw TypeError("real matrix cannot be written as i64");
  }
  MatrixFileHeader h{m.rows(), m.cols(), dtype};
  const auto head = encode_header(h);
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.reserve(MatrixFileHeader::kSize + m.size() * h.element_size());
  for (double v : m.values()) {
    if (!std::isfinite(v)) throw InvalidInputError("cannot write non-finite value");
    if (dtype == DType::kFloat32) {
      if (std::abs(v) > std::numeric_limits<float>::max()) {
        throw InvalidInputError("value out of f32 range");
      }
      put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
    } else {
      put_le(out, std::bit_cast<std::uint64_t>(v), 8);
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_labels(std::span<const std::int64_t> labels) {
  MatrixFileHeader h{labels.size(), 1, DType::kInt64};
  const auto head = encode_header(h);
  std::vector<std::uint8_t> out(head.begin(), head.end());
  for (std::int64_t v : labels) put_le(out, static_cast<std::uint64_t>(v), 8);
  return out;
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PathError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw PathError("write failed for " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw PathError("cannot rename into " + path.string());
  }
}

void write_matrix(const fs::path& path, const Matrix& m, DType dtype) {
  write_file_atomic(path, encode_matrix(m, dtype));
}

void write_labels(const fs::path& path, std::span<const std::int64_t> labels) {
  write_file_atomic(path, encode_labels(labels));
}

MatrixFileHeader read_header(const fs::path& path) {
  return open_matrix_file(path).header;
}

Matrix read_matrix(const fs::path& path) {
  OpenedFile f = open_matrix_file(path);
  const MatrixFileHeader& h = f.header;
  if (h.dtype == DType::kInt64) {
    throw TypeError(path.string() + " holds i64 values, expected a real matrix");
  }
  const std::size_t count = h.rows * h.cols;
  const auto payload = read_bytes(f.stream, count * h.element_size(), path);
  std::vector<double> data(count);
  for (std::size_t t = 0; t < count; ++t) {
    if (h.dtype == DType::kFloat32) {
      data[t] = std::bit_cast<float>(
          static_cast<std::uint32_t>(get_le(payload, 4 * t, 4)));
    } else {
      data[t] = std::bit_cast<double>(get_le(payload, 8 * t, 8));
    }
  }
  return Matrix(h.rows, h.cols, std::move(data));
}

std::vector<std::int64_t> read_labels(const fs::path& path) {
  OpenedFile f = open_matrix_file(path);
  const MatrixFileHeader& h = f.header;
  if (h.dtype != DType::kInt64) {
    throw TypeError(path.string() + " holds " + dtype_name(h.dtype) +
                    " values, expected i64 labels");
  }
  if (h.cols != 1) {
    throw ShapeError(path.string() + " has " + std::to_string(h.cols) +
                     " columns, labels need exactly 1");
  }
  const auto payload = read_bytes(f.stream, h.rows * 8, path);
  std::vector<std::int64_t> labels(h.rows);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    labels[t] = static_cast<std::int64_t>(get_le(payload, 8 * t, 8));
  }
  return labels;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Splits off the first whitespace-delimited token.
std::pair<std::string_view, std::string_view> split_token(std::string_view s) {
  s = trim(s);
  const auto p = s.find_first_of(" \t");
  if (p == std::string_view::npos) return {s, {}};
  return {s.substr(0, p), trim(s.substr(p))};
}

}  // namespace

Manifest parse_manifest(std::string_view text, const fs::path& base_dir) {
  Manifest m;
  auto resolve = [&](std::string_view p) {
    fs::path path{std::string(p)};
    return path.is_relative() ? base_dir / path : path;
  };
  std::size_t line_no = 0;
  bool have_name = false, have_labels = false, have_classes = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;

    auto fail = [&](const std::string& why) {
      return InvalidInputError("manifest line " + std::to_string(line_no) +
                               ": " + why);
    };
    auto [key, rest] = split_token(line);
    if (key == "name") {
      if (have_name) throw fail("duplicate 'name'");
      if (rest.empty()) throw fail("'name' needs a value");
      m.name = std::string(rest);
      have_name = true;
    } else if (key == "feature" || key == "semantic") {
      auto [id, path] = split_token(rest);
      if (id.empty() || path.empty()) {
        throw fail("expected '" + std::string(key) + " <source-id> <path>'");
      }
      auto& list = key == "feature" ? m.feature_files : m.semantic_files;
      for (const auto& f : list) {
        if (f.id == id) throw fail("duplicate " + std::string(key) + " id '" + f.id + "'");
      }
      list.push_back({std::string(id), resolve(path)});
    } else if (key == "labels") {
      if (have_labels) throw fail("duplicate 'labels'");
      if (rest.empty()) throw fail("'labels' needs a path");
      m.labels_path = resolve(rest);
      have_labels = true;
    } else if (key == "class_names") {
      if (have_classes) throw fail("duplicate 'class_names'");
      have_classes = true;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto name = trim(rest.substr(0, comma));
        if (name.empty()) throw fail("empty class name");
        m.class_names.emplace_back(name);
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
      }
    } else {
      throw fail("unknown key '" + std::string(key) + "'");
    }
  }
  if (m.semantic_files.empty()) {
    throw InvalidInputError("manifest lists no semantic file");
  }
  return m;
}

void validate_manifest(Manifest& m) {
  std::optional<std::pair<std::uint64_t, fs::path>> first_n;
  auto check_rows = [&](const fs::path& p, std::uint64_t rows) {
    if (!first_n) {
      first_n = {rows, p};
    } else if (first_n->first != rows) {
      throw ConsistencyError("sample count mismatch: " +
                             first_n->second.string() + " has " +
                             std::to_string(first_n->first) + " rows, " +
                             p.string() + " has " + std::to_string(rows));
    }
  };
  auto header_of = [](const fs::path& p) {
    std::error_code ec;
    if (!fs::exists(p, ec)) throw PathError("missing file: " + p.string());
    return read_header(p);
  };

  for (const auto& f : m.feature_files) {
    const auto h = header_of(f.path);
    if (h.dtype == DType::kInt64) {
      throw TypeError("feature file " + f.path.string() + " holds i64 values");
    }
    check_rows(f.path, h.rows);
  }
  std::optional<std::pair<std::uint64_t, fs::path>> first_k;
  for (const auto& f : m.semantic_files) {
    const auto h = header_of(f.path);
    if (h.dtype == DType::kInt64) {
      throw TypeError("semantic file " + f.path.string() + " holds i64 values");
    }
    check_rows(f.path, h.rows);
    if (!first_k) {
      first_k = {h.cols, f.path};
    } else if (first_k->first != h.cols) {
      throw ConsistencyError("class count mismatch: " +
                             first_k->second.string() + " has " +
                             std::to_string(first_k->first) + " columns, " +
                             f.path.string() + " has " + std::to_string(h.cols));
    }
  }
  if (m.labels_path) {
    const auto h = header_of(*m.labels_path);
    if (h.dtype != DType::kInt64 || h.cols != 1) {
      throw TypeError("labels file " + m.labels_path->string() +
                      " must be a single i64 column");
    }
    check_rows(*m.labels_path, h.rows);
  }
  m.n_samples = static_cast<std::size_t>(first_n->first);
  m.n_classes = static_cast<std::size_t>(first_k->first);
  if (!m.class_names.empty() && m.class_names.size() != m.n_classes) {
    throw ConsistencyError("manifest names " +
                           std::to_string(m.class_names.size()) +
                           " classes but semantic files have " +
                           std::to_string(m.n_classes));
  }
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open manifest " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  Manifest m = parse_manifest(text.str(), path.parent_path());
  if (m.name.empty()) m.name = path.stem().string();
  validate_manifest(m);
  return m;
}

std::string format_manifest(const Manifest& m) {
  std::ostringstream out;
  if (!m.name.empty()) out << "name " << m.name << "\n";
  for (const auto& f : m.feature_files) {
    out << "feature " << f.id << " " << f.path.string() << "\n";
  }
  for (const auto& f : m.semantic_files) {
    out << "semantic " << f.id << " " << f.path.string() << "\n";
  }
  if (m.labels_path) out << "labels " << m.labels_path->string() << "\n";
  if (!m.class_names.empty()) {
    out << "class_names ";
    for (std::size_t c = 0; c < m.class_names.size(); ++c) {
      out << (c ? "," : "") << m.class_names[c];
    }
    out << "\n";
  }
  return out.str();
}

Dataset load_dataset(const Manifest& m) {
  Dataset d;
  d.name = m.name;
  for (const auto& f : m.feature_files) {
    d.feature_ids.push_back(f.id);
    d.features.emplace_back(read_matrix(f.path));
  }
  for (const auto& f : m.semantic_files) {
    try {
      d.semantic.push_back(ProbMatrix::ingest(read_matrix(f.path)));
    } catch (const InvalidInputError& e) {
      throw InvalidInputError(f.path.string() + ": " + e.what());
    }
  }
  if (m.labels_path) {
    auto labels = read_labels(*m.labels_path);
    const auto k = static_cast<std::int64_t>(m.n_classes);
    for (std::int64_t v : labels) {
      if (v < 0 || v >= k) {
        throw InvalidInputError("label " + std::to_string(v) +
                                " outside [0, " + std::to_string(k) + ")");
      }
    }
    d.labels = std::move(labels);
  }
  return d;
}

}  // namespace otfusion
