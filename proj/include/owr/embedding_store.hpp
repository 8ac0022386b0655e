#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "owr/error.hpp"
#include "owr/matrix.hpp"

namespace owr {

struct RowMeta {
  std::string sample_id;
  std::string class_label;
  std::string dataset_name;

  bool operator==(const RowMeta&) const = default;
};

enum class StoreFormat { binary, csv };

/// Labeled dense feature matrix. Immutable after construction; rows[i] describes
/// matrix row i.
class EmbeddingStore {
public:
  EmbeddingStore() = default;

  /// An empty store of the given width.
  explicit EmbeddingStore(std::size_t n_dims) : n_dims_(n_dims) {}

  EmbeddingStore(std::size_t n_dims, std::vector<float> data, std::vector<RowMeta> rows)
      : n_dims_(n_dims), data_(std::move(data)), rows_(std::move(rows)) {
    validate();
  }

  std::size_t n_rows() const noexcept { return rows_.size(); }
  std::size_t n_dims() const noexcept { return n_dims_; }
  bool empty() const noexcept { return rows_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<const RowMeta> rows() const noexcept { return rows_; }
  const RowMeta& meta(std::size_t i) const { return rows_.at(i); }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * n_dims_, n_dims_);
  }
  MatrixView<float> matrix() const { return {data_, n_rows(), n_dims_}; }

  /// Bitwise equality of the matrix (NaN payloads and signed zeros included) plus
  /// metadata equality.
  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.n_dims_ == b.n_dims_ && a.rows_ == b.rows_ && a.data_.size() == b.data_.size() &&
           (a.data_.empty() ||
            std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0);
  }

private:
  void validate() const {
    if (data_.size() != rows_.size() * n_dims_)
      throw DomainError("store data length " + std::to_string(data_.size()) + " != n_rows " +
                        std::to_string(rows_.size()) + " x n_dims " + std::to_string(n_dims_));
    std::unordered_set<std::string_view> seen;
    seen.reserve(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const RowMeta& m = rows_[i];
      if (m.class_label.empty() || m.dataset_name.empty())
        throw DomainError("row " + std::to_string(i) + ": empty class_label or dataset_name");
      for (const std::string* field : {&m.sample_id, &m.class_label, &m.dataset_name})
        if (field->find_first_of("\r\n") != std::string::npos)
          throw DomainError("row " + std::to_string(i) + ": metadata contains a line break");
      if (!seen.insert(m.sample_id).second)
        throw DomainError("duplicate sample_id '" + m.sample_id + "'");
    }
  }

  std::size_t n_dims_ = 0;
  std::vector<float> data_;
  std::vector<RowMeta> rows_;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((v >> s) & 0xFFu));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t off) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + b])) << (8 * b);
  return v;
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

inline float get_f32(std::string_view in, std::size_t off) {
  return std::bit_cast<float>(get_u32(in, off));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return bytes;
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

inline bool csv_needs_quotes(std::string_view field) {
  return field.find_first_of(",\"") != std::string_view::npos;
}

inline void csv_append_field(std::string& out, std::string_view field) {
  if (!csv_needs_quotes(field)) {
    out.append(field);
    return;
  }
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

/// Splits one CSV line (no embedded line breaks). Returns false on an unterminated quote.
inline bool csv_split(std::string_view line, std::vector<std::string>& fields) {
  fields.clear();
  std::string cur;
  std::size_t i = 0;
  bool field_start = true;
  for (;;) {
    if (field_start && i < line.size() && line[i] == '"') {
      ++i;
      for (;;) {
        if (i >= line.size()) return false;
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            cur.push_back('"');
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        cur.push_back(line[i++]);
      }
    }
    field_start = false;
    if (i >= line.size()) {
      fields.push_back(std::move(cur));
      return true;
    }
    if (line[i] == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      field_start = true;
      ++i;
      continue;
    }
    cur.push_back(line[i++]);
  }
}

inline bool parse_float(std::string_view s, float& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline void append_float(std::string& out, float f) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), f);
  out.append(buf, ptr);
}

/// Iterates over '\n'-separated lines, stripping a trailing '\r'. Calls
/// fn(line, line_number, byte_offset).
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  std::size_t line_no = 1;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line, line_no, pos);
    pos = end + 1;
    ++line_no;
  }
}

inline constexpr char kEmbMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kEmbVersion = 1;
inline constexpr std::size_t kEmbHeaderBytes = 16;

}  // namespace detail

/// Encodes a store as an EMB1 byte string.
inline std::string encode_emb1(const EmbeddingStore& store) {
  std::string out;
  out.reserve(detail::kEmbHeaderBytes + store.data().size() * 4 + 4 + store.n_rows() * 32);
  out.append(detail::kEmbMagic, 4);
  detail::put_u32(out, detail::kEmbVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(store.n_rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(store.n_dims()));
  for (float f : store.data()) detail::put_f32(out, f);

  std::string meta;
  for (std::size_t i = 0; i < store.n_rows(); ++i) {
    const RowMeta& m = store.meta(i);
    meta += std::to_string(i);
    meta.push_back(',');
    detail::csv_append_field(meta, m.sample_id);
    meta.push_back(',');
    detail::csv_append_field(meta, m.class_label);
    meta.push_back(',');
    detail::csv_append_field(meta, m.dataset_name);
    meta.push_back('\n');
  }
  detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  return out;
}

/// Decodes an EMB1 byte string. Errors carry the byte offset of the problem.
inline EmbeddingStore decode_emb1(std::string_view bytes) {
  auto fail = [](std::size_t off, const std::string& what) -> FormatError {
    return FormatError("EMB1: " + what + " at byte offset " + std::to_string(off));
  };
  if (bytes.size() < detail::kEmbHeaderBytes)
    throw fail(bytes.size(), "malformed header: file has " + std::to_string(bytes.size()) +
                                 " bytes, header needs 16");
  if (std::memcmp(bytes.data(), detail::kEmbMagic, 4) != 0) throw fail(0, "bad magic (expected \"EMB1\")");
  const std::uint32_t version = detail::get_u32(bytes, 4);
  if (version != detail::kEmbVersion) throw fail(4, "unsupported version " + std::to_string(version));
  const std::uint64_t n_rows = detail::get_u32(bytes, 8);
  const std::uint64_t n_dims = detail::get_u32(bytes, 12);

  const std::uint64_t payload = n_rows * n_dims * 4;
  const std::uint64_t available = bytes.size() - detail::kEmbHeaderBytes;
  if (available < payload)
    throw fail(bytes.size(), "truncated payload: header declares " + std::to_string(n_rows) + "x" +
                                 std::to_string(n_dims) + " floats (" + std::to_string(payload) +
                                 " bytes), only " + std::to_string(available) + " present");
  std::vector<float> data(n_rows * n_dims);
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = detail::get_f32(bytes, detail::kEmbHeaderBytes + 4 * i);

  const std::size_t meta_len_off = detail::kEmbHeaderBytes + payload;
  if (bytes.size() < meta_len_off + 4) throw fail(meta_len_off, "truncated metadata length field");
  const std::uint64_t meta_len = detail::get_u32(bytes, meta_len_off);
  const std::size_t meta_off = meta_len_off + 4;
  if (bytes.size() - meta_off < meta_len)
    throw fail(bytes.size(), "truncated metadata block: declares " + std::to_string(meta_len) +
                                 " bytes, only " + std::to_string(bytes.size() - meta_off) + " present");
  if (bytes.size() - meta_off > meta_len) throw fail(meta_off + meta_len, "trailing bytes after metadata block");

  std::vector<RowMeta> rows(n_rows);
  std::vector<bool> filled(n_rows, false);
  std::unordered_map<std::string, std::size_t> id_rows;
  std::vector<std::string> fields;
  detail::for_each_line(bytes.substr(meta_off, meta_len), [&](std::string_view line, std::size_t,
                                                               std::size_t off) {
    const std::size_t at = meta_off + off;
    if (line.empty()) return;
    if (!detail::csv_split(line, fields)) throw fail(at, "unterminated quote in metadata line");
    if (fields.size() != 4)
      throw fail(at, "metadata line has " + std::to_string(fields.size()) + " fields, expected 4");
    std::uint64_t idx = 0;
    const std::string& f0 = fields[0];
    auto [ptr, ec] = std::from_chars(f0.data(), f0.data() + f0.size(), idx);
    if (ec != std::errc() || ptr != f0.data() + f0.size() || f0.empty())
      throw fail(at, "metadata row_index '" + f0 + "' is not an integer");
    if (idx >= n_rows) throw fail(at, "metadata row_index " + f0 + " >= n_rows " + std::to_string(n_rows));
    if (filled[idx]) throw fail(at, "duplicate metadata row_index " + f0);
    if (fields[2].empty() || fields[3].empty()) throw fail(at, "empty class_label or dataset_name");
    auto [it, inserted] = id_rows.emplace(fields[1], idx);
    if (!inserted) throw fail(at, "duplicate sample_id '" + fields[1] + "'");
    filled[idx] = true;
    rows[idx] = RowMeta{std::move(fields[1]), std::move(fields[2]), std::move(fields[3])};
  });
  for (std::size_t i = 0; i < n_rows; ++i)
    if (!filled[i]) throw fail(meta_off + meta_len, "metadata missing for row_index " + std::to_string(i));
  return EmbeddingStore(n_dims, std::move(data), std::move(rows));
}

/// Renders `sample_id,class_label,dataset_name,v0,...` lines, floats in shortest
/// round-trip form. Header line included when requested.
inline std::string encode_csv(const EmbeddingStore& store, bool header = true) {
  std::string out;
  if (header) {
    out += "sample_id,class_label,dataset_name";
    for (std::size_t d = 0; d < store.n_dims(); ++d) out += ",v" + std::to_string(d);
    out.push_back('\n');
  }
  for (std::size_t i = 0; i < store.n_rows(); ++i) {
    const RowMeta& m = store.meta(i);
    detail::csv_append_field(out, m.sample_id);
    out.push_back(',');
    detail::csv_append_field(out, m.class_label);
    out.push_back(',');
    detail::csv_append_field(out, m.dataset_name);
    for (float f : store.row(i)) {
      out.push_back(',');
      detail::append_float(out, f);
    }
    out.push_back('\n');
  }
  return out;
}

/// Parses the CSV store format. A first line whose fourth field is not numeric is a
/// header. Blank lines are ignored. Errors carry the 1-based line number.
inline EmbeddingStore decode_csv(std::string_view text) {
  auto fail = [](std::size_t line, const std::string& what) -> FormatError {
    return FormatError("CSV: " + what + " at line " + std::to_string(line));
  };
  std::vector<float> data;
  std::vector<RowMeta> rows;
  std::unordered_set<std::string> ids;
  std::vector<std::string> fields;
  std::size_t width = 0;
  bool first = true;
  detail::for_each_line(text, [&](std::string_view line, std::size_t line_no, std::size_t) {
    if (line.empty()) return;
    if (!detail::csv_split(line, fields)) throw fail(line_no, "unterminated quote");
    if (fields.size() < 4)
      throw fail(line_no, "expected sample_id,class_label,dataset_name and at least one value, got " +
                              std::to_string(fields.size()) + " fields");
    float probe = 0.0f;
    if (first) {
      first = false;
      if (!detail::parse_float(fields[3], probe)) return;  // header line
    }
    const std::size_t dims = fields.size() - 3;
    if (width == 0) {
      width = dims;
    } else if (dims != width) {
      throw fail(line_no, "row has " + std::to_string(dims) + " values, expected " + std::to_string(width));
    }
    if (fields[1].empty() || fields[2].empty()) throw fail(line_no, "empty class_label or dataset_name");
    if (!ids.insert(fields[0]).second) throw fail(line_no, "duplicate sample_id '" + fields[0] + "'");
    for (std::size_t d = 0; d < dims; ++d) {
      float v = 0.0f;
      if (!detail::parse_float(fields[3 + d], v))
        throw fail(line_no, "value '" + fields[3 + d] + "' in column " + std::to_string(4 + d) +
                                " is not a number");
      data.push_back(v);
    }
    rows.push_back(RowMeta{std::move(fields[0]), std::move(fields[1]), std::move(fields[2])});
  });
  return EmbeddingStore(width, std::move(data), std::move(rows));
}

/// Picks binary for ".emb"/".emb1"/".bin", CSV for ".csv".
inline StoreFormat format_from_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv") return StoreFormat::csv;
  if (ext == ".emb" || ext == ".emb1" || ext == ".bin") return StoreFormat::binary;
  throw FormatError("cannot infer store format from '" + path.string() + "' (use .emb or .csv)");
}

inline EmbeddingStore load_store(const std::filesystem::path& path, StoreFormat format) {
  const std::string bytes = detail::read_file(path);
  try {
    return format == StoreFormat::binary ? decode_emb1(bytes) : decode_csv(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline EmbeddingStore load_store(const std::filesystem::path& path) {
  return load_store(path, format_from_extension(path));
}

inline void save_store(const EmbeddingStore& store, const std::filesystem::path& path, StoreFormat format) {
  detail::write_file(path, format == StoreFormat::binary ? encode_emb1(store) : encode_csv(store));
}

inline void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  save_store(store, path, format_from_extension(path));
}

/// Rows at the given indices, in the given order.
inline EmbeddingStore subset(const EmbeddingStore& store, std::span<const std::size_t> indices) {
  std::vector<float> data;
  data.reserve(indices.size() * store.n_dims());
  std::vector<RowMeta> rows;
  rows.reserve(indices.size());
  for (std::size_t i : indices) {
    auto r = store.row(i);
    data.insert(data.end(), r.begin(), r.end());
    rows.push_back(store.meta(i));
  }
  return EmbeddingStore(store.n_dims(), std::move(data), std::move(rows));
}

template <typename Pred>
EmbeddingStore filter_rows(const EmbeddingStore& store, Pred&& keep) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < store.n_rows(); ++i)
    if (keep(store.meta(i))) idx.push_back(i);
  return subset(store, idx);
}

/// Rows whose dataset_name is in `names`, load order preserved.
inline EmbeddingStore select_by_datasets(const EmbeddingStore& store, const std::set<std::string>& names) {
  return filter_rows(store, [&](const RowMeta& m) { return names.count(m.dataset_name) != 0; });
}

/// Rows of `a` followed by rows of `b`.
inline EmbeddingStore concat(const EmbeddingStore& a, const EmbeddingStore& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.n_dims() != b.n_dims())
    throw DomainError("cannot concatenate stores of width " + std::to_string(a.n_dims()) + " and " +
                      std::to_string(b.n_dims()));
  std::vector<float> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  std::vector<RowMeta> rows(a.rows().begin(), a.rows().end());
  rows.insert(rows.end(), b.rows().begin(), b.rows().end());
  return EmbeddingStore(a.n_dims(), std::move(data), std::move(rows));
}

/// Scales every row to unit L2 norm; zero rows stay zero.
inline EmbeddingStore l2_normalized(const EmbeddingStore& store) {
  std::vector<float> data(store.data().begin(), store.data().end());
  for (std::size_t i = 0; i < store.n_rows(); ++i) {
    auto r = std::span<float>(data).subspan(i * store.n_dims(), store.n_dims());
    double sq = 0.0;
    for (float v : r) sq += static_cast<double>(v) * v;
    if (sq == 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (float& v : r) v = static_cast<float>(v * inv);
  }
  return EmbeddingStore(store.n_dims(), std::move(data), {store.rows().begin(), store.rows().end()});
}

/// Distinct class labels, sorted.
inline std::set<std::string> class_set(const EmbeddingStore& store) {
  std::set<std::string> out;
  for (const RowMeta& m : store.rows()) out.insert(m.class_label);
  return out;
}

inline std::set<std::string> dataset_set(const EmbeddingStore& store) {
  std::set<std::string> out;
  for (const RowMeta& m : store.rows()) out.insert(m.dataset_name);
  return out;
}

}  // namespace owr
