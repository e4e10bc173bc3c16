#pragma once

// File formats:
//  - cube: raw little-endian float64 in band-interleaved-by-pixel order
//    (L contiguous values per pixel) plus a "<path>.hdr" text sidecar of
//    `key: value` lines;
//  - spectral library: CSV `band,sig_0,...` with an optional `material` row;
//  - segment map: "N K" line followed by N labels;
//  - abundance maps: binary 8-bit PGM, one file per endmember;
//  - key/value reports, evaluation CSV rows and sweep files.

#include "mua/datamodel.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace mua {

namespace fs = std::filesystem;

inline constexpr std::string_view kCubeMagic = "MUSC1";
inline constexpr std::string_view kCubeDtype = "f64le";

struct CubeHeader {
  Index bands = 0;
  Index rows = 0;
  Index cols = 0;
  std::optional<std::uint64_t> seed;
  std::string description;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) return std::nullopt;
  return value;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::ofstream open_out(const fs::path& path,
                              std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, mode);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

inline void write_f64le(std::ostream& out, const double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      auto bits = std::bit_cast<std::uint64_t>(data[i]);
      char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
      out.write(bytes, 8);
    }
  }
}

inline void read_f64le(const char* bytes, double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(data, bytes, count * sizeof(double));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 * i + b])) << (8 * b);
      data[i] = std::bit_cast<double>(bits);
    }
  }
}

}  // namespace detail

/// Ordered `key: value` lines.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline void write_key_values(const fs::path& path, const KeyValues& entries) {
  auto out = detail::open_out(path);
  for (const auto& [key, value] : entries) out << key << ": " << value << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

inline KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  for (const auto line : detail::split(text, '\n')) {
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto colon = t.find(':');
    if (colon == std::string_view::npos)
      throw Error(ErrorCode::HeaderMismatch,
                  "expected 'key: value', got '" + std::string(t) + "'");
    out.emplace_back(std::string(detail::trim(t.substr(0, colon))),
                     std::string(detail::trim(t.substr(colon + 1))));
  }
  return out;
}

inline KeyValues read_key_values(const fs::path& path) {
  return parse_key_values(detail::read_text(path));
}

inline std::optional<std::string> lookup(const KeyValues& kv, std::string_view key) {
  for (const auto& [k, v] : kv)
    if (k == key) return v;
  return std::nullopt;
}

inline fs::path header_path(const fs::path& cube_path) {
  return fs::path(cube_path.string() + ".hdr");
}

inline void write_cube(const fs::path& path, const HyperspectralImage& image,
                       std::optional<std::uint64_t> seed = {},
                       const std::string& description = {}) {
  KeyValues kv{{"magic", std::string(kCubeMagic)},
               {"bands", std::to_string(image.bands())},
               {"rows", std::to_string(image.rows())},
               {"cols", std::to_string(image.cols())},
               {"dtype", std::string(kCubeDtype)}};
  if (seed) kv.emplace_back("seed", std::to_string(*seed));
  std::string desc = description;
  std::replace(desc.begin(), desc.end(), '\n', ' ');
  kv.emplace_back("description", desc);
  write_key_values(header_path(path), kv);
  auto out = detail::open_out(path, std::ios::out | std::ios::binary);
  // Column-major L x N storage is already pixel-major.
  detail::write_f64le(out, image.data().data(),
                      static_cast<std::size_t>(image.data().size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

inline CubeHeader read_cube_header(const fs::path& path) {
  const KeyValues kv = read_key_values(header_path(path));
  if (lookup(kv, "magic") != std::optional<std::string>(std::string(kCubeMagic)))
    throw Error(ErrorCode::BadMagic, header_path(path).string() + " is not a " +
                                         std::string(kCubeMagic) + " header");
  if (lookup(kv, "dtype") != std::optional<std::string>(std::string(kCubeDtype)))
    throw Error(ErrorCode::HeaderMismatch, "dtype must be " + std::string(kCubeDtype));
  CubeHeader h;
  const auto count = [&](const char* key) {
    const auto text = lookup(kv, key);
    const auto v = text ? detail::parse_number<Index>(*text) : std::nullopt;
    if (!v || *v < 1)
      throw Error(ErrorCode::HeaderMismatch,
                  std::string("header field '") + key + "' missing or < 1");
    return *v;
  };
  h.bands = count("bands");
  h.rows = count("rows");
  h.cols = count("cols");
  if (const auto s = lookup(kv, "seed")) {
    const auto v = detail::parse_number<std::uint64_t>(*s);
    if (!v) throw Error(ErrorCode::HeaderMismatch, "seed is not an integer");
    h.seed = *v;
  }
  h.description = lookup(kv, "description").value_or("");
  return h;
}

inline std::pair<CubeHeader, HyperspectralImage> read_cube(const fs::path& path) {
  const CubeHeader h = read_cube_header(path);
  const std::string bytes = detail::read_text(path);
  const auto expected = static_cast<std::size_t>(h.bands * h.rows * h.cols) * 8;
  if (bytes.size() < expected || bytes.size() % 8 != 0)
    throw Error(ErrorCode::TruncatedData,
                path.string() + " holds " + std::to_string(bytes.size()) +
                    " bytes, header implies " + std::to_string(expected));
  if (bytes.size() != expected)
    throw Error(ErrorCode::HeaderMismatch,
                "header implies " + std::to_string(expected / 8) +
                    " values, file holds " + std::to_string(bytes.size() / 8));
  Matrix data(h.bands, h.rows * h.cols);
  detail::read_f64le(bytes.data(), data.data(), static_cast<std::size_t>(data.size()));
  return {h, HyperspectralImage(h.rows, h.cols, std::move(data))};
}

inline void write_library(const fs::path& path, const SpectralLibrary& library) {
  auto out = detail::open_out(path);
  const Matrix& A = library.signatures();
  out << "band";
  for (Index j = 0; j < A.cols(); ++j) out << ",sig_" << j;
  out << '\n';
  if (const auto& m = library.materials()) {
    out << "material";
    for (const int id : *m) out << ',' << id;
    out << '\n';
  }
  for (Index i = 0; i < A.rows(); ++i) {
    out << i;
    for (Index j = 0; j < A.cols(); ++j) out << ',' << detail::format_double(A(i, j));
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

inline SpectralLibrary parse_library(std::string_view text) {
  std::vector<std::string_view> lines;
  for (const auto line : detail::split(text, '\n'))
    if (!detail::trim(line).empty()) lines.push_back(detail::trim(line));
  if (lines.empty()) throw Error(ErrorCode::NonNumeric, "empty library file");
  const auto head = detail::split(lines[0], ',');
  if (detail::trim(head[0]) != "band" || head.size() < 2)
    throw Error(ErrorCode::NonNumeric, "library must start with 'band,sig_0,...'");
  const std::size_t P = head.size() - 1;
  std::size_t first = 1;
  std::optional<std::vector<int>> materials;
  if (lines.size() > 1 && detail::split(lines[1], ',')[0] == "material") {
    const auto fields = detail::split(lines[1], ',');
    if (fields.size() != P + 1)
      throw Error(ErrorCode::RaggedRows, "material row has " +
                                             std::to_string(fields.size() - 1) +
                                             " entries, expected " + std::to_string(P));
    materials.emplace();
    for (std::size_t j = 1; j < fields.size(); ++j) {
      const auto v = detail::parse_number<int>(fields[j]);
      if (!v) throw Error(ErrorCode::NonNumeric, "bad material id '" + std::string(fields[j]) + "'");
      materials->push_back(*v);
    }
    first = 2;
  }
  if (first >= lines.size()) throw Error(ErrorCode::NonNumeric, "library has no bands");
  Matrix A(static_cast<Index>(lines.size() - first), static_cast<Index>(P));
  for (std::size_t r = first; r < lines.size(); ++r) {
    const auto fields = detail::split(lines[r], ',');
    if (fields.size() != P + 1)
      throw Error(ErrorCode::RaggedRows, "row " + std::to_string(r + 1) + " has " +
                                             std::to_string(fields.size() - 1) +
                                             " values, expected " + std::to_string(P));
    for (std::size_t j = 1; j <= P; ++j) {
      const auto v = detail::parse_number<double>(fields[j]);
      if (!v)
        throw Error(ErrorCode::NonNumeric,
                    "row " + std::to_string(r + 1) + ": '" + std::string(fields[j]) + "'");
      A(static_cast<Index>(r - first), static_cast<Index>(j - 1)) = *v;
    }
  }
  return SpectralLibrary(std::move(A), std::move(materials));
}

inline SpectralLibrary read_library(const fs::path& path) {
  return parse_library(detail::read_text(path));
}

inline void write_segment_map(const fs::path& path, const SegmentMap& seg) {
  auto out = detail::open_out(path);
  out << seg.pixels() << ' ' << seg.segment_count() << '\n';
  for (Index n = 0; n < seg.pixels(); ++n) out << (n ? " " : "") << seg.label(n);
  out << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

inline SegmentMap parse_segment_map(std::string_view text) {
  std::vector<Index> tokens;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) {
    const auto v = detail::parse_number<Index>(tok);
    if (!v) throw Error(ErrorCode::NonNumeric, "bad segment map token '" + tok + "'");
    tokens.push_back(*v);
  }
  if (tokens.size() < 2) throw Error(ErrorCode::TruncatedData, "segment map header missing");
  const Index N = tokens[0], K = tokens[1];
  if (static_cast<Index>(tokens.size()) - 2 != N)
    throw Error(ErrorCode::HeaderMismatch, "segment map declares " + std::to_string(N) +
                                               " labels, holds " +
                                               std::to_string(tokens.size() - 2));
  return SegmentMap(std::vector<Index>(tokens.begin() + 2, tokens.end()), K);
}

inline SegmentMap read_segment_map(const fs::path& path) {
  return parse_segment_map(detail::read_text(path));
}

/// 8-bit gray level of an abundance value: clamp to [0, 1], scale by 255,
/// round half up.
inline std::uint8_t abundance_gray(double v) {
  const double c = std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

/// Writes em_<p>.pgm for every abundance row (or only `which`, if given).
inline std::vector<fs::path> export_abundance_maps(const Matrix& abundances, Index rows,
                                                   Index cols, const fs::path& out_dir,
                                                   const std::vector<Index>& which = {}) {
  if (abundances.cols() != rows * cols)
    throw Error(ErrorCode::ShapeMismatch,
                "abundances have " + std::to_string(abundances.cols()) +
                    " pixels, map is " + std::to_string(rows) + "x" + std::to_string(cols));
  std::vector<Index> selected = which;
  if (selected.empty())
    for (Index p = 0; p < abundances.rows(); ++p) selected.push_back(p);
  std::vector<fs::path> written;
  std::string pixels(static_cast<std::size_t>(rows * cols), '\0');
  for (const Index p : selected) {
    if (p < 0 || p >= abundances.rows())
      throw Error(ErrorCode::ShapeMismatch, "no abundance row " + std::to_string(p));
    for (Index n = 0; n < rows * cols; ++n)
      pixels[static_cast<std::size_t>(n)] = static_cast<char>(abundance_gray(abundances(p, n)));
    const fs::path path = out_dir / ("em_" + std::to_string(p) + ".pgm");
    auto out = detail::open_out(path, std::ios::out | std::ios::binary);
    out << "P5\n" << cols << ' ' << rows << "\n255\n";
    out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
    written.push_back(path);
  }
  return written;
}

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static constexpr char digits[] = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return buf;
}

/// One evaluation CSV row. NaN numeric fields are written empty.
struct EvalRow {
  std::string config_hash;
  std::string transform;
  double lambda_c = std::nan("");
  double lambda = std::nan("");
  double beta = std::nan("");
  Index region_size = 0;
  double snr_db = std::nan("");
  double sre_db = std::nan("");
  double rmse = std::nan("");
  double runtime_s = std::nan("");
};

inline constexpr std::string_view kEvalCsvHeader =
    "config_hash,transform,lambda_c,lambda,beta,region_size,snr_db,sre_db,rmse,runtime_s";

inline std::string format_eval_row(const EvalRow& row) {
  const auto num = [](double v) { return std::isnan(v) ? std::string() : detail::format_double(v); };
  std::ostringstream s;
  s << row.config_hash << ',' << row.transform << ',' << num(row.lambda_c) << ','
    << num(row.lambda) << ',' << num(row.beta) << ','
    << (row.region_size > 0 ? std::to_string(row.region_size) : std::string()) << ','
    << num(row.snr_db) << ',' << num(row.sre_db) << ',' << num(row.rmse) << ','
    << num(row.runtime_s);
  return s.str();
}

inline EvalRow parse_eval_row(std::string_view line) {
  const auto f = detail::split(detail::trim(line), ',');
  if (f.size() != 10) throw Error(ErrorCode::RaggedRows, "eval row needs 10 fields");
  const auto num = [](std::string_view t) {
    t = detail::trim(t);
    if (t.empty() || t == "nan") return std::nan("");
    if (t == "inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    const auto v = detail::parse_number<double>(t);
    if (!v) throw Error(ErrorCode::NonNumeric, "bad number '" + std::string(t) + "'");
    return *v;
  };
  EvalRow r;
  r.config_hash = std::string(f[0]);
  r.transform = std::string(f[1]);
  r.lambda_c = num(f[2]);
  r.lambda = num(f[3]);
  r.beta = num(f[4]);
  r.region_size = detail::trim(f[5]).empty() ? 0 : static_cast<Index>(num(f[5]));
  r.snr_db = num(f[6]);
  r.sre_db = num(f[7]);
  r.rmse = num(f[8]);
  r.runtime_s = num(f[9]);
  return r;
}

/// Appends a row, writing the header first if the file is new or empty.
inline void append_eval_row(const fs::path& path, const EvalRow& row) {
  std::error_code ec;
  const bool fresh = !fs::exists(path, ec) || fs::file_size(path, ec) == 0;
  auto out = detail::open_out(path, std::ios::out | std::ios::app);
  if (fresh) out << kEvalCsvHeader << '\n';
  out << format_eval_row(row) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

inline void write_eval_csv(const fs::path& path, const std::vector<EvalRow>& rows) {
  auto out = detail::open_out(path);
  out << kEvalCsvHeader << '\n';
  for (const auto& r : rows) out << format_eval_row(r) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

inline std::vector<EvalRow> read_eval_csv(const fs::path& path) {
  std::vector<EvalRow> rows;
  bool header = true;
  const std::string text = detail::read_text(path);
  for (const auto line : detail::split(text, '\n')) {
    if (detail::trim(line).empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    rows.push_back(parse_eval_row(line));
  }
  return rows;
}

/// Sweep file: `key = v1, v2, ...` lines; '#' starts a comment. Keys keep
/// file order; later duplicates replace earlier ones.
using Sweep = std::vector<std::pair<std::string, std::vector<std::string>>>;

inline Sweep parse_sweep(std::string_view text) {
  Sweep sweep;
  for (const auto raw : detail::split(text, '\n')) {
    auto line = raw.substr(0, raw.find('#'));
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::InvalidArgument, "sweep line without '=': " + std::string(line));
    const std::string key(detail::trim(line.substr(0, eq)));
    std::vector<std::string> values;
    for (const auto v : detail::split(line.substr(eq + 1), ','))
      if (!detail::trim(v).empty()) values.emplace_back(detail::trim(v));
    if (key.empty() || values.empty())
      throw Error(ErrorCode::InvalidArgument, "empty sweep entry: " + std::string(line));
    auto it = std::find_if(sweep.begin(), sweep.end(), [&](const auto& e) { return e.first == key; });
    if (it != sweep.end())
      it->second = std::move(values);
    else
      sweep.emplace_back(key, std::move(values));
  }
  return sweep;
}

inline Sweep read_sweep(const fs::path& path) {
  return parse_sweep(detail::read_text(path));
}

/// Cartesian product of the sweep; the last key varies fastest.
inline std::vector<std::map<std::string, std::string>> expand_sweep(const Sweep& sweep) {
  std::vector<std::map<std::string, std::string>> cells{{}};
  for (const auto& [key, values] : sweep) {
    std::vector<std::map<std::string, std::string>> next;
    next.reserve(cells.size() * values.size());
    for (const auto& cell : cells)
      for (const auto& v : values) {
        auto c = cell;
        c[key] = v;
        next.push_back(std::move(c));
      }
    cells = std::move(next);
  }
  return cells;
}

}  // namespace mua
