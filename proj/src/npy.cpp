#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "pmag/errors.hpp"
#include "pmag/io_formats.hpp"

namespace pmag {

static_assert(std::endian::native == std::endian::little, "NPY codec assumes a little-endian host");

namespace {

constexpr std::string_view kMagic{"\x93NUMPY", 6};
constexpr std::size_t kAlign = 64;

std::size_t dtype_size(NpyDtype d) { return d == NpyDtype::Float32 ? 4 : 1; }

std::string shape_literal(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  if (shape.size() == 1) s += ",";
  s += ")";
  return s;
}

// Minimal reader for the python dict literal in an NPY header.
class HeaderParser {
 public:
  explicit HeaderParser(std::string_view text) : s_(text) {}

  void parse(std::string& descr, bool& fortran, std::vector<std::size_t>& shape) {
    bool seen_descr = false, seen_fortran = false, seen_shape = false;
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') break;
      const std::string key = string_literal();
      expect(':');
      skip_ws();
      if (key == "descr") {
        descr = string_literal();
        seen_descr = true;
      } else if (key == "fortran_order") {
        fortran = boolean();
        seen_fortran = true;
      } else if (key == "shape") {
        shape = tuple();
        seen_shape = true;
      } else {
        throw FormatError("npy header has unknown key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      if (peek() != '}') fail("expected ',' or '}'");
    }
    if (!seen_descr || !seen_fortran || !seen_shape) fail("missing descr, fortran_order or shape");
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError("malformed npy header: " + msg);
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  std::string string_literal() {
    skip_ws();
    const char q = peek();
    if (q != '\'' && q != '"') fail("expected string");
    const auto end = s_.find(q, pos_ + 1);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string out(s_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return out;
  }
  bool boolean() {
    if (s_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    fail("expected True or False");
  }
  std::vector<std::size_t> tuple() {
    expect('(');
    std::vector<std::size_t> dims;
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return dims;
      }
      if (peek() < '0' || peek() > '9') fail("expected shape dimension");
      std::size_t v = 0;
      while (peek() >= '0' && peek() <= '9') {
        v = v * 10 + static_cast<std::size_t>(peek() - '0');
        ++pos_;
      }
      dims.push_back(v);
      skip_ws();
      if (peek() == ',') ++pos_;
      else if (peek() != ')') fail("expected ',' or ')' in shape");
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

void check_rank(std::size_t rank) {
  if (rank < 1 || rank > 4) {
    throw UnsupportedFormatError("npy arrays must have 1 to 4 dimensions, got " +
                                 std::to_string(rank));
  }
}

}  // namespace

std::size_t NpyArray::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string encode_npy(const NpyArray& array) {
  check_rank(array.shape.size());
  const std::size_t n = array.element_count();
  const bool is_f32 = array.dtype == NpyDtype::Float32;
  if ((is_f32 ? array.f32.size() : array.b1.size()) != n) {
    throw ValidationError("npy payload size does not match its shape");
  }

  std::string dict = "{'descr': '";
  dict += is_f32 ? "<f4" : "|b1";
  dict += "', 'fortran_order': False, 'shape': " + shape_literal(array.shape) + ", }";
  // magic(6) + version(2) + length(2) + dict + padding + '\n'
  const std::size_t unpadded = kMagic.size() + 4 + dict.size() + 1;
  const std::size_t padding = (kAlign - unpadded % kAlign) % kAlign;
  dict.append(padding, ' ');
  dict.push_back('\n');

  std::string out;
  out.reserve(kMagic.size() + 4 + dict.size() + n * dtype_size(array.dtype));
  out.append(kMagic);
  out.push_back('\x01');
  out.push_back('\x00');
  const auto len = static_cast<std::uint16_t>(dict.size());
  out.push_back(static_cast<char>(len & 0xff));
  out.push_back(static_cast<char>(len >> 8));
  out += dict;
  if (is_f32) {
    out.append(reinterpret_cast<const char*>(array.f32.data()), n * sizeof(float));
  } else {
    for (auto b : array.b1) out.push_back(b ? '\x01' : '\x00');
  }
  return out;
}

NpyArray decode_npy(std::string_view bytes) {
  if (bytes.size() < 10 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw FormatError("not an npy file (bad magic)");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  if (major != 1 || minor != 0) {
    throw UnsupportedFormatError("npy version " + std::to_string(major) + "." +
                                 std::to_string(minor) + " not supported (need 1.0)");
  }
  const std::size_t hlen = static_cast<unsigned char>(bytes[8]) |
                           (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < 10 + hlen) throw TruncationError("npy header truncated");

  std::string descr;
  bool fortran = false;
  NpyArray array;
  HeaderParser(bytes.substr(10, hlen)).parse(descr, fortran, array.shape);
  if (fortran) throw UnsupportedFormatError("fortran-ordered npy arrays are not supported");
  if (descr == "<f4") {
    array.dtype = NpyDtype::Float32;
  } else if (descr == "|b1") {
    array.dtype = NpyDtype::Bool;
  } else {
    throw UnsupportedFormatError("npy dtype '" + descr + "' not supported (need '<f4' or '|b1')");
  }
  check_rank(array.shape.size());

  const std::size_t n = array.element_count();
  const std::size_t expected = n * dtype_size(array.dtype);
  const std::string_view payload = bytes.substr(10 + hlen);
  if (payload.size() != expected) {
    throw TruncationError("npy payload is " + std::to_string(payload.size()) + " bytes, expected " +
                          std::to_string(expected));
  }
  if (array.dtype == NpyDtype::Float32) {
    array.f32.resize(n);
    std::memcpy(array.f32.data(), payload.data(), expected);
  } else {
    array.b1.resize(n);
    for (std::size_t i = 0; i < n; ++i) array.b1[i] = payload[i] != 0 ? 1 : 0;
  }
  return array;
}

NpyArray read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_npy(bytes);
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(path.string() + ": " + e.what());
  } catch (const TruncationError& e) {
    throw TruncationError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_npy(const std::filesystem::path& path, const NpyArray& array) {
  const std::string bytes = encode_npy(array);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

NpyArray to_npy(const AttnStack& attn) {
  const auto& s = attn.shape();
  return {NpyDtype::Float32, {s.layers, s.heads, s.grid_h, s.grid_w}, attn.storage(), {}};
}

NpyArray to_npy(const Grid2<double>& grid) {
  NpyArray a{NpyDtype::Float32, {grid.rows(), grid.cols()}, {}, {}};
  a.f32.reserve(grid.size());
  for (double v : grid.values()) a.f32.push_back(static_cast<float>(v));
  return a;
}

NpyArray to_npy(const TokenMask& mask) {
  NpyArray a{NpyDtype::Bool, {mask.rows(), mask.cols()}, {}, {}};
  a.b1.reserve(mask.size());
  for (auto v : mask.values()) a.b1.push_back(v ? 1 : 0);
  return a;
}

AttnStack stack_from_npy(const NpyArray& array) {
  if (array.dtype != NpyDtype::Float32 || array.shape.size() != 4) {
    throw ValidationError("attention stack must be a 4-D float32 array");
  }
  return AttnStack({array.shape[0], array.shape[1], array.shape[2], array.shape[3]}, array.f32);
}

Grid2<double> grid_from_npy(const NpyArray& array) {
  if (array.dtype != NpyDtype::Float32 || array.shape.size() != 2) {
    throw ValidationError("expected a 2-D float32 array");
  }
  std::vector<double> v(array.f32.begin(), array.f32.end());
  return Grid2<double>(array.shape[0], array.shape[1], std::move(v));
}

TokenMask mask_from_npy(const NpyArray& array) {
  if (array.dtype != NpyDtype::Bool || array.shape.size() != 2) {
    throw ValidationError("token mask must be a 2-D bool array");
  }
  TokenMask m(array.shape[0], array.shape[1], 0);
  std::copy(array.b1.begin(), array.b1.end(), m.values().begin());
  return m;
}

}  // namespace pmag
