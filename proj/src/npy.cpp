// NPY v1/v2 reader and writer for float tensors.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "hdsig/error.hpp"
#include "hdsig/signal_io.hpp"

namespace hdsig {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;

struct Header {
  char endian = '<';
  char kind = 'f';
  std::size_t itemsize = 8;
  bool fortran_order = false;
  std::vector<std::size_t> shape;
};

std::string_view skip_ws(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\n')) s.remove_prefix(1);
  return s;
}

[[noreturn]] void header_error(const std::string& what) {
  fail(ErrorCode::HeaderParse, "NPY header: " + what);
}

// Parses the python dict literal, e.g.
//   {'descr': '<f8', 'fortran_order': False, 'shape': (2, 3), }
Header parse_header(std::string_view text) {
  Header h;
  bool have_descr = false, have_order = false, have_shape = false;
  text = skip_ws(text);
  if (text.empty() || text.front() != '{') header_error("expected '{'");
  text.remove_prefix(1);
  for (;;) {
    text = skip_ws(text);
    if (text.empty()) header_error("unterminated dict");
    if (text.front() == '}') break;
    if (text.front() != '\'' && text.front() != '"') header_error("expected quoted key");
    const char q = text.front();
    text.remove_prefix(1);
    auto end = text.find(q);
    if (end == text.npos) header_error("unterminated key");
    const std::string key(text.substr(0, end));
    text = skip_ws(text.substr(end + 1));
    if (text.empty() || text.front() != ':') header_error("expected ':'");
    text = skip_ws(text.substr(1));

    if (key == "descr") {
      if (text.empty() || (text.front() != '\'' && text.front() != '"')) header_error("descr must be a string");
      const char dq = text.front();
      text.remove_prefix(1);
      auto dend = text.find(dq);
      if (dend == text.npos) header_error("unterminated descr");
      std::string_view descr = text.substr(0, dend);
      text = text.substr(dend + 1);
      if (descr.size() < 3) fail(ErrorCode::UnsupportedDtype, "unsupported dtype '" + std::string(descr) + "'");
      h.endian = descr[0];
      h.kind = descr[1];
      h.itemsize = static_cast<std::size_t>(std::atoi(std::string(descr.substr(2)).c_str()));
      if ((h.endian != '<' && h.endian != '>' && h.endian != '=') || h.kind != 'f' ||
          (h.itemsize != 8 && h.itemsize != 4)) {
        fail(ErrorCode::UnsupportedDtype, "unsupported dtype '" + std::string(descr) + "'");
      }
      if (h.endian == '=') h.endian = std::endian::native == std::endian::little ? '<' : '>';
      have_descr = true;
    } else if (key == "fortran_order") {
      if (text.starts_with("True")) {
        h.fortran_order = true;
        text.remove_prefix(4);
      } else if (text.starts_with("False")) {
        h.fortran_order = false;
        text.remove_prefix(5);
      } else {
        header_error("fortran_order must be True or False");
      }
      have_order = true;
    } else if (key == "shape") {
      if (text.empty() || text.front() != '(') header_error("shape must be a tuple");
      text.remove_prefix(1);
      for (;;) {
        text = skip_ws(text);
        if (text.empty()) header_error("unterminated shape");
        if (text.front() == ')') {
          text.remove_prefix(1);
          break;
        }
        std::size_t v = 0;
        std::size_t digits = 0;
        while (!text.empty() && text.front() >= '0' && text.front() <= '9') {
          v = v * 10 + static_cast<std::size_t>(text.front() - '0');
          text.remove_prefix(1);
          ++digits;
        }
        if (digits == 0) header_error("bad shape entry");
        text = skip_ws(text);
        if (!text.empty() && text.front() == 'L') text.remove_prefix(1);
        h.shape.push_back(v);
        text = skip_ws(text);
        if (!text.empty() && text.front() == ',') text.remove_prefix(1);
      }
      have_shape = true;
    } else {
      header_error("unexpected key '" + key + "'");
    }
    text = skip_ws(text);
    if (!text.empty() && text.front() == ',') text.remove_prefix(1);
  }
  if (!have_descr || !have_order || !have_shape) header_error("missing descr, fortran_order or shape");
  return h;
}

template <typename T>
T byteswap_value(T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  std::reverse(b, b + sizeof(T));
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

std::size_t Tensor::size() const noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor read_npy(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingFile, "cannot open " + path.string());
  char magic[kMagicLen];
  in.read(magic, kMagicLen);
  if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0)
    fail(ErrorCode::BadMagic, path.string() + " is not an NPY file");
  unsigned char version[2];
  in.read(reinterpret_cast<char*>(version), 2);
  if (!in) header_error("truncated version");
  std::size_t header_len = 0;
  if (version[0] == 1) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    header_len = b[0] | (static_cast<std::size_t>(b[1]) << 8);
  } else if (version[0] == 2 || version[0] == 3) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    header_len = b[0] | (static_cast<std::size_t>(b[1]) << 8) |
                 (static_cast<std::size_t>(b[2]) << 16) | (static_cast<std::size_t>(b[3]) << 24);
  } else {
    header_error("unsupported version " + std::to_string(version[0]));
  }
  if (!in) header_error("truncated header length");
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) header_error("truncated header");
  const Header h = parse_header(header);

  Tensor t;
  t.shape = h.shape;
  const std::size_t count = t.size();
  std::vector<char> raw(count * h.itemsize);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    fail(ErrorCode::HeaderParse, "NPY payload shorter than header shape in " + path.string());

  const bool swap = (h.endian == '<') != (std::endian::native == std::endian::little);
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (h.itemsize == 8) {
      double v;
      std::memcpy(&v, raw.data() + 8 * i, 8);
      values[i] = swap ? byteswap_value(v) : v;
    } else {
      float v;
      std::memcpy(&v, raw.data() + 4 * i, 4);
      values[i] = static_cast<double>(swap ? byteswap_value(v) : v);
    }
  }

  if (h.fortran_order && t.shape.size() > 1) {
    // Column-major: the first axis varies fastest. Convert to C order.
    const std::size_t nd = t.shape.size();
    std::vector<std::size_t> c_strides(nd, 1), f_strides(nd, 1);
    for (std::size_t d = nd - 1; d-- > 0;) c_strides[d] = c_strides[d + 1] * t.shape[d + 1];
    for (std::size_t d = 1; d < nd; ++d) f_strides[d] = f_strides[d - 1] * t.shape[d - 1];
    t.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t rem = i, f = 0;
      for (std::size_t d = 0; d < nd; ++d) {
        const std::size_t idx = rem / c_strides[d];
        rem %= c_strides[d];
        f += idx * f_strides[d];
      }
      t.data[i] = values[f];
    }
  } else {
    t.data = std::move(values);
  }
  return t;
}

void write_npy(const Tensor& tensor, const fs::path& path) {
  if (tensor.data.size() != tensor.size())
    fail(ErrorCode::ShapeMismatch, "tensor data does not match its shape");
  for (double v : tensor.data)
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteSample, "refusing to write non-finite tensor to " + path.string());

  std::string dict = "{'descr': '<f8', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < tensor.shape.size(); ++i) {
    dict += std::to_string(tensor.shape[i]);
    if (tensor.shape.size() == 1 || i + 1 < tensor.shape.size()) dict += ",";
    if (i + 1 < tensor.shape.size()) dict += " ";
  }
  dict += "), }";

  // Total preamble (magic + version + length + dict + '\n') padded to 64 bytes.
  std::size_t prefix = kMagicLen + 2 + 2;
  unsigned char major = 1;
  if (dict.size() + 1 + prefix > 65535) {
    major = 2;
    prefix = kMagicLen + 2 + 4;
  }
  std::size_t total = prefix + dict.size() + 1;
  std::size_t pad = (64 - total % 64) % 64;
  dict.append(pad, ' ');
  dict += '\n';
  const std::size_t header_len = dict.size();

  std::string out;
  out.reserve(prefix + header_len + tensor.data.size() * 8);
  out.append(kMagic, kMagicLen);
  out += static_cast<char>(major);
  out += '\0';
  if (major == 1) {
    out += static_cast<char>(header_len & 0xFF);
    out += static_cast<char>((header_len >> 8) & 0xFF);
  } else {
    for (int s = 0; s < 32; s += 8) out += static_cast<char>((header_len >> s) & 0xFF);
  }
  out += dict;
  const std::size_t payload_at = out.size();
  out.resize(payload_at + tensor.data.size() * 8);
  for (std::size_t i = 0; i < tensor.data.size(); ++i) {
    double v = tensor.data[i];
    if constexpr (std::endian::native != std::endian::little) v = byteswap_value(v);
    std::memcpy(out.data() + payload_at + 8 * i, &v, 8);
  }
  write_text_file(path, out);
}

Tensor to_tensor(const Matrix& m) {
  return Tensor{{m.rows(), m.cols()}, std::vector<double>(m.data().begin(), m.data().end())};
}

Matrix to_matrix(const Tensor& t) {
  if (t.shape.size() != 2) fail(ErrorCode::ShapeMismatch, "expected a 2-D tensor");
  return Matrix(t.shape[0], t.shape[1], t.data);
}

}  // namespace hdsig
