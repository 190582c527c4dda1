#include "qjl/tensor_file.hpp"

#include <fstream>
#include <iterator>

#include "byte_io.hpp"
#include "qjl/error.hpp"

namespace qjl {

namespace detail {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error while reading " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error while writing " + path.string());
}

}  // namespace detail

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::Float32: return 4;
    case DType::Float64: return 8;
    case DType::Float16: return 2;
  }
  throw InvalidArgument("unknown dtype code " + std::to_string(static_cast<unsigned>(dtype)));
}

std::string encode_tensor(const Matrix& m, DType dtype) {
  detail::ByteWriter w;
  w.bytes("QJLT");
  w.u16(kTensorFileVersion);
  w.u16(static_cast<std::uint16_t>(dtype));
  w.u64(m.rows());
  w.u64(m.cols());
  for (double v : m.data()) {
    switch (dtype) {
      case DType::Float32: w.f32(static_cast<float>(v)); break;
      case DType::Float64: w.f64(v); break;
      case DType::Float16: w.f16(v); break;
      default: throw InvalidArgument("unknown dtype code");
    }
  }
  return w.take();
}

Matrix decode_tensor(std::string_view bytes, DType* dtype_out) {
  detail::ByteReader r(bytes, "QJLT tensor");
  if (r.bytes(4) != "QJLT") throw FormatError("QJLT tensor: bad magic");
  const auto version = r.u16();
  if (version != kTensorFileVersion) {
    throw FormatError("QJLT tensor: unsupported version " + std::to_string(version));
  }
  const auto code = r.u16();
  if (code < 1 || code > 3) throw FormatError("QJLT tensor: unknown dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const auto rows = r.u64();
  const auto cols = r.u64();
  const auto elem = dtype_size(dtype);
  if (cols != 0 && rows > r.remaining() / elem / cols) {
    throw FormatError("QJLT tensor: payload shorter than the " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " header claims");
  }
  if (r.remaining() != rows * cols * elem) {
    throw FormatError("QJLT tensor: payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                      std::to_string(rows * cols * elem));
  }
  std::vector<double> data(rows * cols);
  for (auto& v : data) {
    switch (dtype) {
      case DType::Float32: v = r.f32(); break;
      case DType::Float64: v = r.f64(); break;
      case DType::Float16: v = r.f16(); break;
    }
  }
  r.expect_end();
  if (dtype_out) *dtype_out = dtype;
  return Matrix(rows, cols, std::move(data));
}

void write_tensor(const std::filesystem::path& path, const Matrix& m, DType dtype) {
  detail::write_file(path, encode_tensor(m, dtype));
}

Matrix read_tensor(const std::filesystem::path& path, DType* dtype) {
  return decode_tensor(detail::read_file(path), dtype);
}

void write_sketch(const std::filesystem::path& path, const SketchMatrix& sketch) {
  write_tensor(path, sketch.to_matrix(), DType::Float64);
}

SketchMatrix read_sketch(const std::filesystem::path& path, std::uint64_t seed, bool orthogonalized) {
  auto m = read_tensor(path);
  std::vector<double> entries(m.data().begin(), m.data().end());
  return SketchMatrix::from_entries(m.rows(), m.cols(), std::move(entries), seed, orthogonalized);
}

}  // namespace qjl
