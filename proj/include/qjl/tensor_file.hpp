#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "qjl/matrix.hpp"
#include "qjl/sketch.hpp"

namespace qjl {

// QJLT tensor file, little-endian:
//
//   offset  size  field
//   0       4     magic "QJLT"
//   4       2     version (u16, currently 1)
//   6       2     dtype (u16): 1 = float32, 2 = float64, 3 = float16
//   8       8     rows (u64)
//   16      8     cols (u64)
//   24      ...   rows * cols elements, row-major
//
// Readers reject unknown versions and dtypes and any payload whose length is
// not exactly rows * cols * sizeof(dtype). Values are widened to double on load.

enum class DType : std::uint16_t { Float32 = 1, Float64 = 2, Float16 = 3 };

inline constexpr std::uint16_t kTensorFileVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 24;

std::size_t dtype_size(DType dtype);

std::string encode_tensor(const Matrix& m, DType dtype = DType::Float32);
Matrix decode_tensor(std::string_view bytes, DType* dtype = nullptr);

void write_tensor(const std::filesystem::path& path, const Matrix& m, DType dtype = DType::Float32);
Matrix read_tensor(const std::filesystem::path& path, DType* dtype = nullptr);

/// Sketches travel as float64 tensors. The seed and orthogonalization flag
/// are not part of the tensor format, so the caller supplies them on load.
void write_sketch(const std::filesystem::path& path, const SketchMatrix& sketch);
SketchMatrix read_sketch(const std::filesystem::path& path, std::uint64_t seed = 0, bool orthogonalized = false);

}  // namespace qjl
