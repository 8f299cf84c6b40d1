#pragma once

#include <filesystem>
#include <iosfwd>

#include "hpm/tensor.hpp"

namespace hpm {

// Binary tensor container: magic "HPMT", one version byte, one rank byte,
// extents as 32-bit little-endian unsigned, then raw little-endian float32.
inline constexpr char kTensorMagic[4] = {'H', 'P', 'M', 'T'};
inline constexpr unsigned char kTensorVersion = 1;

void save_tensor(std::ostream& out, const Tensor& t);
Tensor load_tensor(std::istream& in);

void save_tensor_file(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor_file(const std::filesystem::path& path);

}  // namespace hpm
