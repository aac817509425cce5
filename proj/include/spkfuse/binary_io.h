// Copyright (c) 2026 The spkfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef SPKFUSE_BINARY_IO_H_
#define SPKFUSE_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "spkfuse/common.h"

namespace spkfuse {

// Little-endian float32 blocks, independent of host byte order.
inline void AppendFloat32(std::vector<char>* bytes, float v) {
  const uint32_t u = std::bit_cast<uint32_t>(v);
  for (int i = 0; i < 4; ++i) bytes->push_back(static_cast<char>(u >> (8 * i)));
}

inline float DecodeFloat32(const char* p) {
  uint32_t u = 0;
  for (int i = 0; i < 4; ++i) {
    u |= static_cast<uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return std::bit_cast<float>(u);
}

template <typename Derived>
void WriteFloat32Block(std::ostream& os, const Eigen::MatrixBase<Derived>& m) {
  std::vector<char> bytes;
  bytes.reserve(static_cast<size_t>(m.size()) * 4);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      AppendFloat32(&bytes, static_cast<float>(m(r, c)));
    }
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Fills an already-sized matrix; throws FormatError on a short read.
template <typename Scalar>
void ReadFloat32Block(std::istream& is, Matrix<Scalar>* m,
                      const std::string& what) {
  std::vector<char> bytes(static_cast<size_t>(m->size()) * 4);
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError(what + ": truncated record (expected " +
                      std::to_string(bytes.size()) + " bytes, got " +
                      std::to_string(is.gcount()) + ")");
  }
  size_t k = 0;
  for (Eigen::Index r = 0; r < m->rows(); ++r) {
    for (Eigen::Index c = 0; c < m->cols(); ++c, k += 4) {
      (*m)(r, c) = static_cast<Scalar>(DecodeFloat32(bytes.data() + k));
    }
  }
}

}  // namespace spkfuse

#endif  // SPKFUSE_BINARY_IO_H_
