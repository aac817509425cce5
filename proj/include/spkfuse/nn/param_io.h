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


// Parameter records: a text header line "name rows cols" followed by
// rows*cols little-endian float32 values in row-major order.

#ifndef SPKFUSE_NN_PARAM_IO_H_
#define SPKFUSE_NN_PARAM_IO_H_

#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

#include "spkfuse/binary_io.h"
#include "spkfuse/common.h"

namespace spkfuse {
namespace nn {

template <typename Derived>
void WriteParamRecord(std::ostream& os, const std::string& name,
                      const Eigen::MatrixBase<Derived>& m) {
  if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
    throw DomainError("record name must be non-empty without whitespace");
  }
  os << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  WriteFloat32Block(os, m);
}

template <typename Scalar>
struct ParamRecord {
  std::string name;
  Matrix<Scalar> value;
};

// Throws FormatError on a malformed header or a truncated payload.
template <typename Scalar>
ParamRecord<Scalar> ReadParamRecord(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) {
    throw FormatError("truncated file: missing parameter record header");
  }
  char name[256];
  long rows = -1, cols = -1;
  if (std::sscanf(header.c_str(), "%255s %ld %ld", name, &rows, &cols) != 3 ||
      rows < 0 || cols < 0 || rows * cols > (1L << 31)) {
    throw FormatError("malformed parameter record header: '" + header + "'");
  }
  ParamRecord<Scalar> rec;
  rec.name = name;
  rec.value.resize(rows, cols);
  ReadFloat32Block(is, &rec.value, "record " + rec.name);
  return rec;
}

}  // namespace nn
}  // namespace spkfuse

#endif  // SPKFUSE_NN_PARAM_IO_H_
