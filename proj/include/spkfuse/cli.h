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


// Command-line front end. Run() is the whole program minus process exit,
// so that it can be driven from tests.

#ifndef SPKFUSE_CLI_H_
#define SPKFUSE_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace spkfuse {
namespace cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumerical = 3,
};

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);
int Run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err);

}  // namespace cli
}  // namespace spkfuse

#endif  // SPKFUSE_CLI_H_
