// Copyright 2026 The otfusion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OTFUSION_TOOLS_CLI_HPP_
#define OTFUSION_TOOLS_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "otfusion/synth.hpp"

namespace otfusion::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;

// Entry point shared by the `otfusion` binary and the tests. `args` excludes
// the program name. Subcommands: run, compare, synth, inspect.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

// Parses "n=1000,k=10,d=32,separation=4,y_noise=0.3" (keys: n, k, d,
// separation, y_noise, y_temperature, l2_normalize). Unlisted keys keep
// their SynthSpec defaults. Throws InvalidInputError.
SynthSpec parse_synth_spec(const std::string& text);

}  // namespace otfusion::cli

#endif  // OTFUSION_TOOLS_CLI_HPP_
