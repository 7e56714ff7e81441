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

#ifndef OTFUSION_SYNTH_HPP_
#define OTFUSION_SYNTH_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "otfusion/prob_core.hpp"

namespace otfusion {

// Portable random stream for synthetic data. The engine is std::mt19937_64
// (its constants and output sequence are fixed by the C++ standard); the
// conversions below are spelled out so other implementations can match:
//   uniform()  = (next() >> 11) * 2^-53                  in [0, 1)
//   normal()   = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)      one value per pair
//   index(m)   = floor(uniform() * m)                    in [0, m)
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  double normal();
  std::size_t index(std::size_t m);

 private:
  std::mt19937_64 engine_;
};

struct SynthSpec {
  std::size_t n_samples = 300;
  std::size_t n_classes = 3;
  std::size_t dim = 8;
  double separation = 8.0;  // distance between class means, in units of std
  double y_noise = 0.0;     // probability that Y favors a wrong class
  double y_temperature = 5.0;
  bool l2_normalize = false;
  std::uint64_t seed = 0;
};

struct SynthInstance {
  FeatureMatrix features;
  ProbMatrix semantic;
  std::vector<std::int64_t> labels;
};

// Throws InvalidInputError unless N >= K >= 2, D >= max(2, K),
// separation > 0, 0 <= y_noise <= 1 and y_temperature > 0.
void validate(const SynthSpec& spec);

// Class means sit at (separation / sqrt 2) * e_k so every pair is
// `separation` apart; features add unit-variance Gaussian noise. Labels are
// balanced (floor(N/K) per class, remainder to the lowest indices) and
// shuffled. Each Y row is a softmax over logits U[0, 0.5) with the favored
// class set to 1, where the favored class is the true one except with
// probability y_noise, when it is a uniformly drawn wrong class.
//
// Draw order: labels shuffle, then per sample (in row order) D feature
// normals, one noise uniform, one wrong-class index if needed, K logit
// uniforms.
SynthInstance generate(const SynthSpec& spec);

}  // namespace otfusion

#endif  // OTFUSION_SYNTH_HPP_
