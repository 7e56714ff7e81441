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

#include "otfusion/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "otfusion/errors.hpp"
#include "otfusion/gmm.hpp"

namespace otfusion {

double SynthRng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double SynthRng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(1.0 - u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t SynthRng::index(std::size_t m) {
  const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(m));
  return std::min(i, m - 1);
}

void validate(const SynthSpec& spec) {
  if (spec.n_classes < 2) throw InvalidInputError("synth: need K >= 2");
  if (spec.n_samples < spec.n_classes) {
    throw InvalidInputError("synth: need N >= K");
  }
  if (spec.dim < 2 || spec.dim < spec.n_classes) {
    throw InvalidInputError("synth: need D >= max(2, K)");
  }
  if (!std::isfinite(spec.separation) || !(spec.separation > 0.0)) {
    throw InvalidInputError("synth: separation must be positive");
  }
  if (!(spec.y_noise >= 0.0 && spec.y_noise <= 1.0)) {
    throw InvalidInputError("synth: y_noise must lie in [0, 1]");
  }
  if (!std::isfinite(spec.y_temperature) || !(spec.y_temperature > 0.0)) {
    throw InvalidInputError("synth: y_temperature must be positive");
  }
}

SynthInstance generate(const SynthSpec& spec) {
  validate(spec);
  const std::size_t n = spec.n_samples, k = spec.n_classes, d = spec.dim;
  SynthRng rng(spec.seed);

  std::vector<std::int64_t> labels;
  labels.reserve(n);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t count = n / k + (c < n % k ? 1 : 0);
    labels.insert(labels.end(), count, static_cast<std::int64_t>(c));
  }
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(labels[i], labels[rng.index(i + 1)]);
  }

  const double corner = spec.separation / std::numbers::sqrt2;
  Matrix features(n, d);
  Matrix logits(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto truth = static_cast<std::size_t>(labels[i]);
    auto x = features.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      x[j] = rng.normal() + (j == truth ? corner : 0.0);
    }

    std::size_t favored = truth;
    if (rng.uniform() < spec.y_noise) {
      const std::size_t w = rng.index(k - 1);
      favored = w < truth ? w : w + 1;
    }
    auto l = logits.row(i);
    for (std::size_t j = 0; j < k; ++j) l[j] = 0.5 * rng.uniform();
    l[favored] = 1.0;
  }

  FeatureMatrix fm(std::move(features));
  if (spec.l2_normalize) fm = l2_normalize_rows(fm);
  return SynthInstance{std::move(fm), row_softmax(logits, spec.y_temperature),
                       std::move(labels)};
}

}  // namespace otfusion
