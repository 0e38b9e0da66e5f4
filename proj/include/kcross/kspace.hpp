// Copyright 2026 The K-CROSS Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KCROSS_KSPACE_HPP_
#define KCROSS_KSPACE_HPP_

#include <complex>
#include <vector>

#include "kcross/tensor.hpp"

namespace kcross {

using Complex = std::complex<double>;

// Frequency-domain coefficients F(u, v), u along rows, v along columns.
struct KSpaceImage {
  int rows = 0;
  int cols = 0;
  std::vector<Complex> values;
  bool dc_centered = false;

  KSpaceImage() = default;
  KSpaceImage(int r, int c)
      : rows(r), cols(c), values(static_cast<std::size_t>(r) * c) {}

  Complex& operator()(int u, int v) {
    return values[static_cast<std::size_t>(u) * cols + v];
  }
  Complex operator()(int u, int v) const {
    return values[static_cast<std::size_t>(u) * cols + v];
  }
};

// Unnormalized forward DFT:
//   F(u,v) = sum_{x,y} f(x,y) exp(-i 2 pi (u x / M + v y / N)).
// Raw (uncentered) ordering. Throws kInvalidInput on non-finite pixels.
KSpaceImage ForwardKSpace(const Image& image);

// Inverse DFT with the 1/(MN) factor; returns the real part. If
// `max_imag_residual` is non-null it receives max |Im| of the result.
Image InverseKSpace(const KSpaceImage& k, double* max_imag_residual = nullptr);

// |F| elementwise.
Image Amplitude(const KSpaceImage& k);
// atan2(Im, Re) elementwise, in (-pi, pi]; 0 at the origin.
Image Phase(const KSpaceImage& k);

// Swaps quadrants so that DC sits at (M/2, N/2). Visualization only.
KSpaceImage CenterShift(const KSpaceImage& k);
KSpaceImage UncenterShift(const KSpaceImage& k);

// log(1 + |F|) of the centered spectrum, rescaled to [0, 1]; used for the
// rating panels.
Image AmplitudePanel(const KSpaceImage& k);

}  // namespace kcross

#endif  // KCROSS_KSPACE_HPP_
