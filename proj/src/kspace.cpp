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

#include "kcross/kspace.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

#include "kcross/errors.hpp"

namespace kcross {

namespace {

// FFTW's planner is not re-entrant; execution of distinct plans is.
std::mutex& PlannerMutex() {
  static std::mutex m;
  return m;
}

void Transform(int rows, int cols, std::vector<Complex>& data, int sign) {
  static_assert(sizeof(Complex) == sizeof(fftw_complex));
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    plan = fftw_plan_dft_2d(rows, cols, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    fftw_destroy_plan(plan);
  }
}

KSpaceImage Shift(const KSpaceImage& k, bool forward) {
  KSpaceImage out(k.rows, k.cols);
  const int sr = forward ? k.rows / 2 : (k.rows + 1) / 2;
  const int sc = forward ? k.cols / 2 : (k.cols + 1) / 2;
  for (int u = 0; u < k.rows; ++u)
    for (int v = 0; v < k.cols; ++v)
      out((u + sr) % k.rows, (v + sc) % k.cols) = k(u, v);
  return out;
}

}  // namespace

KSpaceImage ForwardKSpace(const Image& image) {
  if (image.rows < 1 || image.cols < 1) {
    Fail(ErrorKind::kInvalidInput, "forward_kspace: empty image");
  }
  KSpaceImage k(image.rows, image.cols);
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (!std::isfinite(image.pixels[i])) {
      Fail(ErrorKind::kInvalidInput,
           "forward_kspace: non-finite pixel at index " + std::to_string(i));
    }
    k.values[i] = Complex(image.pixels[i], 0.0);
  }
  Transform(k.rows, k.cols, k.values, FFTW_FORWARD);
  k.dc_centered = false;
  return k;
}

Image InverseKSpace(const KSpaceImage& k, double* max_imag_residual) {
  if (k.rows < 1 || k.cols < 1 ||
      k.values.size() != static_cast<std::size_t>(k.rows) * k.cols) {
    Fail(ErrorKind::kInvalidInput, "inverse_kspace: malformed spectrum");
  }
  const KSpaceImage& raw = k.dc_centered ? UncenterShift(k) : k;
  std::vector<Complex> data = raw.values;
  for (const Complex& c : data) {
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
      Fail(ErrorKind::kInvalidInput, "inverse_kspace: non-finite coefficient");
    }
  }
  Transform(k.rows, k.cols, data, FFTW_BACKWARD);
  const double norm = 1.0 / (static_cast<double>(k.rows) * k.cols);
  Image out(k.rows, k.cols);
  double worst = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.pixels[i] = data[i].real() * norm;
    worst = std::max(worst, std::abs(data[i].imag() * norm));
  }
  if (max_imag_residual) *max_imag_residual = worst;
  return out;
}

Image Amplitude(const KSpaceImage& k) {
  Image out(k.rows, k.cols);
  for (std::size_t i = 0; i < k.values.size(); ++i)
    out.pixels[i] = std::hypot(k.values[i].real(), k.values[i].imag());
  return out;
}

Image Phase(const KSpaceImage& k) {
  Image out(k.rows, k.cols);
  for (std::size_t i = 0; i < k.values.size(); ++i) {
    const double a = k.values[i].real();
    const double b = k.values[i].imag();
    // atan2(-0, negative) returns -pi; fold it onto +pi.
    double p = (a == 0.0 && b == 0.0) ? 0.0 : std::atan2(b, a);
    if (p == -M_PI) p = M_PI;
    out.pixels[i] = p;
  }
  return out;
}

KSpaceImage CenterShift(const KSpaceImage& k) {
  if (k.dc_centered) return k;
  KSpaceImage out = Shift(k, true);
  out.dc_centered = true;
  return out;
}

KSpaceImage UncenterShift(const KSpaceImage& k) {
  if (!k.dc_centered) return k;
  KSpaceImage out = Shift(k, false);
  out.dc_centered = false;
  return out;
}

Image AmplitudePanel(const KSpaceImage& k) {
  Image amp = Amplitude(CenterShift(k));
  double hi = 0.0;
  for (double& v : amp.pixels) {
    v = std::log1p(v);
    hi = std::max(hi, v);
  }
  if (hi > 0) {
    for (double& v : amp.pixels) v /= hi;
  }
  return amp;
}

}  // namespace kcross
