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

// Independent reference implementations. Nothing here calls into the code
// paths it is used to check: they are direct transcriptions of the defining
// formulas with naive loops.

#ifndef KCROSS_TESTS_ORACLES_HPP_
#define KCROSS_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <vector>

#include "kcross/tensor.hpp"

namespace kcross::testing {

// O(M^2 N^2) double sum F(u,v) = sum f(x,y) exp(-i 2 pi (ux/M + vy/N)).
inline std::vector<std::complex<double>> NaiveDft(const Image& img) {
  const int m = img.rows, n = img.cols;
  std::vector<std::complex<double>> out(static_cast<std::size_t>(m) * n);
  for (int u = 0; u < m; ++u) {
    for (int v = 0; v < n; ++v) {
      std::complex<double> acc = 0.0;
      for (int x = 0; x < m; ++x) {
        for (int y = 0; y < n; ++y) {
          const double angle =
              -2.0 * M_PI * (static_cast<double>(u) * x / m +
                             static_cast<double>(v) * y / n);
          acc += img(x, y) * std::complex<double>(std::cos(angle), std::sin(angle));
        }
      }
      out[static_cast<std::size_t>(u) * n + v] = acc;
    }
  }
  return out;
}

// Sliding-window complex convolution (cross-correlation) computed with
// std::complex arithmetic per tap. Input (B, C, H, W) as complex values,
// kernel (O, C, k, k) complex, zero padding.
inline std::vector<std::complex<double>> NaiveComplexConv(
    const std::vector<std::complex<double>>& x, int b, int c, int h, int w,
    const std::vector<std::complex<double>>& k, int o, int kh, int kw,
    int stride, int pad, int* ho_out, int* wo_out) {
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  *ho_out = ho;
  *wo_out = wo;
  std::vector<std::complex<double>> y(static_cast<std::size_t>(b) * o * ho * wo);
  for (int n = 0; n < b; ++n)
    for (int oc = 0; oc < o; ++oc)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          std::complex<double> acc = 0.0;
          for (int ic = 0; ic < c; ++ic)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += k[((static_cast<std::size_t>(oc) * c + ic) * kh + ky) * kw + kx] *
                       x[((static_cast<std::size_t>(n) * c + ic) * h + iy) * w + ix];
              }
          y[((static_cast<std::size_t>(n) * o + oc) * ho + oy) * wo + ox] = acc;
        }
  return y;
}

// Real cross-correlation, same layout as above.
inline std::vector<double> NaiveRealConv(const std::vector<double>& x, int b,
                                         int c, int h, int w,
                                         const std::vector<double>& k, int o,
                                         int kh, int kw, int stride, int pad) {
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> y(static_cast<std::size_t>(b) * o * ho * wo, 0.0);
  for (int n = 0; n < b; ++n)
    for (int oc = 0; oc < o; ++oc)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double acc = 0.0;
          for (int ic = 0; ic < c; ++ic)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += k[((static_cast<std::size_t>(oc) * c + ic) * kh + ky) * kw + kx] *
                       x[((static_cast<std::size_t>(n) * c + ic) * h + iy) * w + ix];
              }
          y[((static_cast<std::size_t>(n) * o + oc) * ho + oy) * wo + ox] = acc;
        }
  return y;
}

// Explicit 3x3 stencil [[0,1,0],[1,-4,1],[0,1,0]] on an edge-replicated
// copy of the plane.
inline std::vector<double> NaiveLaplacian(const std::vector<double>& plane,
                                          int h, int w) {
  std::vector<double> padded(static_cast<std::size_t>(h + 2) * (w + 2));
  for (int y = -1; y <= h; ++y)
    for (int x = -1; x <= w; ++x) {
      const int sy = std::clamp(y, 0, h - 1), sx = std::clamp(x, 0, w - 1);
      padded[static_cast<std::size_t>(y + 1) * (w + 2) + (x + 1)] =
          plane[static_cast<std::size_t>(sy) * w + sx];
    }
  const double stencil[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = 0; dy < 3; ++dy)
        for (int dx = 0; dx < 3; ++dx)
          acc += stencil[dy][dx] *
                 padded[static_cast<std::size_t>(y + dy) * (w + 2) + (x + dx)];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

// Literal transcription of the ranking alignment: Counter over the
// reference levels, sorted levels, argsort of the scores, rank ranges per
// level, and i / len(level) assigned to the image at each rank.
inline std::vector<double> LiteralUniformize(const std::vector<double>& ref,
                                             const std::vector<double>& syn) {
  std::map<double, int> recounted;
  for (double r : ref) recounted[r] += 1;
  std::vector<double> level;
  for (const auto& kv : recounted) level.push_back(kv.first);
  std::vector<int> index(syn.size());
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = static_cast<int>(i);
  std::stable_sort(index.begin(), index.end(),
                   [&](int a, int b) { return syn[a] < syn[b]; });
  std::vector<std::pair<int, int>> pairwise;
  int start = 0;
  for (double l : level) {
    const int end = start + recounted[l];
    pairwise.emplace_back(start, end);
    start = end;
  }
  std::vector<double> uniform_result(syn.size(), -1.0);
  for (std::size_t rank = 0; rank < index.size(); ++rank) {
    for (std::size_t i = 0; i < pairwise.size(); ++i) {
      const auto& p = pairwise[i];
      if (static_cast<int>(rank) >= p.first && static_cast<int>(rank) < p.second) {
        uniform_result[index[rank]] =
            static_cast<double>(i) / static_cast<double>(level.size());
        break;
      }
    }
  }
  return uniform_result;
}

inline double LiteralInconsistency(const std::vector<double>& ref,
                                   const std::vector<double>& aligned) {
  double s = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) s += std::abs(ref[i] - aligned[i]);
  return s / static_cast<double>(ref.size());
}

// Sliding-window SSIM: for every pixel, weighted moments under an 11x11
// Gaussian (sigma 1.5) truncated at the border and renormalized, then the
// mean of the SSIM map. Dynamic range 1.
inline double NaiveSsim(const Image& a, const Image& b) {
  const int r = 5;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (int y = 0; y < a.rows; ++y)
    for (int x = 0; x < a.cols; ++x) {
      double wsum = 0, ma = 0, mb = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= a.rows || xx < 0 || xx >= a.cols) continue;
          const double wt = std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
          wsum += wt;
          ma += wt * a(yy, xx);
          mb += wt * b(yy, xx);
        }
      ma /= wsum;
      mb /= wsum;
      double va = 0, vb = 0, cov = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= a.rows || xx < 0 || xx >= a.cols) continue;
          const double wt =
              std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma)) / wsum;
          va += wt * (a(yy, xx) - ma) * (a(yy, xx) - ma);
          vb += wt * (b(yy, xx) - mb) * (b(yy, xx) - mb);
          cov += wt * (a(yy, xx) - ma) * (b(yy, xx) - mb);
        }
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  return total / static_cast<double>(a.size());
}

}  // namespace kcross::testing

#endif  // KCROSS_TESTS_ORACLES_HPP_
