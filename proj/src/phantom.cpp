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


#include "kcross/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "kcross/errors.hpp"
#include "kcross/kspace.hpp"

namespace kcross::phantom {
namespace {

constexpr std::uint64_t kTextureStream = 0x7e87u;
constexpr std::uint64_t kDegradeStream = 0xde94u;

// Sum of random low-frequency plane waves, roughly in [-1, 1].
class WaveField {
 public:
  WaveField(std::uint64_t seed, int waves, double k_lo, double k_hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2 * M_PI);
    std::uniform_real_distribution<double> mag(k_lo, k_hi);
    for (int i = 0; i < waves; ++i) {
      const double a = angle(rng), k = mag(rng);
      waves_.push_back({k * std::cos(a), k * std::sin(a), angle(rng)});
    }
  }

  double operator()(double y, double x) const {
    double v = 0.0;
    for (const auto& w : waves_) v += std::cos(w.ky * y + w.kx * x + w.phase);
    return v * std::sqrt(2.0 / waves_.size()) / 1.5;
  }

 private:
  struct Wave {
    double ky, kx, phase;
  };
  std::vector<Wave> waves_;
};

Image GaussianBlur(const Image& in, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[i + radius];
  }
  for (double& v : k) v /= total;
  Image tmp(in.rows, in.cols), out(in.rows, in.cols);
  for (int y = 0; y < in.rows; ++y)
    for (int x = 0; x < in.cols; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[i + radius] * in(y, std::clamp(x + i, 0, in.cols - 1));
      tmp(y, x) = acc;
    }
  for (int y = 0; y < in.rows; ++y)
    for (int x = 0; x < in.cols; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[i + radius] * tmp(std::clamp(y + i, 0, in.rows - 1), x);
      out(y, x) = acc;
    }
  return out;
}

void ValidateSpec(const PhantomSpec& spec) {
  if (spec.size < 8) Fail(ErrorKind::kSpec, "phantom size must be >= 8");
  if (!(spec.severity >= 0.0 && spec.severity <= 1.0)) {
    Fail(ErrorKind::kSpec, "severity must lie in [0, 1]");
  }
  if (spec.structures.empty()) Fail(ErrorKind::kSpec, "phantom has no head outline");
  if (spec.tumor) {
    const Tumor& tu = *spec.tumor;
    if (tu.radius <= 0 || tu.cy - tu.radius < 0 || tu.cx - tu.radius < 0 ||
        tu.cy + tu.radius > spec.size - 1 || tu.cx + tu.radius > spec.size - 1) {
      Fail(ErrorKind::kSpec, "tumor disk lies outside the image bounds");
    }
  } else if (spec.degradation == Degradation::kTumorTextureCorrupt) {
    Fail(ErrorKind::kSpec, "tumor_texture_corrupt requires a tumor");
  }
}

}  // namespace

std::string DegradationName(Degradation kind) {
  switch (kind) {
    case Degradation::kGaussianBlur: return "gaussian_blur";
    case Degradation::kAdditiveNoise: return "additive_noise";
    case Degradation::kKspaceMaskout: return "kspace_maskout";
    case Degradation::kIntensityShift: return "intensity_shift";
    case Degradation::kTumorTextureCorrupt: return "tumor_texture_corrupt";
  }
  return "unknown";
}

Degradation ParseDegradation(const std::string& name) {
  for (Degradation d : kAllDegradations)
    if (DegradationName(d) == name) return d;
  Fail(ErrorKind::kConfig, "unknown degradation kind '" + name + "'");
}

bool Ellipse::Contains(double y, double x) const {
  const double c = std::cos(angle), s = std::sin(angle);
  const double dy = y - cy, dx = x - cx;
  const double u = (c * dy + s * dx) / ry;
  const double v = (-s * dy + c * dx) / rx;
  return u * u + v * v <= 1.0;
}

double Ellipse::Area() const { return M_PI * ry * rx; }

double SourceTransfer(double latent) {
  const double u = std::clamp(latent, 0.0, 1.0);
  return u * u;
}

double TargetTransfer(double latent) {
  return 0.7 * std::sqrt(std::clamp(latent, 0.0, 1.0));
}

double OracleLevel(double severity) {
  return std::round(9.0 * (1.0 - severity)) / 10.0;
}

PhantomSpec RandomSpec(std::uint64_t seed, Degradation kind, double severity,
                       bool healthy, int size) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const double scale = size / 64.0;
  PhantomSpec spec;
  spec.size = size;
  spec.degradation = kind;
  spec.severity = severity;
  spec.seed = seed;
  Ellipse head;
  head.cy = size / 2.0 + uni(-2, 2) * scale;
  head.cx = size / 2.0 + uni(-2, 2) * scale;
  head.ry = uni(24, 28) * scale;
  head.rx = uni(19, 24) * scale;
  head.angle = uni(-0.2, 0.2);
  head.latent = 0.55;
  spec.structures.push_back(head);
  const double latents[] = {0.3, 0.42, 0.7, 0.8};
  const int count = 3 + static_cast<int>(rng() % 2);
  for (int i = 0; i < count; ++i) {
    Ellipse e;
    e.cy = head.cy + uni(-0.45, 0.45) * head.ry;
    e.cx = head.cx + uni(-0.45, 0.45) * head.rx;
    e.ry = uni(3, 8) * scale;
    e.rx = uni(3, 8) * scale;
    e.angle = uni(0, M_PI);
    e.latent = latents[rng() % 4];
    spec.structures.push_back(e);
  }
  if (!healthy) {
    Tumor t;
    t.radius = uni(4, 9) * scale;
    const double reach = std::max(0.0, std::min(head.ry, head.rx) - t.radius - 4 * scale);
    const double r = reach * std::sqrt(uni(0, 1)), a = uni(0, 2 * M_PI);
    t.cy = head.cy + r * std::sin(a);
    t.cx = head.cx + r * std::cos(a);
    t.brightness = uni(0.9, 0.98);
    spec.tumor = t;
  }
  return spec;
}

Image RenderEllipse(int size, const Ellipse& e, double value) {
  Image img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (e.Contains(y, x)) img(y, x) = value;
  return img;
}

Image KspaceMaskout(const Image& image, double fraction) {
  const int m = image.rows, n = image.cols;
  const std::size_t total = static_cast<std::size_t>(m) * n;
  const auto target = static_cast<std::size_t>(std::llround(fraction * total));
  struct Group {
    double radius;
    std::size_t first, second;
  };
  std::vector<Group> groups;
  for (int u = 0; u < m; ++u)
    for (int v = 0; v < n; ++v) {
      const std::size_t idx = static_cast<std::size_t>(u) * n + v;
      const std::size_t partner =
          static_cast<std::size_t>((m - u) % m) * n + (n - v) % n;
      if (partner < idx) continue;
      const double fu = std::min(u, m - u), fv = std::min(v, n - v);
      groups.push_back({std::hypot(fu, fv), idx, partner});
    }
  std::stable_sort(groups.begin(), groups.end(),
                   [](const Group& a, const Group& b) { return a.radius > b.radius; });
  KSpaceImage k = ForwardKSpace(image);
  std::size_t zeroed = 0;
  for (const Group& g : groups) {
    if (zeroed == target) break;
    const std::size_t cost = g.first == g.second ? 1 : 2;
    if (zeroed + cost > target) continue;
    k.values[g.first] = 0.0;
    k.values[g.second] = 0.0;
    zeroed += cost;
  }
  return InverseKSpace(k);
}

PhantomSample Generate(const PhantomSpec& spec) {
  ValidateSpec(spec);
  const int size = spec.size;
  const WaveField texture(spec.seed ^ kTextureStream, 6, 0.05, 0.25);
  const WaveField tumor_texture(spec.seed ^ (kTextureStream << 1), 4, 0.3, 0.6);
  PhantomSample out;
  out.spec = spec;
  out.source = Image(size, size);
  out.target = Image(size, size);
  out.mask_truth = Image(size, size);
  const Ellipse& head = spec.structures[0];
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double latent = 0.0;
      for (const Ellipse& e : spec.structures)
        if (e.Contains(y, x)) latent = e.latent;
      if (!head.Contains(y, x)) continue;
      latent += 0.04 * texture(y, x);
      out.source(y, x) = SourceTransfer(latent);
      out.target(y, x) = TargetTransfer(latent);
    }
  if (spec.tumor) {
    const Tumor& tu = *spec.tumor;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double dy = y - tu.cy, dx = x - tu.cx;
        if (dy * dy + dx * dx > tu.radius * tu.radius) continue;
        const double tex = tumor_texture(y, x);
        out.mask_truth(y, x) = 1.0;
        out.source(y, x) = SourceTransfer(0.4 + 0.04 * tex);
        out.target(y, x) = std::clamp(tu.brightness + 0.02 * tex, 0.0, 1.0);
      }
  }
  out.oracle = OracleLevel(spec.severity);

  const double s = spec.severity;
  if (s == 0.0) {
    out.synthesized = out.target;
    return out;
  }
  std::mt19937_64 rng(spec.seed ^ kDegradeStream);
  Image t_hat = out.target;
  switch (spec.degradation) {
    case Degradation::kGaussianBlur:
      t_hat = GaussianBlur(out.target, 2.5 * s);
      break;
    case Degradation::kAdditiveNoise: {
      std::normal_distribution<double> noise(0.0, 0.15 * s);
      for (double& v : t_hat.pixels) v = std::clamp(v + noise(rng), 0.0, 1.0);
      break;
    }
    case Degradation::kKspaceMaskout:
      t_hat = KspaceMaskout(out.target, s);
      break;
    case Degradation::kIntensityShift:
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
          if (head.Contains(y, x)) t_hat(y, x) += 0.25 * s * (1.0 - t_hat(y, x));
      break;
    case Degradation::kTumorTextureCorrupt: {
      const WaveField pattern(rng(), 8, 0.6, 1.4);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          if (out.mask_truth(y, x) == 0.0) continue;
          const double q = std::clamp(0.5 + 0.5 * pattern(y, x), 0.0, 1.0);
          t_hat(y, x) -= 0.35 * s * q;
        }
      break;
    }
  }
  out.synthesized = std::move(t_hat);
  return out;
}

std::vector<PhantomSpec> MakeSuite(int n, std::uint64_t seed,
                                   const std::vector<Degradation>& kinds,
                                   bool healthy, int size) {
  if (n < 1 || kinds.empty()) Fail(ErrorKind::kConfig, "suite needs n >= 1 and kinds");
  if (healthy && std::find(kinds.begin(), kinds.end(),
                           Degradation::kTumorTextureCorrupt) != kinds.end()) {
    Fail(ErrorKind::kSpec, "healthy suites cannot use tumor_texture_corrupt");
  }
  std::mt19937_64 rng(seed);
  std::vector<PhantomSpec> specs;
  for (int i = 0; i < n; ++i) {
    const Degradation kind = kinds[i % kinds.size()];
    const int level = static_cast<int>(rng() % 10);
    const double jitter = std::uniform_real_distribution<double>(-0.4, 0.4)(rng) / 9.0;
    const double severity = std::clamp(1.0 - level / 9.0 + jitter, 0.0, 1.0);
    specs.push_back(RandomSpec(rng(), kind, severity, healthy, size));
  }
  return specs;
}

}  // namespace kcross::phantom
