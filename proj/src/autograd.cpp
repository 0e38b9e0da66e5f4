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

#include "kcross/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "kcross/errors.hpp"

namespace kcross::ag {

namespace {

using MatRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

thread_local bool g_grad_enabled = true;

void RequireSameShape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    Fail(ErrorKind::kShape, std::string(op) + ": shape mismatch " +
                                ShapeString(a.shape()) + " vs " +
                                ShapeString(b.shape()));
  }
}

void RequireRank(const Var& a, int rank, const char* op) {
  if (a.value().rank() != rank) {
    Fail(ErrorKind::kShape, std::string(op) + ": expected rank " +
                                std::to_string(rank) + ", got " +
                                ShapeString(a.shape()));
  }
}

Var MakeResult(Tensor value, std::vector<Var> inputs,
               std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const Var& in : inputs) {
      if (in.defined() && in.requires_grad()) needs = true;
    }
  }
  if (needs) {
    node->requires_grad = true;
    for (Var& in : inputs) {
      if (in.defined()) node->parents.push_back(in.node());
    }
    node->backward = std::move(backward);
  }
  return Var::FromNode(std::move(node));
}

bool Wants(const Var& v) { return v.defined() && v.requires_grad(); }

// cols has shape (C*kh*kw, Ho*Wo).
void Im2Col(const double* x, int c, int h, int w, int kh, int kw, int stride,
            int pad, int ho, int wo, double* cols) {
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < c; ++ci) {
    const double* xc = x + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        double* row =
            cols + (static_cast<std::size_t>(ci) * kh * kw + ky * kw + kx) *
                       plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* out = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(out, out + wo, 0.0);
            continue;
          }
          const double* xr = xc + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            out[ox] = (ix >= 0 && ix < w) ? xr[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of Im2Col: accumulates cols into x.
void Col2Im(const double* cols, int c, int h, int w, int kh, int kw,
            int stride, int pad, int ho, int wo, double* x) {
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < c; ++ci) {
    double* xc = x + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const double* row =
            cols + (static_cast<std::size_t>(ci) * kh * kw + ky * kw + kx) *
                       plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const double* in = row + static_cast<std::size_t>(oy) * wo;
          double* xr = xc + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) xr[ix] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor& Node::EnsureGrad() {
  if (grad.numel() != value.numel() || grad.shape() != value.shape()) {
    grad = Tensor(value.shape(), 0.0);
  }
  return grad;
}

Var::Var(Tensor value, bool requires_grad) {
  node_ = std::make_shared<Node>();
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Var::item() const {
  if (value().numel() != 1) {
    Fail(ErrorKind::kShape, "item() on non-scalar " + ShapeString(shape()));
  }
  return value()[0];
}

void Var::ZeroGrad() {
  if (node_) node_->EnsureGrad().Fill(0.0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool GradEnabled() { return g_grad_enabled; }

void Backward(const Var& root) {
  if (!root.defined()) Fail(ErrorKind::kState, "backward on undefined Var");
  if (root.value().numel() != 1) {
    Fail(ErrorKind::kShape, "backward requires a scalar root");
  }
  if (!root.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->EnsureGrad().Fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward) {
      node->EnsureGrad();
      node->backward(*node);
      node->grad = Tensor();  // interior gradients are not retained
    }
  }
}

Var Constant(Tensor value) { return Var(std::move(value), false); }

Var Detach(const Var& x) { return Var(x.value(), false); }

Var Add(const Var& a, const Var& b) {
  RequireSameShape(a, b, "Add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return MakeResult(std::move(out), {a, b}, [a, b](Node& self) {
    for (const Var* v : {&a, &b}) {
      if (!Wants(*v)) continue;
      Tensor& g = v->node()->EnsureGrad();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
  });
}

Var Sub(const Var& a, const Var& b) {
  RequireSameShape(a, b, "Sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return MakeResult(std::move(out), {a, b}, [a, b](Node& self) {
    if (Wants(a)) {
      Tensor& g = a.node()->EnsureGrad();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
    if (Wants(b)) {
      Tensor& g = b.node()->EnsureGrad();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var Mul(const Var& a, const Var& b) {
  RequireSameShape(a, b, "Mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return MakeResult(std::move(out), {a, b}, [a, b](Node& self) {
    if (Wants(a)) {
      Tensor& g = a.node()->EnsureGrad();
      for (std::size_t i = 0; i < g.numel(); ++i)
        g[i] += self.grad[i] * b.value()[i];
    }
    if (Wants(b)) {
      Tensor& g = b.node()->EnsureGrad();
      for (std::size_t i = 0; i < g.numel(); ++i)
        g[i] += self.grad[i] * a.value()[i];
    }
  });
}

Var Scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return MakeResult(std::move(out), {a}, [a, factor](Node& self) {
    Tensor& g = a.node()->EnsureGrad();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * factor;
  });
}

Var AddScalar(const Var& a, double offset) {
  Tensor out = a.value();
  for (double& v : out.values()) v += offset;
  return MakeResult(std::move(out), {a}, [a](Node& self) {
    Tensor& g = a.node()->EnsureGrad();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
  });
}

Var Square(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= v;
  return MakeResult(std::move(out), {a}, [a](Node& self) {
    Tensor& g = a.node()->EnsureGrad();
    for (std::size_t i = 0; i < g.numel(); ++i)
      g[i] += 2.0 * a.value()[i] * self.grad[i];
  });
}

Var Abs(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::abs(v);
  return MakeResult(std::move(out), {a}, [a](Node& self) {
    Tensor& g = a.node()->EnsureGrad();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double x = a.value()[i];
      g[i] += self.grad[i] * (x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0));
    }
  });
}

Var Tanh(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::tanh(v);
  auto result = MakeResult(std::move(out), {a}, nullptr);
  if (result.requires_grad()) {
    Node* self_ptr = result.node().get();
    result.node()->backward = [a, self_ptr](Node& self) {
      Tensor& g = a.node()->EnsureGrad();
      for (std::size_t i = 0; i < g.numel(); ++i) {
        const double y = self_ptr->value[i];
        g[i] += self.grad[i] * (1.0 - y * y);
      }
    };
  }
  return result;
}

Var Relu(const Var& a) { return LeakyRelu(a, 0.0); }

Var LeakyRelu(const Var& a, double slope) {
  Tensor out = a.value();
  for (double& v : out.values()) v = v > 0 ? v : slope * v;
  return MakeResult(std::move(out), {a}, [a, slope](Node& self) {
    Tensor& g = a.node()->EnsureGrad();
    for (std::size_t i = 0; i < g.numel(); ++i)
      g[i] += self.grad[i] * (a.value()[i] > 0 ? 1.0 : slope);
  });
}

Var Reshape(const Var& a, Shape shape) {
  Tensor out = a.value().Reshaped(std::move(shape));
  return MakeResult(std::move(out), {a}, [a](Node& self) {
    Tensor& g = a.node()->EnsureGrad();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
  });
}

Var SliceRows(const Var& a, int begin, int end) {
  if (a.value().rank() < 1 || begin < 0 || end > a.shape()[0] || begin >= end) {
    Fail(ErrorKind::kShape, "SliceRows [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") out of range for " +
                                ShapeString(a.shape()));
  }
  Shape shape = a.shape();
  const std::size_t row = a.value().numel() / shape[0];
  shape[0] = end - begin;
  Tensor out(shape);
  std::copy(a.value().data() + begin * row, a.value().data() + end * row, out.data());
  return MakeResult(std::move(out), {a}, [a, begin, row](Node& self) {
    double* g = a.node()->EnsureGrad().data() + begin * row;
    for (std::size_t i = 0; i < self.grad.numel(); ++i) g[i] += self.grad[i];
  });
}

Var Sum(const Var& a) {
  Tensor out({1}, a.value().Sum());
  return MakeResult(std::move(out), {a}, [a](Node& self) {
    Tensor& g = a.node()->EnsureGrad();
    const double s = self.grad[0];
    for (double& v : g.values()) v += s;
  });
}

Var Mean(const Var& a) {
  const double n = static_cast<double>(a.value().numel());
  if (n == 0) Fail(ErrorKind::kShape, "Mean of empty tensor");
  Tensor out({1}, a.value().Sum() / n);
  return MakeResult(std::move(out), {a}, [a, n](Node& self) {
    Tensor& g = a.node()->EnsureGrad();
    const double s = self.grad[0] / n;
    for (double& v : g.values()) v += s;
  });
}

Var WeightedSum(std::span<const Var> terms, std::span<const double> weights) {
  if (terms.size() != weights.size()) {
    Fail(ErrorKind::kInvalidArgument, "WeightedSum: terms/weights mismatch");
  }
  double total = 0.0;
  std::vector<Var> inputs(terms.begin(), terms.end());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].value().numel() != 1) {
      Fail(ErrorKind::kShape, "WeightedSum expects scalar terms");
    }
    total += weights[i] * terms[i].value()[0];
  }
  std::vector<double> w(weights.begin(), weights.end());
  return MakeResult(Tensor({1}, total), inputs,
                    [inputs, w](Node& self) {
                      for (std::size_t i = 0; i < inputs.size(); ++i) {
                        if (!Wants(inputs[i])) continue;
                        inputs[i].node()->EnsureGrad()[0] +=
                            w[i] * self.grad[0];
                      }
                    });
}

Var Conv2d(const Var& x, const Var& weight, const Var& bias, ConvGeometry g) {
  RequireRank(x, 4, "Conv2d input");
  RequireRank(weight, 4, "Conv2d weight");
  const int n = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
            w = x.shape()[3];
  const int o = weight.shape()[0], kh = weight.shape()[2],
            kw = weight.shape()[3];
  if (weight.shape()[1] != c) {
    Fail(ErrorKind::kShape, "Conv2d: channel axis mismatch, input has " +
                                std::to_string(c) + " channels, weight expects " +
                                std::to_string(weight.shape()[1]));
  }
  if (g.stride < 1 || g.padding < 0) {
    Fail(ErrorKind::kInvalidArgument, "Conv2d: bad stride/padding");
  }
  if (h + 2 * g.padding < kh) {
    Fail(ErrorKind::kShape, "Conv2d: height axis smaller than kernel");
  }
  if (w + 2 * g.padding < kw) {
    Fail(ErrorKind::kShape, "Conv2d: width axis smaller than kernel");
  }
  if (bias.defined() && bias.value().numel() != static_cast<std::size_t>(o)) {
    Fail(ErrorKind::kShape, "Conv2d: bias size mismatch");
  }
  const int ho = (h + 2 * g.padding - kh) / g.stride + 1;
  const int wo = (w + 2 * g.padding - kw) / g.stride + 1;
  const int ckk = c * kh * kw;
  const int hw = ho * wo;

  Tensor out({n, o, ho, wo});
  auto cols = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(n) * ckk * hw);
  CMapRM wmat(weight.value().data(), o, ckk);
  for (int b = 0; b < n; ++b) {
    double* colb = cols->data() + static_cast<std::size_t>(b) * ckk * hw;
    Im2Col(x.value().data() + static_cast<std::size_t>(b) * c * h * w, c, h,
           w, kh, kw, g.stride, g.padding, ho, wo, colb);
    MapRM y(out.data() + static_cast<std::size_t>(b) * o * hw, o, hw);
    y.noalias() = wmat * CMapRM(colb, ckk, hw);
    if (bias.defined()) {
      for (int oc = 0; oc < o; ++oc) y.row(oc).array() += bias.value()[oc];
    }
  }
  return MakeResult(
      std::move(out), {x, weight, bias},
      [x, weight, bias, cols, n, c, h, w, o, kh, kw, ho, wo, ckk, hw,
       g](Node& self) {
        CMapRM wmat(weight.value().data(), o, ckk);
        std::vector<double> dcol;
        if (Wants(x)) dcol.resize(static_cast<std::size_t>(ckk) * hw);
        for (int b = 0; b < n; ++b) {
          CMapRM dy(self.grad.data() + static_cast<std::size_t>(b) * o * hw, o,
                    hw);
          const double* colb =
              cols->data() + static_cast<std::size_t>(b) * ckk * hw;
          if (Wants(weight)) {
            MapRM dw(weight.node()->EnsureGrad().data(), o, ckk);
            dw.noalias() += dy * CMapRM(colb, ckk, hw).transpose();
          }
          if (Wants(bias)) {
            Tensor& db = bias.node()->EnsureGrad();
            for (int oc = 0; oc < o; ++oc) {
              double acc = 0.0;
              for (int j = 0; j < hw; ++j) acc += dy(oc, j);
              db[oc] += acc;
            }
          }
          if (Wants(x)) {
            MapRM dc(dcol.data(), ckk, hw);
            dc.noalias() = wmat.transpose() * dy;
            Col2Im(dcol.data(), c, h, w, kh, kw, g.stride, g.padding, ho, wo,
                   x.node()->EnsureGrad().data() +
                       static_cast<std::size_t>(b) * c * h * w);
          }
        }
      });
}

Var ConvTranspose2d(const Var& x, const Var& weight, const Var& bias,
                    ConvGeometry g) {
  RequireRank(x, 4, "ConvTranspose2d input");
  RequireRank(weight, 4, "ConvTranspose2d weight");
  const int n = x.shape()[0], cin = x.shape()[1], h = x.shape()[2],
            w = x.shape()[3];
  const int cout = weight.shape()[1], kh = weight.shape()[2],
            kw = weight.shape()[3];
  if (weight.shape()[0] != cin) {
    Fail(ErrorKind::kShape,
         "ConvTranspose2d: channel axis mismatch, input has " +
             std::to_string(cin) + " channels, weight expects " +
             std::to_string(weight.shape()[0]));
  }
  if (g.stride < 1 || g.padding < 0) {
    Fail(ErrorKind::kInvalidArgument, "ConvTranspose2d: bad stride/padding");
  }
  const int ho = (h - 1) * g.stride - 2 * g.padding + kh;
  const int wo = (w - 1) * g.stride - 2 * g.padding + kw;
  if (ho < 1 || wo < 1) {
    Fail(ErrorKind::kShape, "ConvTranspose2d: empty output");
  }
  if (bias.defined() &&
      bias.value().numel() != static_cast<std::size_t>(cout)) {
    Fail(ErrorKind::kShape, "ConvTranspose2d: bias size mismatch");
  }
  const int ckk = cout * kh * kw;
  const int hw = h * w;
  const std::size_t out_plane = static_cast<std::size_t>(ho) * wo;

  Tensor out({n, cout, ho, wo});
  CMapRM wmat(weight.value().data(), cin, ckk);
  std::vector<double> col(static_cast<std::size_t>(ckk) * hw);
  for (int b = 0; b < n; ++b) {
    MapRM cm(col.data(), ckk, hw);
    cm.noalias() =
        wmat.transpose() *
        CMapRM(x.value().data() + static_cast<std::size_t>(b) * cin * hw, cin,
               hw);
    double* yb = out.data() + static_cast<std::size_t>(b) * cout * out_plane;
    Col2Im(col.data(), cout, ho, wo, kh, kw, g.stride, g.padding, h, w, yb);
    if (bias.defined()) {
      for (int oc = 0; oc < cout; ++oc) {
        double* p = yb + oc * out_plane;
        for (std::size_t i = 0; i < out_plane; ++i) p[i] += bias.value()[oc];
      }
    }
  }
  return MakeResult(
      std::move(out), {x, weight, bias},
      [x, weight, bias, n, cin, h, w, cout, kh, kw, ho, wo, ckk, hw, out_plane,
       g](Node& self) {
        CMapRM wmat(weight.value().data(), cin, ckk);
        std::vector<double> dcol(static_cast<std::size_t>(ckk) * hw);
        for (int b = 0; b < n; ++b) {
          const double* dyb =
              self.grad.data() + static_cast<std::size_t>(b) * cout * out_plane;
          Im2Col(dyb, cout, ho, wo, kh, kw, g.stride, g.padding, h, w,
                 dcol.data());
          CMapRM dc(dcol.data(), ckk, hw);
          if (Wants(x)) {
            MapRM dx(x.node()->EnsureGrad().data() +
                         static_cast<std::size_t>(b) * cin * hw,
                     cin, hw);
            dx.noalias() += wmat * dc;
          }
          if (Wants(weight)) {
            MapRM dw(weight.node()->EnsureGrad().data(), cin, ckk);
            dw.noalias() +=
                CMapRM(x.value().data() + static_cast<std::size_t>(b) * cin * hw,
                       cin, hw) *
                dc.transpose();
          }
          if (Wants(bias)) {
            Tensor& db = bias.node()->EnsureGrad();
            for (int oc = 0; oc < cout; ++oc) {
              const double* p = dyb + oc * out_plane;
              double s = 0.0;
              for (std::size_t i = 0; i < out_plane; ++i) s += p[i];
              db[oc] += s;
            }
          }
        }
      });
}

Var BatchNorm2d(const Var& x, const Var& gamma, const Var& beta,
                BatchNormState& state, bool training) {
  RequireRank(x, 4, "BatchNorm2d");
  const int n = x.shape()[0], c = x.shape()[1];
  const std::size_t plane =
      static_cast<std::size_t>(x.shape()[2]) * x.shape()[3];
  if (gamma.value().numel() != static_cast<std::size_t>(c) ||
      beta.value().numel() != static_cast<std::size_t>(c)) {
    Fail(ErrorKind::kShape, "BatchNorm2d: affine parameter size mismatch");
  }
  if (state.running_mean.numel() != static_cast<std::size_t>(c)) {
    state.running_mean = Tensor({c}, 0.0);
    state.running_var = Tensor({c}, 1.0);
  }
  if (training && n < 2) {
    Fail(ErrorKind::kConfig,
         "batch normalization in training mode needs batch size >= 2");
  }
  const double count = static_cast<double>(n) * plane;
  const double eps = state.eps;
  Tensor out(x.shape());
  auto xhat = std::make_shared<Tensor>(x.shape());
  auto inv_std = std::make_shared<std::vector<double>>(c);
  const Tensor& xv = x.value();
  for (int ch = 0; ch < c; ++ch) {
    double mean, var;
    if (training) {
      double s = 0.0;
      for (int b = 0; b < n; ++b) {
        const double* p = xv.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      mean = s / count;
      double ss = 0.0;
      for (int b = 0; b < n; ++b) {
        const double* p = xv.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) ss += (p[i] - mean) * (p[i] - mean);
      }
      var = ss / count;
      const double unbiased = count > 1 ? ss / (count - 1) : var;
      state.running_mean[ch] =
          (1 - state.momentum) * state.running_mean[ch] + state.momentum * mean;
      state.running_var[ch] =
          (1 - state.momentum) * state.running_var[ch] + state.momentum * unbiased;
    } else {
      mean = state.running_mean[ch];
      var = state.running_var[ch];
    }
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[ch] = is;
    const double gm = gamma.value()[ch], bt = beta.value()[ch];
    for (int b = 0; b < n; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double xh = (xv[off + i] - mean) * is;
        (*xhat)[off + i] = xh;
        out[off + i] = gm * xh + bt;
      }
    }
  }
  return MakeResult(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, n, c, plane, count,
       training](Node& self) {
        for (int ch = 0; ch < c; ++ch) {
          double sum_dy = 0.0, sum_dy_xh = 0.0;
          for (int b = 0; b < n; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_dy += self.grad[off + i];
              sum_dy_xh += self.grad[off + i] * (*xhat)[off + i];
            }
          }
          if (Wants(gamma)) gamma.node()->EnsureGrad()[ch] += sum_dy_xh;
          if (Wants(beta)) beta.node()->EnsureGrad()[ch] += sum_dy;
          if (!Wants(x)) continue;
          Tensor& dx = x.node()->EnsureGrad();
          const double gm = gamma.value()[ch];
          const double is = (*inv_std)[ch];
          for (int b = 0; b < n; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const double dxh = self.grad[off + i] * gm;
              if (training) {
                dx[off + i] += is / count *
                               (count * dxh - gm * sum_dy -
                                (*xhat)[off + i] * gm * sum_dy_xh);
              } else {
                dx[off + i] += dxh * is;
              }
            }
          }
        }
      });
}

Var UpsampleNearest(const Var& x, int factor) {
  if (factor < 1) {
    Fail(ErrorKind::kInvalidArgument,
         "upsample factor must be >= 1, got " + std::to_string(factor));
  }
  RequireRank(x, 4, "UpsampleNearest");
  const int n = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
            w = x.shape()[3];
  const int ho = h * factor, wo = w * factor;
  Tensor out({n, c, ho, wo});
  for (int p = 0; p < n * c; ++p) {
    const double* src = x.value().data() + static_cast<std::size_t>(p) * h * w;
    double* dst = out.data() + static_cast<std::size_t>(p) * ho * wo;
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx)
        dst[y * wo + xx] = src[(y / factor) * w + xx / factor];
  }
  return MakeResult(std::move(out), {x},
                    [x, n, c, h, w, ho, wo, factor](Node& self) {
                      Tensor& g = x.node()->EnsureGrad();
                      for (int p = 0; p < n * c; ++p) {
                        const double* src = self.grad.data() +
                                            static_cast<std::size_t>(p) * ho * wo;
                        double* dst =
                            g.data() + static_cast<std::size_t>(p) * h * w;
                        for (int y = 0; y < ho; ++y)
                          for (int xx = 0; xx < wo; ++xx)
                            dst[(y / factor) * w + xx / factor] +=
                                src[y * wo + xx];
                      }
                    });
}

Var Concat(std::span<const Var> parts) {
  if (parts.empty()) Fail(ErrorKind::kInvalidArgument, "Concat of nothing");
  const Shape& s0 = parts[0].shape();
  if (s0.size() < 2) Fail(ErrorKind::kShape, "Concat needs rank >= 2");
  const int outer = s0[0];
  std::size_t inner = 1;
  for (std::size_t d = 2; d < s0.size(); ++d) inner *= s0[d];
  int total_c = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != s0.size() || s[0] != outer) {
      Fail(ErrorKind::kShape, "Concat: incompatible shapes " + ShapeString(s0) +
                                  " and " + ShapeString(s));
    }
    for (std::size_t d = 2; d < s0.size(); ++d) {
      if (s[d] != s0[d]) {
        Fail(ErrorKind::kShape, "Concat: spatial axis " + std::to_string(d) +
                                    " mismatch");
      }
    }
    total_c += s[1];
  }
  Shape out_shape = s0;
  out_shape[1] = total_c;
  Tensor out(out_shape);
  std::vector<int> offsets;
  int off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const int pc = p.shape()[1];
    for (int b = 0; b < outer; ++b) {
      const double* src =
          p.value().data() + static_cast<std::size_t>(b) * pc * inner;
      double* dst = out.data() + (static_cast<std::size_t>(b) * total_c + off) * inner;
      std::copy(src, src + pc * inner, dst);
    }
    off += pc;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return MakeResult(std::move(out), inputs,
                    [inputs, offsets, outer, inner, total_c](Node& self) {
                      for (std::size_t k = 0; k < inputs.size(); ++k) {
                        if (!Wants(inputs[k])) continue;
                        const int pc = inputs[k].shape()[1];
                        Tensor& g = inputs[k].node()->EnsureGrad();
                        for (int b = 0; b < outer; ++b) {
                          const double* src =
                              self.grad.data() +
                              (static_cast<std::size_t>(b) * total_c + offsets[k]) *
                                  inner;
                          double* dst =
                              g.data() + static_cast<std::size_t>(b) * pc * inner;
                          for (std::size_t i = 0; i < pc * inner; ++i)
                            dst[i] += src[i];
                        }
                      }
                    });
}

Var GlobalAvgPool(const Var& x) {
  RequireRank(x, 4, "GlobalAvgPool");
  const int n = x.shape()[0], c = x.shape()[1];
  const std::size_t plane =
      static_cast<std::size_t>(x.shape()[2]) * x.shape()[3];
  Tensor out({n, c});
  for (int p = 0; p < n * c; ++p) {
    const double* src = x.value().data() + p * plane;
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += src[i];
    out[p] = s / static_cast<double>(plane);
  }
  return MakeResult(std::move(out), {x}, [x, n, c, plane](Node& self) {
    Tensor& g = x.node()->EnsureGrad();
    for (int p = 0; p < n * c; ++p) {
      const double d = self.grad[p] / static_cast<double>(plane);
      double* dst = g.data() + p * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += d;
    }
  });
}

Var Linear(const Var& x, const Var& weight, const Var& bias) {
  RequireRank(x, 2, "Linear input");
  RequireRank(weight, 2, "Linear weight");
  const int n = x.shape()[0], in = x.shape()[1], out_dim = weight.shape()[0];
  if (weight.shape()[1] != in) {
    Fail(ErrorKind::kShape, "Linear: feature axis mismatch, input has " +
                                std::to_string(in) + " features, weight expects " +
                                std::to_string(weight.shape()[1]));
  }
  if (bias.defined() &&
      bias.value().numel() != static_cast<std::size_t>(out_dim)) {
    Fail(ErrorKind::kShape, "Linear: bias size mismatch");
  }
  Tensor out({n, out_dim});
  MapRM y(out.data(), n, out_dim);
  CMapRM xm(x.value().data(), n, in);
  CMapRM wm(weight.value().data(), out_dim, in);
  y.noalias() = xm * wm.transpose();
  if (bias.defined()) {
    for (int r = 0; r < n; ++r)
      for (int k = 0; k < out_dim; ++k) y(r, k) += bias.value()[k];
  }
  return MakeResult(std::move(out), {x, weight, bias},
                    [x, weight, bias, n, in, out_dim](Node& self) {
                      CMapRM dy(self.grad.data(), n, out_dim);
                      if (Wants(x)) {
                        MapRM dx(x.node()->EnsureGrad().data(), n, in);
                        dx.noalias() +=
                            dy * CMapRM(weight.value().data(), out_dim, in);
                      }
                      if (Wants(weight)) {
                        MapRM dw(weight.node()->EnsureGrad().data(), out_dim, in);
                        dw.noalias() +=
                            dy.transpose() * CMapRM(x.value().data(), n, in);
                      }
                      if (Wants(bias)) {
                        Tensor& db = bias.node()->EnsureGrad();
                        for (int r = 0; r < n; ++r)
                          for (int k = 0; k < out_dim; ++k) db[k] += dy(r, k);
                      }
                    });
}

Var LaplacianReplicate(const Var& x) {
  RequireRank(x, 4, "LaplacianReplicate");
  const int planes = x.shape()[0] * x.shape()[1];
  const int h = x.shape()[2], w = x.shape()[3];
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
  Tensor out(x.shape());
  for (int p = 0; p < planes; ++p) {
    const double* s = x.value().data() + static_cast<std::size_t>(p) * h * w;
    double* d = out.data() + static_cast<std::size_t>(p) * h * w;
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        d[y * w + xx] = s[clampi(y - 1, h) * w + xx] +
                        s[clampi(y + 1, h) * w + xx] +
                        s[y * w + clampi(xx - 1, w)] +
                        s[y * w + clampi(xx + 1, w)] - 4.0 * s[y * w + xx];
      }
    }
  }
  return MakeResult(std::move(out), {x}, [x, planes, h, w, clampi](Node& self) {
    Tensor& g = x.node()->EnsureGrad();
    for (int p = 0; p < planes; ++p) {
      const double* dy = self.grad.data() + static_cast<std::size_t>(p) * h * w;
      double* dx = g.data() + static_cast<std::size_t>(p) * h * w;
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          const double v = dy[y * w + xx];
          dx[clampi(y - 1, h) * w + xx] += v;
          dx[clampi(y + 1, h) * w + xx] += v;
          dx[y * w + clampi(xx - 1, w)] += v;
          dx[y * w + clampi(xx + 1, w)] += v;
          dx[y * w + xx] -= 4.0 * v;
        }
      }
    }
  });
}

Var ChannelUnitNormalize(const Var& x, double eps) {
  RequireRank(x, 4, "ChannelUnitNormalize");
  const int n = x.shape()[0], c = x.shape()[1];
  const std::size_t plane =
      static_cast<std::size_t>(x.shape()[2]) * x.shape()[3];
  Tensor out(x.shape());
  auto norms = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(n) * plane);
  for (int b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < plane; ++i) {
      double ss = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const double v = x.value()[(static_cast<std::size_t>(b) * c + ch) * plane + i];
        ss += v * v;
      }
      const double nr = std::sqrt(ss + eps);
      (*norms)[b * plane + i] = nr;
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t idx = (static_cast<std::size_t>(b) * c + ch) * plane + i;
        out[idx] = x.value()[idx] / nr;
      }
    }
  }
  auto result = MakeResult(std::move(out), {x}, nullptr);
  if (result.requires_grad()) {
    Node* self_ptr = result.node().get();
    result.node()->backward = [x, norms, n, c, plane, self_ptr](Node& self) {
      Tensor& g = x.node()->EnsureGrad();
      const Tensor& y = self_ptr->value;
      for (int b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < plane; ++i) {
          double dot = 0.0;
          for (int ch = 0; ch < c; ++ch) {
            const std::size_t idx = (static_cast<std::size_t>(b) * c + ch) * plane + i;
            dot += self.grad[idx] * y[idx];
          }
          const double nr = (*norms)[b * plane + i];
          for (int ch = 0; ch < c; ++ch) {
            const std::size_t idx = (static_cast<std::size_t>(b) * c + ch) * plane + i;
            g[idx] += (self.grad[idx] - y[idx] * dot) / nr;
          }
        }
      }
    };
  }
  return result;
}

Var Modulus(const Var& re, const Var& im) {
  RequireSameShape(re, im, "Modulus");
  Tensor out(re.shape());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = std::hypot(re.value()[i], im.value()[i]);
  auto result = MakeResult(std::move(out), {re, im}, nullptr);
  if (result.requires_grad()) {
    Node* self_ptr = result.node().get();
    result.node()->backward = [re, im, self_ptr](Node& self) {
      const Tensor& m = self_ptr->value;
      for (std::size_t i = 0; i < m.numel(); ++i) {
        if (m[i] == 0.0) continue;
        if (Wants(re))
          re.node()->EnsureGrad()[i] += self.grad[i] * re.value()[i] / m[i];
        if (Wants(im))
          im.node()->EnsureGrad()[i] += self.grad[i] * im.value()[i] / m[i];
      }
    };
  }
  return result;
}

Var Mmd2(const Var& x, const Var& y, std::span<const double> sigmas,
         std::span<const double> weights) {
  RequireRank(x, 2, "Mmd2 x");
  RequireRank(y, 2, "Mmd2 y");
  const int nx = x.shape()[0], ny = y.shape()[0], d = x.shape()[1];
  if (y.shape()[1] != d) Fail(ErrorKind::kShape, "Mmd2: feature dims differ");
  if (nx == 0 || ny == 0) Fail(ErrorKind::kInvalidArgument, "Mmd2: empty batch");
  if (sigmas.size() != weights.size() || sigmas.empty()) {
    Fail(ErrorKind::kInvalidArgument, "Mmd2: kernel bank mismatch");
  }
  std::vector<double> sg(sigmas.begin(), sigmas.end());
  std::vector<double> wt(weights.begin(), weights.end());

  auto row = [](const Var& v, int i) {
    return v.value().data() + static_cast<std::size_t>(i) * v.shape()[1];
  };
  auto kernel = [&](const double* a, const double* b) {
    double dist = 0.0;
    for (int k = 0; k < d; ++k) dist += (a[k] - b[k]) * (a[k] - b[k]);
    double s = 0.0;
    for (std::size_t q = 0; q < sg.size(); ++q)
      s += wt[q] * std::exp(-dist / (2.0 * sg[q]));
    return s;
  };
  double kxx = 0, kyy = 0, kxy = 0;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nx; ++j) kxx += kernel(row(x, i), row(x, j));
  for (int i = 0; i < ny; ++i)
    for (int j = 0; j < ny; ++j) kyy += kernel(row(y, i), row(y, j));
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) kxy += kernel(row(x, i), row(y, j));
  const double value = kxx / (double(nx) * nx) + kyy / (double(ny) * ny) -
                       2.0 * kxy / (double(nx) * ny);

  return MakeResult(Tensor({1}, value), {x, y},
                    [x, y, sg, wt, nx, ny, d](Node& self) {
                      const double up = self.grad[0];
                      auto rowp = [](const Var& v, int i) {
                        return v.value().data() +
                               static_cast<std::size_t>(i) * v.shape()[1];
                      };
                      // d/da k(a, b) = sum_q w_q e_q * (-(a - b) / sigma_q).
                      auto accumulate = [&](const Var& va, int i, const Var& vb,
                                            int j, double coeff) {
                        const double* a = rowp(va, i);
                        const double* b = rowp(vb, j);
                        double dist = 0.0;
                        for (int k = 0; k < d; ++k)
                          dist += (a[k] - b[k]) * (a[k] - b[k]);
                        double f = 0.0;
                        for (std::size_t q = 0; q < sg.size(); ++q)
                          f += wt[q] * std::exp(-dist / (2.0 * sg[q])) / sg[q];
                        const double scale = -coeff * up * f;
                        if (Wants(va)) {
                          double* ga = va.node()->EnsureGrad().data() +
                                       static_cast<std::size_t>(i) * d;
                          for (int k = 0; k < d; ++k) ga[k] += scale * (a[k] - b[k]);
                        }
                        if (Wants(vb)) {
                          double* gb = vb.node()->EnsureGrad().data() +
                                       static_cast<std::size_t>(j) * d;
                          for (int k = 0; k < d; ++k) gb[k] -= scale * (a[k] - b[k]);
                        }
                      };
                      for (int i = 0; i < nx; ++i)
                        for (int j = 0; j < nx; ++j)
                          accumulate(x, i, x, j, 1.0 / (double(nx) * nx));
                      for (int i = 0; i < ny; ++i)
                        for (int j = 0; j < ny; ++j)
                          accumulate(y, i, y, j, 1.0 / (double(ny) * ny));
                      for (int i = 0; i < nx; ++i)
                        for (int j = 0; j < ny; ++j)
                          accumulate(x, i, y, j, -2.0 / (double(nx) * ny));
                    });
}

Var StraightThrough(const Var& raw, Tensor value) {
  if (value.shape() != raw.shape()) {
    Fail(ErrorKind::kShape, "StraightThrough: shape mismatch");
  }
  return MakeResult(std::move(value), {raw}, [raw](Node& self) {
    Tensor& g = raw.node()->EnsureGrad();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
  });
}

}  // namespace kcross::ag
