/* Copyright 2026 The condadapt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "condadapt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace condadapt {

namespace {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (!(a == b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

template <typename S, typename Fwd, typename Deriv>
Var<S> unary(const Var<S>& a, Fwd fwd, Deriv deriv) {
  Tensor<S> out(a.shape());
  out.array() = a.value().array().unaryExpr(fwd);
  auto an = a.node();
  return record<S>(std::move(out), {a}, [an, deriv](const Tensor<S>& g) {
    if (!an->requires_grad) return;
    an->grad_buffer().array() += g.array() * an->value.array().unaryExpr(deriv);
  });
}

}  // namespace

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  require_same(a.shape(), b.shape(), "add");
  Tensor<S> out(a.shape(), a.value().array() + b.value().array());
  auto an = a.node(), bn = b.node();
  return record<S>(std::move(out), {a, b}, [an, bn](const Tensor<S>& g) {
    if (an->requires_grad) an->grad_buffer().array() += g.array();
    if (bn->requires_grad) bn->grad_buffer().array() += g.array();
  });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  require_same(a.shape(), b.shape(), "sub");
  Tensor<S> out(a.shape(), a.value().array() - b.value().array());
  auto an = a.node(), bn = b.node();
  return record<S>(std::move(out), {a, b}, [an, bn](const Tensor<S>& g) {
    if (an->requires_grad) an->grad_buffer().array() += g.array();
    if (bn->requires_grad) bn->grad_buffer().array() -= g.array();
  });
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  require_same(a.shape(), b.shape(), "mul");
  Tensor<S> out(a.shape(), a.value().array() * b.value().array());
  auto an = a.node(), bn = b.node();
  return record<S>(std::move(out), {a, b}, [an, bn](const Tensor<S>& g) {
    if (an->requires_grad) an->grad_buffer().array() += g.array() * bn->value.array();
    if (bn->requires_grad) bn->grad_buffer().array() += g.array() * an->value.array();
  });
}

template <typename S>
Var<S> scale(const Var<S>& a, S factor) {
  Tensor<S> out(a.shape(), a.value().array() * factor);
  auto an = a.node();
  return record<S>(std::move(out), {a}, [an, factor](const Tensor<S>& g) {
    an->grad_buffer().array() += g.array() * factor;
  });
}

template <typename S>
Var<S> add_scalar(const Var<S>& a, S offset) {
  Tensor<S> out(a.shape(), a.value().array() + offset);
  auto an = a.node();
  return record<S>(std::move(out), {a}, [an](const Tensor<S>& g) {
    an->grad_buffer().array() += g.array();
  });
}

template <typename S>
Var<S> relu(const Var<S>& a) {
  return unary(
      a, [](S x) { return x > S(0) ? x : S(0); }, [](S x) { return x > S(0) ? S(1) : S(0); });
}

template <typename S>
Var<S> leaky_relu(const Var<S>& a, S slope) {
  return unary(
      a, [slope](S x) { return x > S(0) ? x : slope * x; },
      [slope](S x) { return x > S(0) ? S(1) : slope; });
}

template <typename S>
Var<S> sigmoid(const Var<S>& a) {
  Tensor<S> out(a.shape());
  out.array() = a.value().array().unaryExpr([](S x) {
    return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
  });
  auto an = a.node();
  Tensor<S> saved = out;
  return record<S>(std::move(out), {a}, [an, saved](const Tensor<S>& g) {
    an->grad_buffer().array() += g.array() * saved.array() * (S(1) - saved.array());
  });
}

template <typename S>
Var<S> log_sigmoid(const Var<S>& a) {
  // log sigmoid(x) = min(x, 0) - log1p(exp(-|x|))
  return unary(
      a, [](S x) { return std::min(x, S(0)) - std::log1p(std::exp(-std::abs(x))); },
      [](S x) {
        // d/dx = 1 - sigmoid(x) = sigmoid(-x)
        return x >= S(0) ? std::exp(-x) / (S(1) + std::exp(-x)) : S(1) / (S(1) + std::exp(x));
      });
}

template <typename S>
Var<S> log_clamped(const Var<S>& a, S eps) {
  return unary(
      a, [eps](S x) { return std::log(std::max(x, eps)); },
      [eps](S x) { return x > eps ? S(1) / x : S(0); });
}

template <typename S>
Var<S> clamp(const Var<S>& a, S lo, S hi) {
  return unary(
      a, [lo, hi](S x) { return std::clamp(x, lo, hi); },
      [lo, hi](S x) { return (x >= lo && x <= hi) ? S(1) : S(0); });
}

template <typename S>
Var<S> concat_channels(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  Shape s = parts.front().shape();
  int channels = 0;
  for (const auto& p : parts) {
    const Shape& o = p.shape();
    if (o.n != s.n || o.h != s.h || o.w != s.w)
      throw std::invalid_argument("concat_channels: shape mismatch " + o.str() + " vs " + s.str());
    channels += o.c;
  }
  s.c = channels;
  Tensor<S> out(s);
  const auto plane = static_cast<Eigen::Index>(s.plane());
  for (int n = 0; n < s.n; ++n) {
    Eigen::Index dst = static_cast<Eigen::Index>(out.index(n, 0, 0, 0));
    for (const auto& p : parts) {
      const auto len = plane * p.shape().c;
      out.array().segment(dst, len) =
          p.value().array().segment(static_cast<Eigen::Index>(p.value().index(n, 0, 0, 0)), len);
      dst += len;
    }
  }
  std::vector<std::shared_ptr<Node<S>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return record<S>(std::move(out), parts, [nodes, s, plane](const Tensor<S>& g) {
    for (int n = 0; n < s.n; ++n) {
      Eigen::Index src = static_cast<Eigen::Index>(g.index(n, 0, 0, 0));
      for (const auto& node : nodes) {
        const auto len = plane * node->value.shape().c;
        if (node->requires_grad) {
          auto& buf = node->grad_buffer();
          buf.array().segment(static_cast<Eigen::Index>(buf.index(n, 0, 0, 0)), len) +=
              g.array().segment(src, len);
        }
        src += len;
      }
    }
  });
}

template <typename S>
Var<S> slice_channels(const Var<S>& a, int first, int count) {
  const Shape in = a.shape();
  if (first < 0 || count < 0 || first + count > in.c)
    throw std::out_of_range("slice_channels: channels [" + std::to_string(first) + "," +
                            std::to_string(first + count) + ") out of " + in.str());
  Shape s = in;
  s.c = count;
  Tensor<S> out(s);
  const auto len = static_cast<Eigen::Index>(s.plane()) * count;
  for (int n = 0; n < s.n; ++n)
    out.array().segment(static_cast<Eigen::Index>(out.index(n, 0, 0, 0)), len) =
        a.value().array().segment(static_cast<Eigen::Index>(a.value().index(n, first, 0, 0)), len);
  auto an = a.node();
  return record<S>(std::move(out), {a}, [an, s, first, len](const Tensor<S>& g) {
    auto& buf = an->grad_buffer();
    for (int n = 0; n < s.n; ++n)
      buf.array().segment(static_cast<Eigen::Index>(buf.index(n, first, 0, 0)), len) +=
          g.array().segment(static_cast<Eigen::Index>(g.index(n, 0, 0, 0)), len);
  });
}

template <typename S>
Var<S> mul_channel_broadcast(const Var<S>& weights, const Var<S>& features) {
  const Shape ws = weights.shape(), fs = features.shape();
  if (ws.c != 1 || ws.n != fs.n || ws.h != fs.h || ws.w != fs.w)
    throw std::invalid_argument("mul_channel_broadcast: weights " + ws.str() + " vs features " +
                                fs.str());
  Tensor<S> out(fs);
  for (int n = 0; n < fs.n; ++n)
    for (int c = 0; c < fs.c; ++c)
      out.plane(n, c) = features.value().plane(n, c) * weights.value().plane(n, 0);
  auto wn = weights.node(), fn = features.node();
  return record<S>(std::move(out), {weights, features}, [wn, fn, fs](const Tensor<S>& g) {
    for (int n = 0; n < fs.n; ++n) {
      for (int c = 0; c < fs.c; ++c) {
        if (fn->requires_grad) fn->grad_buffer().plane(n, c) += g.plane(n, c) * wn->value.plane(n, 0);
        if (wn->requires_grad) wn->grad_buffer().plane(n, 0) += g.plane(n, c) * fn->value.plane(n, c);
      }
    }
  });
}

template <typename S>
Var<S> softmax_channels(const Var<S>& a) {
  const Shape s = a.shape();
  const auto plane = static_cast<Eigen::Index>(s.plane());
  Tensor<S> out(s);
  for (int n = 0; n < s.n; ++n) {
    Eigen::Map<const RowMat<S>> in(a.value().data() + a.value().index(n, 0, 0, 0), s.c, plane);
    Eigen::Map<RowMat<S>> o(out.data() + out.index(n, 0, 0, 0), s.c, plane);
    auto mx = in.colwise().maxCoeff().eval();
    o = (in.rowwise() - mx).array().exp().matrix();
    auto total = o.colwise().sum().eval();
    o.array().rowwise() /= total.array();
  }
  auto an = a.node();
  Tensor<S> saved = out;
  return record<S>(std::move(out), {a}, [an, saved, s, plane](const Tensor<S>& g) {
    auto& buf = an->grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      Eigen::Map<const RowMat<S>> p(saved.data() + saved.index(n, 0, 0, 0), s.c, plane);
      Eigen::Map<const RowMat<S>> gg(g.data() + g.index(n, 0, 0, 0), s.c, plane);
      Eigen::Map<RowMat<S>> gi(buf.data() + buf.index(n, 0, 0, 0), s.c, plane);
      auto dot = p.cwiseProduct(gg).colwise().sum().eval();
      gi.array() += p.array() * (gg.rowwise() - dot).array();
    }
  });
}

template <typename S>
Var<S> log_softmax_channels(const Var<S>& a) {
  const Shape s = a.shape();
  const auto plane = static_cast<Eigen::Index>(s.plane());
  Tensor<S> out(s);
  for (int n = 0; n < s.n; ++n) {
    Eigen::Map<const RowMat<S>> in(a.value().data() + a.value().index(n, 0, 0, 0), s.c, plane);
    Eigen::Map<RowMat<S>> o(out.data() + out.index(n, 0, 0, 0), s.c, plane);
    auto mx = in.colwise().maxCoeff().eval();
    o = in.rowwise() - mx;
    auto lse = o.array().exp().colwise().sum().log().matrix().eval();
    o.rowwise() -= lse;
  }
  auto an = a.node();
  Tensor<S> saved = out;
  return record<S>(std::move(out), {a}, [an, saved, s, plane](const Tensor<S>& g) {
    auto& buf = an->grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      Eigen::Map<const RowMat<S>> lp(saved.data() + saved.index(n, 0, 0, 0), s.c, plane);
      Eigen::Map<const RowMat<S>> gg(g.data() + g.index(n, 0, 0, 0), s.c, plane);
      Eigen::Map<RowMat<S>> gi(buf.data() + buf.index(n, 0, 0, 0), s.c, plane);
      auto total = gg.colwise().sum().eval();
      gi.array() += gg.array() - lp.array().exp() * total.replicate(s.c, 1).array();
    }
  });
}

template <typename S>
Var<S> concat_batch(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_batch: no inputs");
  std::vector<const Tensor<S>*> values;
  for (const auto& p : parts) values.push_back(&p.value());
  Tensor<S> out = stack_batch(values);
  std::vector<std::shared_ptr<Node<S>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return record<S>(std::move(out), parts, [nodes](const Tensor<S>& g) {
    Eigen::Index offset = 0;
    for (const auto& node : nodes) {
      const auto len = static_cast<Eigen::Index>(node->value.size());
      if (node->requires_grad) node->grad_buffer().array() += g.array().segment(offset, len);
      offset += len;
    }
  });
}

template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& weight, const Var<S>& bias, int stride, int pad) {
  const Shape xs = x.shape(), ws = weight.shape();
  const int k = ws.h;
  if (ws.w != k || ws.c != xs.c)
    throw std::invalid_argument("conv2d: weight " + ws.str() + " incompatible with input " +
                                xs.str());
  if (bias.shape().size() != static_cast<std::size_t>(ws.n))
    throw std::invalid_argument("conv2d: bias size mismatch");
  const int ho = (xs.h + 2 * pad - k) / stride + 1;
  const int wo = (xs.w + 2 * pad - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv2d: input too small " + xs.str());
  const Eigen::Index rows = static_cast<Eigen::Index>(xs.c) * k * k;
  const Eigen::Index opix = static_cast<Eigen::Index>(ho) * wo;
  const Eigen::Index cols_n = opix * xs.n;

  RowMat<S> cols(rows, cols_n);
  const Tensor<S>& xv = x.value();
  for (int ci = 0; ci < xs.c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        S* row = cols.data() + ((static_cast<Eigen::Index>(ci) * k + ky) * k + kx) * cols_n;
        for (int n = 0; n < xs.n; ++n) {
          const S* src = xv.data() + xv.index(n, ci, 0, 0);
          S* dst = row + n * opix;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - pad;
            S* drow = dst + static_cast<Eigen::Index>(oy) * wo;
            if (iy < 0 || iy >= xs.h) {
              std::fill(drow, drow + wo, S(0));
              continue;
            }
            const S* srow = src + static_cast<Eigen::Index>(iy) * xs.w;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + kx - pad;
              drow[ox] = (ix >= 0 && ix < xs.w) ? srow[ix] : S(0);
            }
          }
        }
      }
    }
  }

  Eigen::Map<const RowMat<S>> wmat(weight.value().data(), ws.n, rows);
  Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> bvec(bias.value().data(), ws.n);
  RowMat<S> res(ws.n, cols_n);
  res.noalias() = wmat * cols;
  res.colwise() += bvec;

  const Shape os{xs.n, ws.n, ho, wo};
  Tensor<S> out(os);
  for (int n = 0; n < xs.n; ++n)
    for (int co = 0; co < ws.n; ++co)
      std::copy_n(res.data() + co * cols_n + n * opix, opix, out.data() + out.index(n, co, 0, 0));

  auto xn = x.node(), wn = weight.node(), bn = bias.node();
  std::shared_ptr<RowMat<S>> saved_cols;
  if (wn->requires_grad && grad_enabled()) saved_cols = std::make_shared<RowMat<S>>(std::move(cols));
  return record<S>(
      std::move(out), {x, weight, bias},
      [xn, wn, bn, saved_cols, xs, ws, os, k, stride, pad, rows, opix, cols_n](const Tensor<S>& g) {
        RowMat<S> gm(ws.n, cols_n);
        for (int n = 0; n < os.n; ++n)
          for (int co = 0; co < os.c; ++co)
            std::copy_n(g.data() + g.index(n, co, 0, 0), opix, gm.data() + co * cols_n + n * opix);
        if (wn->requires_grad) {
          Eigen::Map<RowMat<S>> dw(wn->grad_buffer().data(), ws.n, rows);
          dw.noalias() += gm * saved_cols->transpose();
        }
        if (bn->requires_grad) {
          Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> db(bn->grad_buffer().data(), ws.n);
          db += gm.rowwise().sum();
        }
        if (xn->requires_grad) {
          Eigen::Map<const RowMat<S>> wmat(wn->value.data(), ws.n, rows);
          RowMat<S> dcols(rows, cols_n);
          dcols.noalias() = wmat.transpose() * gm;
          auto& gx = xn->grad_buffer();
          const int ho = os.h, wo = os.w;
          for (int ci = 0; ci < xs.c; ++ci) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const S* row =
                    dcols.data() + ((static_cast<Eigen::Index>(ci) * k + ky) * k + kx) * cols_n;
                for (int n = 0; n < xs.n; ++n) {
                  S* dst = gx.data() + gx.index(n, ci, 0, 0);
                  const S* src = row + n * opix;
                  for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= xs.h) continue;
                    S* drow = dst + static_cast<Eigen::Index>(iy) * xs.w;
                    const S* srow = src + static_cast<Eigen::Index>(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                      const int ix = ox * stride + kx - pad;
                      if (ix >= 0 && ix < xs.w) drow[ix] += srow[ox];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

template <typename S>
Var<S> upsample_nearest(const Var<S>& a, int factor) {
  const Shape in = a.shape();
  const Shape s{in.n, in.c, in.h * factor, in.w * factor};
  Tensor<S> out(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) out(n, c, y, x) = a.value()(n, c, y / factor, x / factor);
  auto an = a.node();
  return record<S>(std::move(out), {a}, [an, s, factor](const Tensor<S>& g) {
    auto& buf = an->grad_buffer();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < s.h; ++y)
          for (int x = 0; x < s.w; ++x) buf(n, c, y / factor, x / factor) += g(n, c, y, x);
  });
}

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> bilinear_matrix(int in, int out) {
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> m =
      Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>::Zero(out, in);
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, in - 1);
    const double frac = src - i0;
    m(o, i0) += static_cast<S>(1.0 - frac);
    m(o, i1) += static_cast<S>(frac);
  }
  return m;
}

template <typename S>
Tensor<S> resize_bilinear(const Tensor<S>& a, int height, int width) {
  const Shape in = a.shape();
  if (in.h == height && in.w == width) return a;
  const auto ry = bilinear_matrix<S>(in.h, height);
  const auto rx = bilinear_matrix<S>(in.w, width);
  Tensor<S> out(Shape{in.n, in.c, height, width});
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c)
      out.plane(n, c).matrix() = ry * a.plane(n, c).matrix() * rx.transpose();
  return out;
}

template <typename S>
Var<S> resize_bilinear(const Var<S>& a, int height, int width) {
  const Shape in = a.shape();
  if (in.h == height && in.w == width) return a;
  Tensor<S> out = resize_bilinear(a.value(), height, width);
  auto an = a.node();
  return record<S>(std::move(out), {a}, [an, in, height, width](const Tensor<S>& g) {
    const auto ry = bilinear_matrix<S>(in.h, height);
    const auto rx = bilinear_matrix<S>(in.w, width);
    auto& buf = an->grad_buffer();
    for (int n = 0; n < in.n; ++n)
      for (int c = 0; c < in.c; ++c)
        buf.plane(n, c).matrix() += ry.transpose() * g.plane(n, c).matrix() * rx;
  });
}

template <typename S>
Var<S> global_avg_pool(const Var<S>& a) {
  const Shape in = a.shape();
  Tensor<S> out(Shape{in.n, in.c, 1, 1});
  const S denom = static_cast<S>(in.plane());
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c) out(n, c, 0, 0) = a.value().plane(n, c).sum() / denom;
  auto an = a.node();
  return record<S>(std::move(out), {a}, [an, in, denom](const Tensor<S>& g) {
    auto& buf = an->grad_buffer();
    for (int n = 0; n < in.n; ++n)
      for (int c = 0; c < in.c; ++c) buf.plane(n, c) += g(n, c, 0, 0) / denom;
  });
}

template <typename S>
Var<S> sum(const Var<S>& a) {
  Tensor<S> out = Tensor<S>::scalar(a.value().array().sum());
  auto an = a.node();
  return record<S>(std::move(out), {a}, [an](const Tensor<S>& g) {
    an->grad_buffer().array() += g.item();
  });
}

template <typename S>
Var<S> mean(const Var<S>& a) {
  const S count = static_cast<S>(a.value().size());
  if (count == S(0)) throw std::invalid_argument("mean of an empty tensor");
  return scale(sum(a), S(1) / count);
}

template <typename S>
Var<S> weighted_sum(const Var<S>& a, const Tensor<S>& weights) {
  require_same(a.shape(), weights.shape(), "weighted_sum");
  Tensor<S> out = Tensor<S>::scalar((a.value().array() * weights.array()).sum());
  auto an = a.node();
  return record<S>(std::move(out), {a}, [an, weights](const Tensor<S>& g) {
    an->grad_buffer().array() += g.item() * weights.array();
  });
}

template <typename S>
Var<S> pick_labels(const Var<S>& a, const LabelMap& labels) {
  const Shape s = a.shape();
  const Shape ls = labels.shape();
  if (ls.n != s.n || ls.c != 1 || ls.h != s.h || ls.w != s.w)
    throw std::invalid_argument("pick_labels: labels " + ls.str() + " vs scores " + s.str());
  Tensor<S> out(Shape{s.n, 1, s.h, s.w});
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        const int l = labels(n, 0, y, x);
        if (l < 0 || l > s.c) throw std::out_of_range("pick_labels: label " + std::to_string(l));
        out(n, 0, y, x) = l == 0 ? S(0) : a.value()(n, l - 1, y, x);
      }
  auto an = a.node();
  return record<S>(std::move(out), {a}, [an, labels, s](const Tensor<S>& g) {
    auto& buf = an->grad_buffer();
    for (int n = 0; n < s.n; ++n)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          const int l = labels(n, 0, y, x);
          if (l > 0) buf(n, l - 1, y, x) += g(n, 0, y, x);
        }
  });
}

template <typename S>
Var<S> select_batch(const Var<S>& a, const std::vector<int>& indices) {
  const Shape s = a.shape();
  if (indices.empty()) throw std::invalid_argument("select_batch: empty index list");
  const auto per = static_cast<Eigen::Index>(s.c) * static_cast<Eigen::Index>(s.plane());
  Tensor<S> out(Shape{static_cast<int>(indices.size()), s.c, s.h, s.w});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= s.n) throw std::out_of_range("select_batch: index out of range");
    out.array().segment(static_cast<Eigen::Index>(i) * per, per) =
        a.value().array().segment(indices[i] * per, per);
  }
  auto node = a.node();
  return record<S>(std::move(out), {a}, [node, indices, per](const Tensor<S>& g) {
    auto& buf = node->grad_buffer();
    for (std::size_t i = 0; i < indices.size(); ++i)
      buf.array().segment(indices[i] * per, per) += g.array().segment(static_cast<Eigen::Index>(i) * per, per);
  });
}

#define CONDADAPT_INSTANTIATE_OPS(S)                                                        \
  template Var<S> add(const Var<S>&, const Var<S>&);                                        \
  template Var<S> sub(const Var<S>&, const Var<S>&);                                        \
  template Var<S> mul(const Var<S>&, const Var<S>&);                                        \
  template Var<S> scale(const Var<S>&, S);                                                  \
  template Var<S> add_scalar(const Var<S>&, S);                                             \
  template Var<S> relu(const Var<S>&);                                                      \
  template Var<S> leaky_relu(const Var<S>&, S);                                             \
  template Var<S> sigmoid(const Var<S>&);                                                   \
  template Var<S> log_sigmoid(const Var<S>&);                                               \
  template Var<S> log_clamped(const Var<S>&, S);                                            \
  template Var<S> clamp(const Var<S>&, S, S);                                               \
  template Var<S> concat_channels(const std::vector<Var<S>>&);                              \
  template Var<S> slice_channels(const Var<S>&, int, int);                                  \
  template Var<S> mul_channel_broadcast(const Var<S>&, const Var<S>&);                      \
  template Var<S> softmax_channels(const Var<S>&);                                          \
  template Var<S> log_softmax_channels(const Var<S>&);                                      \
  template Var<S> concat_batch(const std::vector<Var<S>>&);                                 \
  template Var<S> select_batch(const Var<S>&, const std::vector<int>&);                     \
  template Var<S> conv2d(const Var<S>&, const Var<S>&, const Var<S>&, int, int);            \
  template Var<S> upsample_nearest(const Var<S>&, int);                                     \
  template Var<S> resize_bilinear(const Var<S>&, int, int);                                 \
  template Tensor<S> resize_bilinear(const Tensor<S>&, int, int);                           \
  template Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> bilinear_matrix<S>(int, int);   \
  template Var<S> global_avg_pool(const Var<S>&);                                           \
  template Var<S> sum(const Var<S>&);                                                       \
  template Var<S> mean(const Var<S>&);                                                      \
  template Var<S> weighted_sum(const Var<S>&, const Tensor<S>&);                            \
  template Var<S> pick_labels(const Var<S>&, const LabelMap&);

CONDADAPT_INSTANTIATE_OPS(float)
CONDADAPT_INSTANTIATE_OPS(double)

}  // namespace condadapt
