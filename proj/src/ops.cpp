#include "satire/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace satire {

namespace {

// Fixed-order dot product with eight partial sums; the reduction order
// depends only on n, so results are reproducible.
template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  }
  T s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void require_rank(const char* op, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " tensor, got " + shape_str(s));
  }
}

void require_same(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Graph<T>& g = *a.graph;
  require_rank("matmul", a.shape(), 2);
  require_rank("matmul", b.shape(), 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  std::vector<T> out(m * n, T(0));
  {
    auto av = a.value();
    auto bv = b.value();
    for (std::size_t i = 0; i < m; ++i) {
      T* row = out.data() + i * n;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const T s = av[i * k + kk];
        if (s != T(0)) axpy(s, bv.data() + kk * n, row, n);
      }
    }
  }
  const std::size_t ia = a.id, ib = b.id;
  return g.record("matmul", {m, n}, std::move(out), {ia, ib},
                  [ia, ib, m, k, n](Graph<T>& g, std::size_t self) {
                    auto gy = g.grad(self);
                    if (g.requires_grad(ia)) {
                      auto bv = g.value(ib);
                      auto ga = g.grad_mut(ia);
                      for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t kk = 0; kk < k; ++kk) {
                          ga[i * k + kk] += dot(gy.data() + i * n, bv.data() + kk * n, n);
                        }
                      }
                    }
                    if (g.requires_grad(ib)) {
                      auto av = g.value(ia);
                      auto gb = g.grad_mut(ib);
                      for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t kk = 0; kk < k; ++kk) {
                          const T s = av[i * k + kk];
                          if (s != T(0)) axpy(s, gy.data() + i * n, gb.data() + kk * n, n);
                        }
                      }
                    }
                  });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  require_rank("transpose", a.shape(), 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<T> out(m * n);
  auto av = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  const std::size_t ia = a.id;
  return a.graph->record("transpose", {n, m}, std::move(out), {ia},
                         [ia, m, n](Graph<T>& g, std::size_t self) {
                           auto gy = g.grad(self);
                           auto ga = g.grad_mut(ia);
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += gy[j * m + i];
                         });
}

template <typename T>
Var<T> elementwise(Pointwise kind, Var<T> a, std::optional<std::type_identity_t<Var<T>>> b) {
  Graph<T>& g = *a.graph;
  const bool binary = kind == Pointwise::add || kind == Pointwise::mul;
  if (binary != b.has_value()) {
    throw UsageError("elementwise: add/mul take two operands, relu/tanh take one");
  }
  if (binary) require_same("elementwise", a.shape(), b->shape());
  auto av = a.value();
  const std::size_t n = av.size();
  std::vector<T> out(n);
  switch (kind) {
    case Pointwise::add: {
      auto bv = b->value();
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i];
      break;
    }
    case Pointwise::mul: {
      auto bv = b->value();
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i];
      break;
    }
    case Pointwise::relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] > T(0) ? av[i] : T(0);
      break;
    case Pointwise::tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(av[i]);
      break;
  }
  const std::size_t ia = a.id;
  const std::size_t ib = binary ? b->id : ia;
  std::vector<std::size_t> inputs{ia};
  if (binary) inputs.push_back(ib);
  static const char* names[] = {"add", "mul", "relu", "tanh"};
  return g.record(names[static_cast<int>(kind)], a.shape(), std::move(out), std::move(inputs),
                  [kind, ia, ib, n](Graph<T>& g, std::size_t self) {
                    auto gy = g.grad(self);
                    switch (kind) {
                      case Pointwise::add:
                        if (g.requires_grad(ia)) axpy(T(1), gy.data(), g.grad_mut(ia).data(), n);
                        if (g.requires_grad(ib)) axpy(T(1), gy.data(), g.grad_mut(ib).data(), n);
                        break;
                      case Pointwise::mul: {
                        auto av = g.value(ia);
                        auto bv = g.value(ib);
                        if (g.requires_grad(ia)) {
                          auto ga = g.grad_mut(ia);
                          for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * bv[i];
                        }
                        if (g.requires_grad(ib)) {
                          auto gb = g.grad_mut(ib);
                          for (std::size_t i = 0; i < n; ++i) gb[i] += gy[i] * av[i];
                        }
                        break;
                      }
                      case Pointwise::relu: {
                        auto av = g.value(ia);
                        auto ga = g.grad_mut(ia);
                        for (std::size_t i = 0; i < n; ++i)
                          if (av[i] > T(0)) ga[i] += gy[i];
                        break;
                      }
                      case Pointwise::tanh: {
                        auto yv = g.value(self);
                        auto ga = g.grad_mut(ia);
                        for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * (T(1) - yv[i] * yv[i]);
                        break;
                      }
                    }
                  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  require_rank("add_bias", x.shape(), 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.size() != n) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not fit rows of " +
                         shape_str(x.shape()));
  }
  auto xv = x.value();
  auto bv = bias.value();
  std::vector<T> out(xv.begin(), xv.end());
  for (std::size_t i = 0; i < m; ++i) axpy(T(1), bv.data(), out.data() + i * n, n);
  const std::size_t ix = x.id, ib = bias.id;
  return x.graph->record("add_bias", x.shape(), std::move(out), {ix, ib},
                         [ix, ib, m, n](Graph<T>& g, std::size_t self) {
                           auto gy = g.grad(self);
                           if (g.requires_grad(ix)) axpy(T(1), gy.data(), g.grad_mut(ix).data(), m * n);
                           if (g.requires_grad(ib)) {
                             auto gb = g.grad_mut(ib);
                             for (std::size_t i = 0; i < m; ++i) axpy(T(1), gy.data() + i * n, gb.data(), n);
                           }
                         });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  auto av = a.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  const std::size_t ia = a.id;
  const std::size_t n = av.size();
  return a.graph->record("scale", a.shape(), std::move(out), {ia},
                         [ia, n, factor](Graph<T>& g, std::size_t self) {
                           axpy(factor, g.grad(self).data(), g.grad_mut(ia).data(), n);
                         });
}

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernels, Var<T> bias) {
  require_rank("conv2d input", input.shape(), 3);
  require_rank("conv2d kernels", kernels.shape(), 4);
  const std::size_t H = input.dim(0), W = input.dim(1), Ci = input.dim(2);
  const std::size_t K = kernels.dim(0), Co = kernels.dim(3);
  if (kernels.dim(1) != K || kernels.dim(2) != Ci) {
    throw DimensionError("conv2d: kernels " + shape_str(kernels.shape()) +
                         " incompatible with input " + shape_str(input.shape()));
  }
  if (H < K || W < K) {
    throw DimensionError("conv2d: kernel " + shape_str(kernels.shape()) + " larger than input " +
                         shape_str(input.shape()));
  }
  if (bias.size() != Co) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(Co) + " output channels");
  }
  const std::size_t Ho = H - K + 1, Wo = W - K + 1;
  const std::size_t span = K * Ci;  // contiguous input run under one kernel row
  std::vector<T> out(Ho * Wo * Co);
  {
    auto in = input.value();
    auto w = kernels.value();
    auto b = bias.value();
    for (std::size_t y = 0; y < Ho; ++y) {
      for (std::size_t x = 0; x < Wo; ++x) {
        T* acc = out.data() + (y * Wo + x) * Co;
        std::copy(b.begin(), b.end(), acc);
        for (std::size_t ky = 0; ky < K; ++ky) {
          const T* row = in.data() + ((y + ky) * W + x) * Ci;
          const T* wk = w.data() + ky * span * Co;
          for (std::size_t j = 0; j < span; ++j) axpy(row[j], wk + j * Co, acc, Co);
        }
      }
    }
  }
  const std::size_t ii = input.id, ik = kernels.id, ib = bias.id;
  return input.graph->record(
      "conv2d", {Ho, Wo, Co}, std::move(out), {ii, ik, ib},
      [=](Graph<T>& g, std::size_t self) {
        auto gy = g.grad(self);
        if (g.requires_grad(ib)) {
          auto gb = g.grad_mut(ib);
          for (std::size_t p = 0; p < Ho * Wo; ++p) axpy(T(1), gy.data() + p * Co, gb.data(), Co);
        }
        if (g.requires_grad(ik)) {
          auto in = g.value(ii);
          auto gw = g.grad_mut(ik);
          for (std::size_t y = 0; y < Ho; ++y) {
            for (std::size_t x = 0; x < Wo; ++x) {
              const T* gp = gy.data() + (y * Wo + x) * Co;
              for (std::size_t ky = 0; ky < K; ++ky) {
                const T* row = in.data() + ((y + ky) * W + x) * Ci;
                T* gk = gw.data() + ky * span * Co;
                for (std::size_t j = 0; j < span; ++j) axpy(row[j], gp, gk + j * Co, Co);
              }
            }
          }
        }
        if (g.requires_grad(ii)) {
          auto w = g.value(ik);
          auto gi = g.grad_mut(ii);
          for (std::size_t y = 0; y < Ho; ++y) {
            for (std::size_t x = 0; x < Wo; ++x) {
              const T* gp = gy.data() + (y * Wo + x) * Co;
              for (std::size_t ky = 0; ky < K; ++ky) {
                T* grow = gi.data() + ((y + ky) * W + x) * Ci;
                const T* wk = w.data() + ky * span * Co;
                for (std::size_t j = 0; j < span; ++j) grow[j] += dot(wk + j * Co, gp, Co);
              }
            }
          }
        }
      });
}

template <typename T>
Var<T> maxpool2d(Var<T> input) {
  require_rank("maxpool2d", input.shape(), 3);
  const std::size_t H = input.dim(0), W = input.dim(1), C = input.dim(2);
  if (H < 2 || W < 2) {
    throw DimensionError("maxpool2d: input " + shape_str(input.shape()) + " smaller than 2x2 window");
  }
  const std::size_t Ho = H / 2, Wo = W / 2;
  std::vector<T> out(Ho * Wo * C);
  std::vector<std::uint32_t> argmax(out.size());
  auto in = input.value();
  for (std::size_t y = 0; y < Ho; ++y) {
    for (std::size_t x = 0; x < Wo; ++x) {
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t best = ((2 * y) * W + 2 * x) * C + c;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ((2 * y + dy) * W + 2 * x + dx) * C + c;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (y * Wo + x) * C + c;
        out[o] = in[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  const std::size_t ii = input.id;
  return input.graph->record("maxpool2d", {Ho, Wo, C}, std::move(out), {ii},
                             [ii, argmax = std::move(argmax)](Graph<T>& g, std::size_t self) {
                               auto gy = g.grad(self);
                               auto gi = g.grad_mut(ii);
                               for (std::size_t o = 0; o < argmax.size(); ++o) gi[argmax[o]] += gy[o];
                             });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> shift, T epsilon) {
  require_rank("layer_norm", x.shape(), 2);
  const std::size_t L = x.dim(0), d = x.dim(1);
  if (gain.size() != d || shift.size() != d) {
    throw DimensionError("layer_norm: gain/shift must have " + std::to_string(d) + " entries");
  }
  auto xv = x.value();
  auto gv = gain.value();
  auto sv = shift.value();
  std::vector<T> out(L * d);
  std::vector<T> xhat(L * d);
  std::vector<T> inv_sigma(L);
  for (std::size_t r = 0; r < L; ++r) {
    const T* row = xv.data() + r * d;
    T mean = 0;
    for (std::size_t i = 0; i < d; ++i) mean += row[i];
    mean /= T(d);
    T var = 0;
    for (std::size_t i = 0; i < d; ++i) var += (row[i] - mean) * (row[i] - mean);
    var /= T(d);
    const T inv = T(1) / std::sqrt(var + epsilon);
    inv_sigma[r] = inv;
    for (std::size_t i = 0; i < d; ++i) {
      const T h = (row[i] - mean) * inv;
      xhat[r * d + i] = h;
      out[r * d + i] = gv[i] * h + sv[i];
    }
  }
  const std::size_t ix = x.id, ig = gain.id, is = shift.id;
  return x.graph->record(
      "layer_norm", x.shape(), std::move(out), {ix, ig, is},
      [=, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Graph<T>& g, std::size_t self) {
        auto gy = g.grad(self);
        auto gv = g.value(ig);
        if (g.requires_grad(ig)) {
          auto gg = g.grad_mut(ig);
          for (std::size_t r = 0; r < L; ++r)
            for (std::size_t i = 0; i < d; ++i) gg[i] += gy[r * d + i] * xhat[r * d + i];
        }
        if (g.requires_grad(is)) {
          auto gs = g.grad_mut(is);
          for (std::size_t r = 0; r < L; ++r) axpy(T(1), gy.data() + r * d, gs.data(), d);
        }
        if (g.requires_grad(ix)) {
          auto gx = g.grad_mut(ix);
          std::vector<T> dh(d);
          for (std::size_t r = 0; r < L; ++r) {
            T mean_dh = 0, mean_dh_h = 0;
            for (std::size_t i = 0; i < d; ++i) {
              dh[i] = gy[r * d + i] * gv[i];
              mean_dh += dh[i];
              mean_dh_h += dh[i] * xhat[r * d + i];
            }
            mean_dh /= T(d);
            mean_dh_h /= T(d);
            for (std::size_t i = 0; i < d; ++i) {
              gx[r * d + i] += inv_sigma[r] * (dh[i] - mean_dh - xhat[r * d + i] * mean_dh_h);
            }
          }
        }
      });
}

template <typename T>
Var<T> softmax_rows(Var<T> x, std::span<const std::uint8_t> key_valid) {
  require_rank("softmax_rows", x.shape(), 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (!key_valid.empty() && key_valid.size() != n) {
    throw DimensionError("softmax_rows: mask has " + std::to_string(key_valid.size()) +
                         " entries for " + std::to_string(n) + " columns");
  }
  auto valid = [&](std::size_t j) { return key_valid.empty() || key_valid[j] != 0; };
  bool any = false;
  for (std::size_t j = 0; j < n; ++j) any = any || valid(j);
  if (!any) throw DataError("softmax_rows: every key position is masked");
  auto xv = x.value();
  std::vector<T> out(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = xv.data() + i * n;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (valid(j)) mx = std::max(mx, row[j]);
    T total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!valid(j)) continue;
      out[i * n + j] = std::exp(row[j] - mx);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  const std::size_t ix = x.id;
  return x.graph->record("softmax_rows", x.shape(), std::move(out), {ix},
                         [ix, m, n](Graph<T>& g, std::size_t self) {
                           auto gy = g.grad(self);
                           auto p = g.value(self);
                           auto gx = g.grad_mut(ix);
                           for (std::size_t i = 0; i < m; ++i) {
                             const T s = dot(gy.data() + i * n, p.data() + i * n, n);
                             for (std::size_t j = 0; j < n; ++j)
                               gx[i * n + j] += p[i * n + j] * (gy[i * n + j] - s);
                           }
                         });
}

template <typename T>
Var<T> slice_rows(Var<T> x, std::size_t begin, std::size_t end) {
  require_rank("slice_rows", x.shape(), 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (begin >= end || end > m) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " + shape_str(x.shape()));
  }
  auto xv = x.value();
  std::vector<T> out(xv.begin() + begin * n, xv.begin() + end * n);
  const std::size_t ix = x.id;
  return x.graph->record("slice_rows", {end - begin, n}, std::move(out), {ix},
                         [ix, begin, end, n](Graph<T>& g, std::size_t self) {
                           axpy(T(1), g.grad(self).data(), g.grad_mut(ix).data() + begin * n,
                                (end - begin) * n);
                         });
}

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t end) {
  require_rank("slice_cols", x.shape(), 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " + shape_str(x.shape()));
  }
  const std::size_t w = end - begin;
  auto xv = x.value();
  std::vector<T> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(xv.data() + i * n + begin, w, out.data() + i * w);
  const std::size_t ix = x.id;
  return x.graph->record("slice_cols", {m, w}, std::move(out), {ix},
                         [ix, begin, m, n, w](Graph<T>& g, std::size_t self) {
                           auto gy = g.grad(self);
                           auto gx = g.grad_mut(ix);
                           for (std::size_t i = 0; i < m; ++i)
                             axpy(T(1), gy.data() + i * w, gx.data() + i * n + begin, w);
                         });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  Graph<T>& g = *parts.front().graph;
  const std::size_t m = parts.front().dim(0);
  std::size_t n = 0;
  std::vector<std::size_t> widths, ids;
  for (const auto& p : parts) {
    require_rank("concat_cols", p.shape(), 2);
    if (p.dim(0) != m) {
      throw DimensionError("concat_cols: row mismatch " + shape_str(parts.front().shape()) +
                           " vs " + shape_str(p.shape()));
    }
    widths.push_back(p.dim(1));
    ids.push_back(p.id);
    n += p.dim(1);
  }
  std::vector<T> out(m * n);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].value();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(v.data() + i * widths[k], widths[k], out.data() + i * n + off);
    off += widths[k];
  }
  return g.record("concat_cols", {m, n}, std::move(out), ids,
                  [ids, widths, m, n](Graph<T>& g, std::size_t self) {
                    auto gy = g.grad(self);
                    std::size_t off = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (g.requires_grad(ids[k])) {
                        auto gx = g.grad_mut(ids[k]);
                        for (std::size_t i = 0; i < m; ++i)
                          axpy(T(1), gy.data() + i * n + off, gx.data() + i * widths[k], widths[k]);
                      }
                      off += widths[k];
                    }
                  });
}

template <typename T>
Var<T> mean_rows(Var<T> x) {
  require_rank("mean_rows", x.shape(), 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  auto xv = x.value();
  std::vector<T> out(n, T(0));
  for (std::size_t i = 0; i < m; ++i) axpy(T(1), xv.data() + i * n, out.data(), n);
  for (auto& v : out) v /= T(m);
  const std::size_t ix = x.id;
  return x.graph->record("mean_rows", {1, n}, std::move(out), {ix},
                         [ix, m, n](Graph<T>& g, std::size_t self) {
                           auto gy = g.grad(self);
                           auto gx = g.grad_mut(ix);
                           const T inv = T(1) / T(m);
                           for (std::size_t i = 0; i < m; ++i) axpy(inv, gy.data(), gx.data() + i * n, n);
                         });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto xv = x.value();
  const std::size_t ix = x.id, n = xv.size();
  return x.graph->record("reshape", std::move(shape), std::vector<T>(xv.begin(), xv.end()), {ix},
                         [ix, n](Graph<T>& g, std::size_t self) {
                           axpy(T(1), g.grad(self).data(), g.grad_mut(ix).data(), n);
                         });
}

template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids) {
  require_rank("embedding", table.shape(), 2);
  const std::size_t V = table.dim(0), d = table.dim(1);
  if (ids.empty()) throw DataError("embedding: empty id sequence");
  auto tv = table.value();
  std::vector<T> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= V) {
      throw DataError("embedding: token id " + std::to_string(ids[i]) + " outside vocabulary of " +
                      std::to_string(V));
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  const std::size_t it = table.id;
  std::vector<int> idv(ids.begin(), ids.end());
  return table.graph->record("embedding", {ids.size(), d}, std::move(out), {it},
                             [it, d, idv = std::move(idv)](Graph<T>& g, std::size_t self) {
                               auto gy = g.grad(self);
                               auto gt = g.grad_mut(it);
                               for (std::size_t i = 0; i < idv.size(); ++i)
                                 axpy(T(1), gy.data() + i * d, gt.data() + static_cast<std::size_t>(idv[i]) * d, d);
                             });
}

template <typename T>
Var<T> sum(Var<T> x) {
  auto xv = x.value();
  T s = 0;
  for (auto v : xv) s += v;
  const std::size_t ix = x.id, n = xv.size();
  return x.graph->record("sum", {1}, {s}, {ix}, [ix, n](Graph<T>& g, std::size_t self) {
    const T gy = g.grad(self)[0];
    auto gx = g.grad_mut(ix);
    for (std::size_t i = 0; i < n; ++i) gx[i] += gy;
  });
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> labels) {
  require_rank("softmax_cross_entropy", logits.shape(), 2);
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
  }
  auto z = logits.value();
  std::vector<T> probs(n * c);
  T loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw DataError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                      " outside [0, " + std::to_string(c) + ")");
    }
    const T* row = z.data() + i * c;
    const T mx = *std::max_element(row, row + c);
    T total = 0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      total += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= total;
    loss += std::log(total) + mx - row[labels[i]];
  }
  loss /= T(n);
  const std::size_t iz = logits.id;
  std::vector<int> lab(labels.begin(), labels.end());
  return logits.graph->record(
      "softmax_cross_entropy", {1}, {loss}, {iz},
      [iz, n, c, probs = std::move(probs), lab = std::move(lab)](Graph<T>& g, std::size_t self) {
        const T gy = g.grad(self)[0] / T(n);
        auto gz = g.grad_mut(iz);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            const T onehot = static_cast<std::size_t>(lab[i]) == j ? T(1) : T(0);
            gz[i * c + j] += gy * (probs[i * c + j] - onehot);
          }
        }
      });
}

template <typename T>
Var<T> dropout(Var<T> x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout: rate must be below 1");
  auto xv = x.value();
  const std::size_t n = xv.size();
  const T keep_scale = T(1.0 / (1.0 - rate));
  std::vector<T> mask(n);
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = rng.uniform() < rate ? T(0) : keep_scale;
    out[i] = xv[i] * mask[i];
  }
  const std::size_t ix = x.id;
  return x.graph->record("dropout", x.shape(), std::move(out), {ix},
                         [ix, mask = std::move(mask)](Graph<T>& g, std::size_t self) {
                           auto gy = g.grad(self);
                           auto gx = g.grad_mut(ix);
                           for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += gy[i] * mask[i];
                         });
}

template <typename T>
Var<T> scaled_dot_attention(Var<T> q, Var<T> k, Var<T> v, std::size_t heads,
                            std::span<const std::uint8_t> key_valid, std::vector<Var<T>>* weights) {
  require_rank("attention q", q.shape(), 2);
  require_rank("attention k", k.shape(), 2);
  require_rank("attention v", v.shape(), 2);
  const std::size_t d = q.dim(1), dv = v.dim(1);
  if (heads == 0 || d % heads != 0 || dv % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(d) + "/" + std::to_string(dv) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  if (k.dim(1) != d) {
    throw DimensionError("attention: query " + shape_str(q.shape()) + " and key " +
                         shape_str(k.shape()) + " widths differ");
  }
  if (k.dim(0) != v.dim(0)) {
    throw DimensionError("attention: key " + shape_str(k.shape()) + " and value " +
                         shape_str(v.shape()) + " lengths differ");
  }
  const std::size_t dh = d / heads, dvh = dv / heads;
  const T inv_sqrt = T(1) / std::sqrt(T(dh));
  std::vector<Var<T>> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = heads == 1 ? q : slice_cols(q, h * dh, (h + 1) * dh);
    auto kh = heads == 1 ? k : slice_cols(k, h * dh, (h + 1) * dh);
    auto vh = heads == 1 ? v : slice_cols(v, h * dvh, (h + 1) * dvh);
    auto scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    auto p = softmax_rows(scores, key_valid);
    if (weights) weights->push_back(p);
    outs.push_back(matmul(p, vh));
  }
  return heads == 1 ? outs.front() : concat_cols(outs);
}

#define SATIRE_INSTANTIATE_OPS(T)                                                              \
  template Var<T> matmul(Var<T>, Var<T>);                                                      \
  template Var<T> transpose(Var<T>);                                                           \
  template Var<T> elementwise(Pointwise, Var<T>, std::optional<std::type_identity_t<Var<T>>>);  \
  template Var<T> add_bias(Var<T>, Var<T>);                                                    \
  template Var<T> scale(Var<T>, T);                                                            \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>);                                              \
  template Var<T> maxpool2d(Var<T>);                                                           \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                       \
  template Var<T> softmax_rows(Var<T>, std::span<const std::uint8_t>);                         \
  template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                                \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                                \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                     \
  template Var<T> mean_rows(Var<T>);                                                           \
  template Var<T> reshape(Var<T>, Shape);                                                      \
  template Var<T> embedding(Var<T>, std::span<const int>);                                     \
  template Var<T> sum(Var<T>);                                                                 \
  template Var<T> softmax_cross_entropy(Var<T>, std::span<const int>);                         \
  template Var<T> dropout(Var<T>, double, Rng&);                                               \
  template Var<T> scaled_dot_attention(Var<T>, Var<T>, Var<T>, std::size_t,                    \
                                       std::span<const std::uint8_t>, std::vector<Var<T>>*);

SATIRE_INSTANTIATE_OPS(float)
SATIRE_INSTANTIATE_OPS(double)

}  // namespace satire
