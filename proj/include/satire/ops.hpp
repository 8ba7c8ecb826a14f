#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include "satire/graph.hpp"
#include "satire/rng.hpp"

namespace satire {

enum class Pointwise { add, mul, relu, tanh };

// a[m x k] * b[k x n]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);

template <typename T>
Var<T> transpose(Var<T> a);

template <typename T>
Var<T> elementwise(Pointwise kind, Var<T> a,
                   std::optional<std::type_identity_t<Var<T>>> b = std::nullopt);

template <typename T>
Var<T> add(Var<T> a, Var<T> b) { return elementwise(Pointwise::add, a, b); }
template <typename T>
Var<T> mul(Var<T> a, Var<T> b) { return elementwise(Pointwise::mul, a, b); }
template <typename T>
Var<T> relu(Var<T> a) { return elementwise(Pointwise::relu, a); }

// x[m x n] + bias[n], broadcast over rows.
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias);

template <typename T>
Var<T> scale(Var<T> a, T factor);

// Valid cross-correlation, stride 1.
// input [H x W x Cin], kernels [K x K x Cin x Cout], bias [Cout]
//   -> [(H-K+1) x (W-K+1) x Cout]
template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernels, Var<T> bias);

// 2x2 window, stride 2. An odd trailing row/column is dropped. Backward
// routes to the first maximum in scan order.
template <typename T>
Var<T> maxpool2d(Var<T> input);

// Row-wise normalisation of x[L x d]; epsilon sits inside the square root.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> shift, T epsilon = T(1e-5));

// Row-wise softmax. `key_valid`, when non-empty, has one entry per column and
// columns with 0 receive probability exactly 0.
template <typename T>
Var<T> softmax_rows(Var<T> x, std::span<const std::uint8_t> key_valid = {});

template <typename T>
Var<T> slice_rows(Var<T> x, std::size_t begin, std::size_t end);

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t end);

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts);

// [L x d] -> [1 x d]
template <typename T>
Var<T> mean_rows(Var<T> x);

template <typename T>
Var<T> reshape(Var<T> x, Shape shape);

// Gathers rows of table[V x d]; ids outside [0, V) raise DataError.
template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids);

template <typename T>
Var<T> sum(Var<T> x);

// Mean over rows of -log softmax(logits)[label]. logits [n x c].
template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> labels);

// Inverted dropout; rate 0 returns x unchanged.
template <typename T>
Var<T> dropout(Var<T> x, double rate, Rng& rng);

// Multi-head scaled dot-product attention without projections:
// per head h, softmax(Q_h K_h^T / sqrt(d/heads)) V_h, heads concatenated.
// q [Lq x d], k [Lk x d], v [Lk x dv]. When `weights` is given, it receives
// one [Lq x Lk] node of attention probabilities per head.
template <typename T>
Var<T> scaled_dot_attention(Var<T> q, Var<T> k, Var<T> v, std::size_t heads,
                            std::span<const std::uint8_t> key_valid = {},
                            std::vector<Var<T>>* weights = nullptr);

}  // namespace satire
