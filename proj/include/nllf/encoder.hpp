// Copyright 2026 The NLLF Authors.
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

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "nllf/common.hpp"
#include "nllf/tokenizer.hpp"

namespace nllf::nn {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

struct EncoderConfig {
  int vocab = 0;
  int buckets = 1;
  int max_positions = 512;
  int dim = 32;
  int heads = 2;
  int layers = 2;
  int ff_dim = 64;
  int extra_features = 0;  // appended to the pooled vector before the head
  int outputs = 2;
};

/// All trainable tensors. Bias and LayerNorm vectors are stored as 1xN
/// matrices so every tensor has the same type.
template <typename Scalar>
struct EncoderWeights {
  struct Layer {
    Mat<Scalar> wq, bq, wk, bk, wv, bv, wo, bo;
    Mat<Scalar> ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
  };

  Mat<Scalar> word, hash, pos, seg, match, emb_g, emb_b;
  std::vector<Layer> layers;
  Mat<Scalar> pool_w, pool_b, head_w, head_b;

  /// Named tensors in a fixed order, used for optimizers and persistence.
  std::vector<std::pair<std::string, Mat<Scalar>*>> tensors() {
    std::vector<std::pair<std::string, Mat<Scalar>*>> t = {
        {"word", &word}, {"hash", &hash},   {"pos", &pos},    {"seg", &seg},
        {"match", &match}, {"emb_g", &emb_g}, {"emb_b", &emb_b}};
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& l = layers[i];
      const std::string p = "layer" + std::to_string(i) + ".";
      for (auto [n, m] : std::initializer_list<std::pair<const char*, Mat<Scalar>*>>{
               {"wq", &l.wq},       {"bq", &l.bq},       {"wk", &l.wk},
               {"bk", &l.bk},       {"wv", &l.wv},       {"bv", &l.bv},
               {"wo", &l.wo},       {"bo", &l.bo},       {"ln1_g", &l.ln1_g},
               {"ln1_b", &l.ln1_b}, {"w1", &l.w1},       {"b1", &l.b1},
               {"w2", &l.w2},       {"b2", &l.b2},       {"ln2_g", &l.ln2_g},
               {"ln2_b", &l.ln2_b}}) {
        t.emplace_back(p + n, m);
      }
    }
    t.emplace_back("pool_w", &pool_w);
    t.emplace_back("pool_b", &pool_b);
    t.emplace_back("head_w", &head_w);
    t.emplace_back("head_b", &head_b);
    return t;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto& [name, m] : const_cast<EncoderWeights*>(this)->tensors()) n += static_cast<std::size_t>(m->size());
    return n;
  }

  /// Same shapes, all zeros.
  EncoderWeights zeros_like() const {
    EncoderWeights z = *this;
    for (auto& [name, m] : z.tensors()) m->setZero();
    return z;
  }

  void set_zero() {
    for (auto& [name, m] : tensors()) m->setZero();
  }
};

/// Normal(0, 0.02) weights, unit LayerNorm gains, zero biases.
template <typename Scalar>
EncoderWeights<Scalar> init_weights(const EncoderConfig& c, Rng& rng) {
  if (c.dim % c.heads != 0) {
    throw ConfigError("encoder dim " + std::to_string(c.dim) +
                      " is not divisible by heads " + std::to_string(c.heads));
  }
  auto normal = [&](int r, int k) {
    Mat<Scalar> m(r, k);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = static_cast<Scalar>(0.02 * normal_sample(rng));
    }
    return m;
  };
  auto zeros = [](int r, int k) { return Mat<Scalar>::Zero(r, k).eval(); };
  auto ones = [](int k) { return Mat<Scalar>::Ones(1, k).eval(); };
  EncoderWeights<Scalar> w;
  w.word = normal(c.vocab, c.dim);
  w.hash = normal(c.buckets, c.dim);
  w.pos = normal(c.max_positions, c.dim);
  w.seg = normal(2, c.dim);
  w.match = normal(2, c.dim);
  w.emb_g = ones(c.dim);
  w.emb_b = zeros(1, c.dim);
  for (int i = 0; i < c.layers; ++i) {
    typename EncoderWeights<Scalar>::Layer l;
    l.wq = normal(c.dim, c.dim);
    l.bq = zeros(1, c.dim);
    l.wk = normal(c.dim, c.dim);
    l.bk = zeros(1, c.dim);
    l.wv = normal(c.dim, c.dim);
    l.bv = zeros(1, c.dim);
    l.wo = normal(c.dim, c.dim);
    l.bo = zeros(1, c.dim);
    l.ln1_g = ones(c.dim);
    l.ln1_b = zeros(1, c.dim);
    l.w1 = normal(c.dim, c.ff_dim);
    l.b1 = zeros(1, c.ff_dim);
    l.w2 = normal(c.ff_dim, c.dim);
    l.b2 = zeros(1, c.dim);
    l.ln2_g = ones(c.dim);
    l.ln2_b = zeros(1, c.dim);
    w.layers.push_back(std::move(l));
  }
  w.pool_w = normal(c.dim, c.dim);
  w.pool_b = zeros(1, c.dim);
  w.head_w = normal(c.dim + c.extra_features, c.outputs);
  w.head_b = zeros(1, c.outputs);
  return w;
}

namespace detail {

constexpr double kLayerNormEps = 1e-12;

template <typename Scalar>
struct LayerNormCache {
  Mat<Scalar> xhat;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std;
};

template <typename Scalar>
Mat<Scalar> layer_norm(const Mat<Scalar>& x, const Mat<Scalar>& g,
                       const Mat<Scalar>& b, LayerNormCache<Scalar>& cache) {
  const Eigen::Index n = x.cols();
  cache.xhat.resize(x.rows(), n);
  cache.inv_std.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mu = x.row(r).mean();
    const auto centered = (x.row(r).array() - mu).matrix().eval();
    const Scalar var = centered.squaredNorm() / static_cast<Scalar>(n);
    const Scalar inv = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kLayerNormEps));
    cache.inv_std(r) = inv;
    cache.xhat.row(r) = centered * inv;
  }
  Mat<Scalar> y = cache.xhat.array().rowwise() * g.row(0).array();
  y.rowwise() += b.row(0);
  return y;
}

template <typename Scalar>
Mat<Scalar> layer_norm_backward(const Mat<Scalar>& dy, const LayerNormCache<Scalar>& cache,
                                const Mat<Scalar>& g, Mat<Scalar>& dg, Mat<Scalar>& db) {
  dg += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  db += dy.colwise().sum();
  const Mat<Scalar> dxhat = dy.array().rowwise() * g.row(0).array();
  const Scalar n = static_cast<Scalar>(dy.cols());
  Mat<Scalar> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const Scalar mean_d = dxhat.row(r).sum() / n;
    const Scalar mean_dx = dxhat.row(r).dot(cache.xhat.row(r)) / n;
    dx.row(r) = cache.inv_std(r) *
                (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

template <typename Scalar>
Scalar gelu(Scalar z) {
  return Scalar(0.5) * z *
         (Scalar(1) + std::tanh(Scalar(kGeluC) * (z + Scalar(0.044715) * z * z * z)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar z) {
  const Scalar t = std::tanh(Scalar(kGeluC) * (z + Scalar(0.044715) * z * z * z));
  return Scalar(0.5) * (Scalar(1) + t) +
         Scalar(0.5) * z * (Scalar(1) - t * t) * Scalar(kGeluC) *
             (Scalar(1) + Scalar(3 * 0.044715) * z * z);
}

}  // namespace detail

/// Intermediate values kept by forward() for backward().
template <typename Scalar>
struct ForwardTrace {
  struct Layer {
    Mat<Scalar> x_in, q, k, v, ctx, x1, z, h;
    std::vector<Mat<Scalar>> attn;
    detail::LayerNormCache<Scalar> ln1, ln2;
  };
  detail::LayerNormCache<Scalar> emb_ln;
  std::vector<Layer> layers;
  Mat<Scalar> x_out;
  RowVec<Scalar> pooled, features, logits;
};

/// Post-LayerNorm transformer over one input, pooled at position 0.
/// Returns the output logits (1 x outputs).
template <typename Scalar>
RowVec<Scalar> forward(const EncoderWeights<Scalar>& w, const EncoderConfig& c,
                       const EncodedInput& in, const RowVec<Scalar>& extra,
                       ForwardTrace<Scalar>& t) {
  const Eigen::Index L = static_cast<Eigen::Index>(in.size());
  if (L > c.max_positions) {
    throw InputError("input of " + std::to_string(L) + " tokens exceeds " +
                     std::to_string(c.max_positions) + " positions");
  }
  if (extra.size() != c.extra_features) {
    throw InputError("expected " + std::to_string(c.extra_features) +
                     " extra features, got " + std::to_string(extra.size()));
  }
  Mat<Scalar> e(L, c.dim);
  for (Eigen::Index i = 0; i < L; ++i) {
    e.row(i) = w.word.row(in.words[i]) + w.pos.row(i) + w.seg.row(in.segments[i]) +
               w.match.row(in.matches[i]);
    const auto& sub = in.subwords[i];
    if (!sub.empty()) {
      RowVec<Scalar> acc = RowVec<Scalar>::Zero(c.dim);
      for (int b : sub) acc += w.hash.row(b);
      e.row(i) += acc / static_cast<Scalar>(sub.size());
    }
  }
  Mat<Scalar> x = detail::layer_norm(e, w.emb_g, w.emb_b, t.emb_ln);

  const int dh = c.dim / c.heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  t.layers.resize(w.layers.size());
  for (std::size_t li = 0; li < w.layers.size(); ++li) {
    const auto& p = w.layers[li];
    auto& lt = t.layers[li];
    lt.x_in = x;
    lt.q = (x * p.wq).rowwise() + p.bq.row(0);
    lt.k = (x * p.wk).rowwise() + p.bk.row(0);
    lt.v = (x * p.wv).rowwise() + p.bv.row(0);
    lt.ctx.resize(L, c.dim);
    lt.attn.resize(c.heads);
    for (int h = 0; h < c.heads; ++h) {
      Mat<Scalar> s = lt.q.middleCols(h * dh, dh) * lt.k.middleCols(h * dh, dh).transpose() * scale;
      for (Eigen::Index r = 0; r < L; ++r) {
        const Scalar m = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - m).exp().matrix();
        s.row(r) /= s.row(r).sum();
      }
      lt.ctx.middleCols(h * dh, dh) = s * lt.v.middleCols(h * dh, dh);
      lt.attn[h] = std::move(s);
    }
    Mat<Scalar> o = (lt.ctx * p.wo).rowwise() + p.bo.row(0);
    lt.x1 = detail::layer_norm<Scalar>(x + o, p.ln1_g, p.ln1_b, lt.ln1);
    lt.z = (lt.x1 * p.w1).rowwise() + p.b1.row(0);
    lt.h = lt.z.unaryExpr([](Scalar v) { return detail::gelu(v); });
    Mat<Scalar> f = (lt.h * p.w2).rowwise() + p.b2.row(0);
    x = detail::layer_norm<Scalar>(lt.x1 + f, p.ln2_g, p.ln2_b, lt.ln2);
  }
  t.x_out = x;
  t.pooled = ((x.row(0) * w.pool_w) + w.pool_b.row(0)).array().tanh().matrix();
  t.features.resize(c.dim + c.extra_features);
  t.features << t.pooled, extra;
  t.logits = t.features * w.head_w + w.head_b.row(0);
  return t.logits;
}

/// Accumulates parameter gradients into `g` given dLoss/dlogits.
template <typename Scalar>
void backward(const EncoderWeights<Scalar>& w, const EncoderConfig& c,
              const EncodedInput& in, const ForwardTrace<Scalar>& t,
              const RowVec<Scalar>& dlogits, EncoderWeights<Scalar>& g) {
  const Eigen::Index L = static_cast<Eigen::Index>(in.size());
  g.head_w += t.features.transpose() * dlogits;
  g.head_b += dlogits;
  const RowVec<Scalar> dfeat = dlogits * w.head_w.transpose();
  const RowVec<Scalar> dz =
      (dfeat.head(c.dim).array() * (Scalar(1) - t.pooled.array().square())).matrix();
  g.pool_w += t.x_out.row(0).transpose() * dz;
  g.pool_b += dz;
  Mat<Scalar> dx = Mat<Scalar>::Zero(L, c.dim);
  dx.row(0) = dz * w.pool_w.transpose();

  const int dh = c.dim / c.heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  for (std::size_t li = w.layers.size(); li-- > 0;) {
    const auto& p = w.layers[li];
    const auto& lt = t.layers[li];
    auto& gp = g.layers[li];
    // Feed-forward block.
    const Mat<Scalar> ds2 = detail::layer_norm_backward(dx, lt.ln2, p.ln2_g, gp.ln2_g, gp.ln2_b);
    gp.w2 += lt.h.transpose() * ds2;
    gp.b2 += ds2.colwise().sum();
    const Mat<Scalar> dh_ = ds2 * p.w2.transpose();
    const Mat<Scalar> dzz =
        dh_.array() * lt.z.unaryExpr([](Scalar v) { return detail::gelu_grad(v); }).array();
    gp.w1 += lt.x1.transpose() * dzz;
    gp.b1 += dzz.colwise().sum();
    const Mat<Scalar> dx1 = ds2 + dzz * p.w1.transpose();
    // Attention block.
    const Mat<Scalar> ds1 = detail::layer_norm_backward(dx1, lt.ln1, p.ln1_g, gp.ln1_g, gp.ln1_b);
    gp.wo += lt.ctx.transpose() * ds1;
    gp.bo += ds1.colwise().sum();
    const Mat<Scalar> dctx = ds1 * p.wo.transpose();
    Mat<Scalar> dq(L, c.dim), dk(L, c.dim), dv(L, c.dim);
    for (int h = 0; h < c.heads; ++h) {
      const auto& a = lt.attn[h];
      const Mat<Scalar> dc = dctx.middleCols(h * dh, dh);
      const Mat<Scalar> da = dc * lt.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = a.transpose() * dc;
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rowdot =
          (da.array() * a.array()).rowwise().sum();
      const Mat<Scalar> ds = (a.array() * (da.colwise() - rowdot).array()).matrix() * scale;
      dq.middleCols(h * dh, dh) = ds * lt.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = ds.transpose() * lt.q.middleCols(h * dh, dh);
    }
    gp.wq += lt.x_in.transpose() * dq;
    gp.bq += dq.colwise().sum();
    gp.wk += lt.x_in.transpose() * dk;
    gp.bk += dk.colwise().sum();
    gp.wv += lt.x_in.transpose() * dv;
    gp.bv += dv.colwise().sum();
    dx = ds1 + dq * p.wq.transpose() + dk * p.wk.transpose() + dv * p.wv.transpose();
  }

  const Mat<Scalar> de = detail::layer_norm_backward(dx, t.emb_ln, w.emb_g, g.emb_g, g.emb_b);
  for (Eigen::Index i = 0; i < L; ++i) {
    g.word.row(in.words[i]) += de.row(i);
    g.pos.row(i) += de.row(i);
    g.seg.row(in.segments[i]) += de.row(i);
    g.match.row(in.matches[i]) += de.row(i);
    const auto& sub = in.subwords[i];
    if (!sub.empty()) {
      const RowVec<Scalar> share = de.row(i) / static_cast<Scalar>(sub.size());
      for (int b : sub) g.hash.row(b) += share;
    }
  }
}

/// Numerically stable softmax of a logit row.
template <typename Scalar>
RowVec<Scalar> softmax(const RowVec<Scalar>& logits) {
  const Scalar m = logits.maxCoeff();
  RowVec<Scalar> p = (logits.array() - m).exp().matrix();
  return p / p.sum();
}

}  // namespace nllf::nn
