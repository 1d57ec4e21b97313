#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

#include "colabmem/tinylm.hpp"

namespace colabmem::detail {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MapMat = Eigen::Map<Mat<S>>;
template <typename S>
using CMapMat = Eigen::Map<const Mat<S>>;
template <typename S>
using MapVec = Eigen::Map<Vec<S>>;
template <typename S>
using CMapVec = Eigen::Map<const Vec<S>>;

constexpr double kLnEps = 1e-5;

// Byte offsets of every tensor inside the flat weight array; the canonical
// ordering is documented on ModelParams.
struct Layout {
  int V, T, C, H, L, F, hs;
  std::size_t wte, wpe;
  struct PerLayer {
    std::size_t ln1_g, ln1_b, w_qkv, b_qkv, w_ao, b_ao;
    std::size_t ln2_g, ln2_b, w_fc, b_fc, w_proj, b_proj;
  };
  std::vector<PerLayer> layers;
  std::size_t lnf_g, lnf_b, w_head;
  std::size_t total;

  explicit Layout(const ArchConfig& a)
      : V(a.vocab_size),
        T(a.context_len),
        C(a.d_model),
        H(a.n_heads),
        L(a.n_layers),
        F(a.ffn_mult * a.d_model),
        hs(a.d_model / a.n_heads) {
    std::size_t at = 0;
    auto take = [&at](std::size_t n) {
      std::size_t o = at;
      at += n;
      return o;
    };
    wte = take(static_cast<std::size_t>(V) * C);
    wpe = take(static_cast<std::size_t>(T) * C);
    layers.resize(L);
    for (auto& l : layers) {
      l.ln1_g = take(C);
      l.ln1_b = take(C);
      l.w_qkv = take(static_cast<std::size_t>(C) * 3 * C);
      l.b_qkv = take(3 * C);
      l.w_ao = take(static_cast<std::size_t>(C) * C);
      l.b_ao = take(C);
      l.ln2_g = take(C);
      l.ln2_b = take(C);
      l.w_fc = take(static_cast<std::size_t>(C) * F);
      l.b_fc = take(F);
      l.w_proj = take(static_cast<std::size_t>(F) * C);
      l.b_proj = take(C);
    }
    lnf_g = take(C);
    lnf_b = take(C);
    w_head = take(static_cast<std::size_t>(C) * V);
    total = at;
  }
};

template <typename S>
inline S gelu_fwd(S x) {
  const S k = static_cast<S>(0.7978845608028654);  // sqrt(2/pi)
  const S c = static_cast<S>(0.044715);
  S u = k * (x + c * x * x * x);
  return static_cast<S>(0.5) * x * (static_cast<S>(1) + std::tanh(u));
}

template <typename S>
inline S gelu_bwd(S x) {
  const S k = static_cast<S>(0.7978845608028654);
  const S c = static_cast<S>(0.044715);
  S u = k * (x + c * x * x * x);
  S t = std::tanh(u);
  S sech2 = static_cast<S>(1) - t * t;
  return static_cast<S>(0.5) * (static_cast<S>(1) + t) +
         static_cast<S>(0.5) * x * sech2 * k *
             (static_cast<S>(1) + static_cast<S>(3) * c * x * x);
}

template <typename S>
struct Activations {
  int B = 0, Lq = 0;
  std::vector<Mat<S>> x_in;     // layer inputs; x_in[L] feeds the final norm
  std::vector<Mat<S>> ln1_out, qkv, probs, att, x_mid;
  std::vector<Vec<S>> ln1_mean, ln1_rstd, ln2_mean, ln2_rstd;
  std::vector<Mat<S>> ln2_out, fc_pre, gelu_out;
  Mat<S> lnf_out;
  Vec<S> lnf_mean, lnf_rstd;
  Mat<S> logits;
};

template <typename S>
void layernorm_fwd(const Mat<S>& x, CMapVec<S> g, CMapVec<S> b, Mat<S>& out,
                   Vec<S>& mean, Vec<S>& rstd) {
  const int n = static_cast<int>(x.rows());
  const int c = static_cast<int>(x.cols());
  out.resize(n, c);
  mean.resize(n);
  rstd.resize(n);
  for (int r = 0; r < n; ++r) {
    S m = x.row(r).mean();
    S var = (x.row(r).array() - m).square().mean();
    S rs = static_cast<S>(1) / std::sqrt(var + static_cast<S>(kLnEps));
    mean[r] = m;
    rstd[r] = rs;
    out.row(r) =
        (((x.row(r).array() - m) * rs) * g.transpose().array()).matrix() +
        b.transpose();
  }
}

template <typename S>
void layernorm_bwd(const Mat<S>& x, const Vec<S>& mean, const Vec<S>& rstd,
                   CMapVec<S> g, const Mat<S>& dout, Mat<S>& dx, MapVec<S> dg,
                   MapVec<S> db) {
  const int n = static_cast<int>(x.rows());
  const int c = static_cast<int>(x.cols());
  dx.resize(n, c);
  Eigen::Array<S, 1, Eigen::Dynamic> xhat(c), dxhat(c);
  for (int r = 0; r < n; ++r) {
    xhat = (x.row(r).array() - mean[r]) * rstd[r];
    dg.array() += (dout.row(r).array() * xhat).transpose();
    db.array() += dout.row(r).array().transpose();
    dxhat = dout.row(r).array() * g.transpose().array();
    S m1 = dxhat.mean();
    S m2 = (dxhat * xhat).mean();
    dx.row(r) = ((dxhat - m1 - xhat * m2) * rstd[r]).matrix();
  }
}

// Full-batch forward. Rows of `inputs` are concatenated as [B*Lq, ...].
template <typename S>
void model_forward(const Layout& lay, const S* w, const TokenBatch& batch,
                   Activations<S>& acts) {
  const int B = batch.rows;
  const int Lq = batch.cols - 1;
  const int N = B * Lq;
  const int C = lay.C, H = lay.H, hs = lay.hs, F = lay.F;
  acts.B = B;
  acts.Lq = Lq;
  acts.x_in.resize(lay.L + 1);
  acts.ln1_out.resize(lay.L);
  acts.ln1_mean.resize(lay.L);
  acts.ln1_rstd.resize(lay.L);
  acts.qkv.resize(lay.L);
  acts.probs.resize(lay.L);
  acts.att.resize(lay.L);
  acts.x_mid.resize(lay.L);
  acts.ln2_out.resize(lay.L);
  acts.ln2_mean.resize(lay.L);
  acts.ln2_rstd.resize(lay.L);
  acts.fc_pre.resize(lay.L);
  acts.gelu_out.resize(lay.L);

  CMapMat<S> wte(w + lay.wte, lay.V, C);
  CMapMat<S> wpe(w + lay.wpe, lay.T, C);
  Mat<S>& x0 = acts.x_in[0];
  x0.resize(N, C);
  for (int b = 0; b < B; ++b) {
    for (int t = 0; t < Lq; ++t) {
      x0.row(b * Lq + t) = wte.row(batch.at(b, t)) + wpe.row(t);
    }
  }

  const S scale = static_cast<S>(1) / std::sqrt(static_cast<S>(hs));
  for (int l = 0; l < lay.L; ++l) {
    const auto& pl = lay.layers[l];
    Mat<S>& x = acts.x_in[l];
    layernorm_fwd<S>(x, CMapVec<S>(w + pl.ln1_g, C), CMapVec<S>(w + pl.ln1_b, C),
                     acts.ln1_out[l], acts.ln1_mean[l], acts.ln1_rstd[l]);
    CMapMat<S> w_qkv(w + pl.w_qkv, C, 3 * C);
    CMapVec<S> b_qkv(w + pl.b_qkv, 3 * C);
    Mat<S>& qkv = acts.qkv[l];
    qkv.noalias() = acts.ln1_out[l] * w_qkv;
    qkv.rowwise() += b_qkv.transpose();

    Mat<S>& probs = acts.probs[l];
    probs.setZero(B * H * Lq, Lq);
    Mat<S>& att = acts.att[l];
    att.resize(N, C);
    Mat<S> scores(Lq, Lq);
    for (int b = 0; b < B; ++b) {
      for (int h = 0; h < H; ++h) {
        auto Q = qkv.block(b * Lq, h * hs, Lq, hs);
        auto K = qkv.block(b * Lq, C + h * hs, Lq, hs);
        auto Vv = qkv.block(b * Lq, 2 * C + h * hs, Lq, hs);
        scores.noalias() = Q * K.transpose();
        scores *= scale;
        auto P = probs.block((b * H + h) * Lq, 0, Lq, Lq);
        for (int i = 0; i < Lq; ++i) {
          auto row = scores.row(i).head(i + 1).array();
          S m = row.maxCoeff();
          P.row(i).head(i + 1) = (row - m).exp().matrix();
          P.row(i).head(i + 1) /= P.row(i).head(i + 1).sum();
        }
        att.block(b * Lq, h * hs, Lq, hs).noalias() = P * Vv;
      }
    }

    CMapMat<S> w_ao(w + pl.w_ao, C, C);
    CMapVec<S> b_ao(w + pl.b_ao, C);
    Mat<S>& x_mid = acts.x_mid[l];
    x_mid.noalias() = att * w_ao;
    x_mid.rowwise() += b_ao.transpose();
    x_mid += x;

    layernorm_fwd<S>(x_mid, CMapVec<S>(w + pl.ln2_g, C),
                     CMapVec<S>(w + pl.ln2_b, C), acts.ln2_out[l],
                     acts.ln2_mean[l], acts.ln2_rstd[l]);
    CMapMat<S> w_fc(w + pl.w_fc, C, F);
    CMapVec<S> b_fc(w + pl.b_fc, F);
    Mat<S>& fc_pre = acts.fc_pre[l];
    fc_pre.noalias() = acts.ln2_out[l] * w_fc;
    fc_pre.rowwise() += b_fc.transpose();
    Mat<S>& gelu = acts.gelu_out[l];
    gelu = fc_pre.unaryExpr([](S v) { return gelu_fwd<S>(v); });
    CMapMat<S> w_proj(w + pl.w_proj, F, C);
    CMapVec<S> b_proj(w + pl.b_proj, C);
    Mat<S>& x_out = acts.x_in[l + 1];
    x_out.noalias() = gelu * w_proj;
    x_out.rowwise() += b_proj.transpose();
    x_out += x_mid;
  }

  layernorm_fwd<S>(acts.x_in[lay.L], CMapVec<S>(w + lay.lnf_g, C),
                   CMapVec<S>(w + lay.lnf_b, C), acts.lnf_out, acts.lnf_mean,
                   acts.lnf_rstd);
  CMapMat<S> w_head(w + lay.w_head, C, lay.V);
  acts.logits.noalias() = acts.lnf_out * w_head;
}

// Mean NLL over all predicted positions (64-bit accumulation) and, when
// dlogits is non-null, the softmax cross-entropy gradient scaled by 1/N.
template <typename S>
double xent_loss(const Mat<S>& logits, const TokenBatch& batch,
                 Mat<S>* dlogits) {
  const int B = batch.rows;
  const int Lq = batch.cols - 1;
  const int V = static_cast<int>(logits.cols());
  const double inv_n = 1.0 / (static_cast<double>(B) * Lq);
  if (dlogits) dlogits->resize(logits.rows(), V);
  double total = 0.0;
  std::vector<double> e(V);
  for (int b = 0; b < B; ++b) {
    for (int t = 0; t < Lq; ++t) {
      const int r = b * Lq + t;
      const Token target = batch.at(b, t + 1);
      double m = static_cast<double>(logits(r, 0));
      for (int v = 1; v < V; ++v) {
        m = std::max(m, static_cast<double>(logits(r, v)));
      }
      double sum = 0.0;
      for (int v = 0; v < V; ++v) {
        e[v] = std::exp(static_cast<double>(logits(r, v)) - m);
        sum += e[v];
      }
      total += std::log(sum) - (static_cast<double>(logits(r, target)) - m);
      if (dlogits) {
        const double inv_sum = 1.0 / sum;
        for (int v = 0; v < V; ++v) {
          double p = e[v] * inv_sum;
          (*dlogits)(r, v) = static_cast<S>((p - (v == target ? 1.0 : 0.0)) * inv_n);
        }
      }
    }
  }
  return total * inv_n;
}

template <typename S>
void model_backward(const Layout& lay, const S* w, const TokenBatch& batch,
                    const Activations<S>& acts, const Mat<S>& dlogits,
                    S* grads) {
  const int B = acts.B, Lq = acts.Lq, N = B * Lq;
  const int C = lay.C, H = lay.H, hs = lay.hs, F = lay.F;

  MapMat<S>(grads, 1, static_cast<Eigen::Index>(lay.total)).setZero();

  CMapMat<S> w_head(w + lay.w_head, C, lay.V);
  MapMat<S> d_w_head(grads + lay.w_head, C, lay.V);
  d_w_head.noalias() = acts.lnf_out.transpose() * dlogits;
  Mat<S> d_stream(N, C);
  d_stream.noalias() = dlogits * w_head.transpose();

  Mat<S> dx;
  layernorm_bwd<S>(acts.x_in[lay.L], acts.lnf_mean, acts.lnf_rstd,
                   CMapVec<S>(w + lay.lnf_g, C), d_stream, dx,
                   MapVec<S>(grads + lay.lnf_g, C),
                   MapVec<S>(grads + lay.lnf_b, C));
  d_stream = dx;

  const S scale = static_cast<S>(1) / std::sqrt(static_cast<S>(hs));
  Mat<S> d_gelu(N, F), d_fc_pre(N, F), d_ln2(N, C), d_att(N, C), d_qkv(N, 3 * C);
  Mat<S> dP(Lq, Lq), dS(Lq, Lq);
  for (int l = lay.L - 1; l >= 0; --l) {
    const auto& pl = lay.layers[l];

    // MLP branch: d_stream covers x_out = x_mid + proj(gelu(fc(ln2(x_mid)))).
    CMapMat<S> w_proj(w + pl.w_proj, F, C);
    d_gelu.noalias() = d_stream * w_proj.transpose();
    MapMat<S> d_w_proj(grads + pl.w_proj, F, C);
    d_w_proj.noalias() = acts.gelu_out[l].transpose() * d_stream;
    MapVec<S>(grads + pl.b_proj, C) = d_stream.colwise().sum().transpose();

    d_fc_pre =
        (d_gelu.array() *
         acts.fc_pre[l].unaryExpr([](S v) { return gelu_bwd<S>(v); }).array())
            .matrix();
    CMapMat<S> w_fc(w + pl.w_fc, C, F);
    d_ln2.noalias() = d_fc_pre * w_fc.transpose();
    MapMat<S> d_w_fc(grads + pl.w_fc, C, F);
    d_w_fc.noalias() = acts.ln2_out[l].transpose() * d_fc_pre;
    MapVec<S>(grads + pl.b_fc, F) = d_fc_pre.colwise().sum().transpose();

    layernorm_bwd<S>(acts.x_mid[l], acts.ln2_mean[l], acts.ln2_rstd[l],
                     CMapVec<S>(w + pl.ln2_g, C), d_ln2, dx,
                     MapVec<S>(grads + pl.ln2_g, C),
                     MapVec<S>(grads + pl.ln2_b, C));
    Mat<S> d_mid = d_stream + dx;  // residual + norm branch

    // Attention branch: x_mid = x_in + ao(att).
    CMapMat<S> w_ao(w + pl.w_ao, C, C);
    d_att.noalias() = d_mid * w_ao.transpose();
    MapMat<S> d_w_ao(grads + pl.w_ao, C, C);
    d_w_ao.noalias() = acts.att[l].transpose() * d_mid;
    MapVec<S>(grads + pl.b_ao, C) = d_mid.colwise().sum().transpose();

    d_qkv.setZero();
    const Mat<S>& qkv = acts.qkv[l];
    for (int b = 0; b < B; ++b) {
      for (int h = 0; h < H; ++h) {
        auto Q = qkv.block(b * Lq, h * hs, Lq, hs);
        auto K = qkv.block(b * Lq, C + h * hs, Lq, hs);
        auto Vv = qkv.block(b * Lq, 2 * C + h * hs, Lq, hs);
        auto P = acts.probs[l].block((b * H + h) * Lq, 0, Lq, Lq);
        auto dA = d_att.block(b * Lq, h * hs, Lq, hs);
        dP.noalias() = dA * Vv.transpose();
        d_qkv.block(b * Lq, 2 * C + h * hs, Lq, hs).noalias() +=
            P.transpose() * dA;
        for (int i = 0; i < Lq; ++i) {
          auto p = P.row(i).head(i + 1).array();
          auto dp = dP.row(i).head(i + 1).array();
          S dot = (dp * p).sum();
          dS.row(i).head(i + 1) = (p * (dp - dot) * scale).matrix();
          dS.row(i).tail(Lq - i - 1).setZero();
        }
        d_qkv.block(b * Lq, h * hs, Lq, hs).noalias() += dS * K;
        d_qkv.block(b * Lq, C + h * hs, Lq, hs).noalias() +=
            dS.transpose() * Q;
      }
    }

    MapMat<S> d_w_qkv(grads + pl.w_qkv, C, 3 * C);
    d_w_qkv.noalias() = acts.ln1_out[l].transpose() * d_qkv;
    MapVec<S>(grads + pl.b_qkv, 3 * C) = d_qkv.colwise().sum().transpose();
    CMapMat<S> w_qkv(w + pl.w_qkv, C, 3 * C);
    Mat<S> d_ln1(N, C);
    d_ln1.noalias() = d_qkv * w_qkv.transpose();

    layernorm_bwd<S>(acts.x_in[l], acts.ln1_mean[l], acts.ln1_rstd[l],
                     CMapVec<S>(w + pl.ln1_g, C), d_ln1, dx,
                     MapVec<S>(grads + pl.ln1_g, C),
                     MapVec<S>(grads + pl.ln1_b, C));
    d_stream = d_mid + dx;
  }

  // Embedding gradients.
  MapMat<S> d_wte(grads + lay.wte, lay.V, C);
  MapMat<S> d_wpe(grads + lay.wpe, lay.T, C);
  for (int b = 0; b < B; ++b) {
    for (int t = 0; t < Lq; ++t) {
      d_wte.row(batch.at(b, t)) += d_stream.row(b * Lq + t);
      d_wpe.row(t) += d_stream.row(b * Lq + t);
    }
  }
}

// Incremental single-token forward with per-layer key/value caches.
template <typename S>
struct GenState {
  Layout lay;
  std::vector<Mat<S>> kcache, vcache;  // per layer [T, C]
  int len = 0;

  explicit GenState(const ArchConfig& arch) : lay(arch) {
    kcache.assign(lay.L, Mat<S>::Zero(lay.T, lay.C));
    vcache.assign(lay.L, Mat<S>::Zero(lay.T, lay.C));
  }

  // Appends `token` at position `len` and returns the logits row.
  Vec<S> step(const S* w, Token token) {
    const int C = lay.C, H = lay.H, hs = lay.hs, F = lay.F;
    const int t = len;
    CMapMat<S> wte(w + lay.wte, lay.V, C);
    CMapMat<S> wpe(w + lay.wpe, lay.T, C);
    Vec<S> x = (wte.row(token) + wpe.row(t)).transpose();
    Vec<S> normed(C), qkv(3 * C), att(C), mlp(F);
    const S scale = static_cast<S>(1) / std::sqrt(static_cast<S>(hs));
    for (int l = 0; l < lay.L; ++l) {
      const auto& pl = lay.layers[l];
      ln_vec(x, w + pl.ln1_g, w + pl.ln1_b, normed);
      CMapMat<S> w_qkv(w + pl.w_qkv, C, 3 * C);
      CMapVec<S> b_qkv(w + pl.b_qkv, 3 * C);
      qkv.noalias() = w_qkv.transpose() * normed;
      qkv += b_qkv;
      kcache[l].row(t) = qkv.segment(C, C).transpose();
      vcache[l].row(t) = qkv.segment(2 * C, C).transpose();
      for (int h = 0; h < H; ++h) {
        auto q = qkv.segment(h * hs, hs);
        auto K = kcache[l].block(0, h * hs, t + 1, hs);
        auto Vv = vcache[l].block(0, h * hs, t + 1, hs);
        Vec<S> s(t + 1);
        s.noalias() = K * q;
        s *= scale;
        S m = s.maxCoeff();
        s = (s.array() - m).exp();
        s /= s.sum();
        att.segment(h * hs, hs).noalias() = Vv.transpose() * s;
      }
      CMapMat<S> w_ao(w + pl.w_ao, C, C);
      CMapVec<S> b_ao(w + pl.b_ao, C);
      x.noalias() += w_ao.transpose() * att;
      x += b_ao;
      ln_vec(x, w + pl.ln2_g, w + pl.ln2_b, normed);
      CMapMat<S> w_fc(w + pl.w_fc, C, F);
      CMapVec<S> b_fc(w + pl.b_fc, F);
      mlp.noalias() = w_fc.transpose() * normed;
      mlp += b_fc;
      mlp = mlp.unaryExpr([](S v) { return gelu_fwd<S>(v); });
      CMapMat<S> w_proj(w + pl.w_proj, F, C);
      CMapVec<S> b_proj(w + pl.b_proj, C);
      x.noalias() += w_proj.transpose() * mlp;
      x += b_proj;
    }
    ln_vec(x, w + lay.lnf_g, w + lay.lnf_b, normed);
    CMapMat<S> w_head(w + lay.w_head, C, lay.V);
    Vec<S> logits(lay.V);
    logits.noalias() = w_head.transpose() * normed;
    ++len;
    return logits;
  }

 private:
  void ln_vec(const Vec<S>& x, const S* g, const S* b, Vec<S>& out) {
    const int C = lay.C;
    S m = x.mean();
    S var = (x.array() - m).square().mean();
    S rs = static_cast<S>(1) / std::sqrt(var + static_cast<S>(kLnEps));
    out = (((x.array() - m) * rs) * CMapVec<S>(g, C).array()).matrix() +
          CMapVec<S>(b, C);
  }
};

}  // namespace colabmem::detail
