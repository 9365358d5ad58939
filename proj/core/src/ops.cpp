#include "ssad/ops.hpp"

#include <Eigen/Core>
#include <cmath>

namespace ssad::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_rank3(const Tensor& t, const char* op) {
  if (t.rank() != 3) throw Error(std::string(op) + ": expected (C, H, W), got " + shape_string(t.shape()));
}

// cols: (C*k*k, Ho*Wo)
AlignedBuffer im2col(const double* x, int c, int h, int w, const ConvGeometry& g, int ho, int wo) {
  const int k = g.kernel;
  AlignedBuffer cols(static_cast<std::size_t>(c) * k * k * ho * wo, 0.0);
  double* dst = cols.data();
  for (int ch = 0; ch < c; ++ch) {
    const double* plane = x + static_cast<std::size_t>(ch) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= h) {
            dst += wo;
            continue;
          }
          const double* row = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            *dst++ = (ix >= 0 && ix < w) ? row[ix] : 0.0;
          }
        }
      }
    }
  }
  return cols;
}

void col2im(const double* cols, int c, int h, int w, const ConvGeometry& g, int ho, int wo, double* x) {
  const int k = g.kernel;
  const double* src = cols;
  for (int ch = 0; ch < c; ++ch) {
    double* plane = x + static_cast<std::size_t>(ch) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= h) {
            src += wo;
            continue;
          }
          double* row = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox, ++src) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < w) row[ix] += *src;
          }
        }
      }
    }
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

int conv_output_size(int input, const ConvGeometry& g) {
  const int span = input + 2 * g.padding - g.kernel;
  if (span < 0 || g.stride <= 0) throw Error("conv2d: kernel larger than padded input");
  return span / g.stride + 1;
}

int conv_transpose_output_size(int input, const ConvGeometry& g) {
  return (input - 1) * g.stride - 2 * g.padding + g.kernel;
}

Var conv2d(Tape& tape, Var x, Var weight, Var bias, ConvGeometry g) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  require_rank3(xv, "conv2d");
  if (wv.rank() != 4 || wv.dim(1) != xv.dim(0) || wv.dim(2) != g.kernel || wv.dim(3) != g.kernel) {
    throw Error("conv2d: weight " + shape_string(wv.shape()) + " incompatible with input " +
                shape_string(xv.shape()));
  }
  const int cin = xv.dim(0), h = xv.dim(1), w = xv.dim(2), cout = wv.dim(0);
  const int ho = conv_output_size(h, g), wo = conv_output_size(w, g);
  const int kk = cin * g.kernel * g.kernel;
  auto cols = im2col(xv.data(), cin, h, w, g, ho, wo);

  Tensor y({cout, ho, wo});
  ConstMapMat wm(wv.data(), cout, kk);
  ConstMapMat cm(cols.data(), kk, static_cast<Eigen::Index>(ho) * wo);
  MapMat ym(y.data(), cout, static_cast<Eigen::Index>(ho) * wo);
  ym.noalias() = wm * cm;
  const Tensor& bv = tape.value(bias);
  for (int o = 0; o < cout; ++o) ym.row(o).array() += bv[o];

  const bool keep_cols = tape.grad_enabled() && tape.requires_grad(weight);
  auto shared_cols = std::make_shared<AlignedBuffer>(keep_cols ? std::move(cols) : AlignedBuffer{});
  return tape.record(std::move(y), {x, weight, bias}, [=](Tape& t, Var out) {
    const Tensor& gy = t.grad(out);
    ConstMapMat gym(gy.data(), cout, static_cast<Eigen::Index>(ho) * wo);
    if (t.requires_grad(weight)) {
      MapMat gw(t.grad_buffer(weight).data(), cout, kk);
      ConstMapMat cm2(shared_cols->data(), kk, static_cast<Eigen::Index>(ho) * wo);
      gw.noalias() += gym * cm2.transpose();
    }
    if (t.requires_grad(bias)) {
      Tensor& gb = t.grad_buffer(bias);
      const std::size_t plane = static_cast<std::size_t>(ho) * wo;
      for (int o = 0; o < cout; ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += gy[o * plane + i];
        gb[o] += s;
      }
    }
    if (t.requires_grad(x)) {
      ConstMapMat wm2(t.value(weight).data(), cout, kk);
      RowMat gcols = wm2.transpose() * gym;
      col2im(gcols.data(), cin, h, w, g, ho, wo, t.grad_buffer(x).data());
    }
  });
}

Var conv_transpose2d(Tape& tape, Var x, Var weight, Var bias, ConvGeometry g) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  require_rank3(xv, "conv_transpose2d");
  if (wv.rank() != 4 || wv.dim(0) != xv.dim(0) || wv.dim(2) != g.kernel || wv.dim(3) != g.kernel) {
    throw Error("conv_transpose2d: weight " + shape_string(wv.shape()) + " incompatible with input " +
                shape_string(xv.shape()));
  }
  const int cin = xv.dim(0), hi = xv.dim(1), wi = xv.dim(2), cout = wv.dim(1);
  const int ho = conv_transpose_output_size(hi, g), wo = conv_transpose_output_size(wi, g);
  if (ho <= 0 || wo <= 0) throw Error("conv_transpose2d: empty output");
  const int kk = cout * g.kernel * g.kernel;
  const Eigen::Index npos = static_cast<Eigen::Index>(hi) * wi;

  ConstMapMat wm(wv.data(), cin, kk);
  ConstMapMat xm(xv.data(), cin, npos);
  RowMat cols = wm.transpose() * xm;
  Tensor y({cout, ho, wo});
  col2im(cols.data(), cout, ho, wo, g, hi, wi, y.data());
  const Tensor& bv = tape.value(bias);
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int o = 0; o < cout; ++o) {
    for (std::size_t i = 0; i < plane; ++i) y[o * plane + i] += bv[o];
  }

  return tape.record(std::move(y), {x, weight, bias}, [=](Tape& t, Var out) {
    const Tensor& gy = t.grad(out);
    auto gcols = im2col(gy.data(), cout, ho, wo, g, hi, wi);
    ConstMapMat gcm(gcols.data(), kk, npos);
    if (t.requires_grad(weight)) {
      ConstMapMat xm2(t.value(x).data(), cin, npos);
      MapMat gw(t.grad_buffer(weight).data(), cin, kk);
      gw.noalias() += xm2 * gcm.transpose();
    }
    if (t.requires_grad(bias)) {
      Tensor& gb = t.grad_buffer(bias);
      for (int o = 0; o < cout; ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += gy[o * plane + i];
        gb[o] += s;
      }
    }
    if (t.requires_grad(x)) {
      ConstMapMat wm2(t.value(weight).data(), cin, kk);
      MapMat gx(t.grad_buffer(x).data(), cin, npos);
      gx.noalias() += wm2 * gcm;
    }
  });
}

Var relu(Tape& tape, Var x) {
  Tensor y = tape.value(x);
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return tape.record(std::move(y), {x}, [=](Tape& t, Var out) {
    const Tensor& gy = t.grad(out);
    const Tensor& xv = t.value(x);
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += gy[i];
    }
  });
}

Var sigmoid(Tape& tape, Var x) {
  Tensor y = tape.value(x);
  for (double& v : y.values()) v = 1.0 / (1.0 + std::exp(-v));
  return tape.record(std::move(y), {x}, [=](Tape& t, Var out) {
    const Tensor& gy = t.grad(out);
    const Tensor& yv = t.value(out);
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * yv[i] * (1.0 - yv[i]);
  });
}

Var square(Tape& tape, Var x) {
  Tensor y = tape.value(x);
  for (double& v : y.values()) v = v * v;
  return tape.record(std::move(y), {x}, [=](Tape& t, Var out) {
    const Tensor& gy = t.grad(out);
    const Tensor& xv = t.value(x);
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 2.0 * xv[i] * gy[i];
  });
}

Var add(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (!av.same_shape(bv)) throw Error("add: shape mismatch");
  Tensor y = av;
  add_into(y, bv);
  return tape.record(std::move(y), {a, b}, [=](Tape& t, Var out) {
    if (t.requires_grad(a)) add_into(t.grad_buffer(a), t.grad(out));
    if (t.requires_grad(b)) add_into(t.grad_buffer(b), t.grad(out));
  });
}

Var scale(Tape& tape, Var x, double factor) {
  Tensor y = tape.value(x);
  for (double& v : y.values()) v *= factor;
  return tape.record(std::move(y), {x}, [=](Tape& t, Var out) {
    const Tensor& gy = t.grad(out);
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * gy[i];
  });
}

Var global_avg_pool(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  require_rank3(xv, "global_avg_pool");
  const int c = xv.dim(0);
  const std::size_t plane = static_cast<std::size_t>(xv.dim(1)) * xv.dim(2);
  Tensor y({c});
  for (int ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += xv[ch * plane + i];
    y[ch] = s / static_cast<double>(plane);
  }
  return tape.record(std::move(y), {x}, [=](Tape& t, Var out) {
    const Tensor& gy = t.grad(out);
    Tensor& gx = t.grad_buffer(x);
    for (int ch = 0; ch < c; ++ch) {
      const double g = gy[ch] / static_cast<double>(plane);
      for (std::size_t i = 0; i < plane; ++i) gx[ch * plane + i] += g;
    }
  });
}

Var avg_pool(Tape& tape, Var x, int k) {
  const Tensor& xv = tape.value(x);
  require_rank3(xv, "avg_pool");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (k <= 0 || h % k != 0 || w % k != 0) throw Error("avg_pool: window does not tile the input");
  const int ho = h / k, wo = w / k;
  const double inv = 1.0 / (static_cast<double>(k) * k);
  Tensor y({c, ho, wo});
  for (int ch = 0; ch < c; ++ch)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) y.at(ch, yy / k, xx / k) += xv.at(ch, yy, xx) * inv;
  return tape.record(std::move(y), {x}, [=](Tape& t, Var out) {
    const Tensor& gy = t.grad(out);
    Tensor& gx = t.grad_buffer(x);
    for (int ch = 0; ch < c; ++ch)
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) gx.at(ch, yy, xx) += gy.at(ch, yy / k, xx / k) * inv;
  });
}

Var flatten(Tape& tape, Var x) {
  Tensor y = tape.value(x).reshaped({static_cast<int>(tape.value(x).size())});
  return tape.record(std::move(y), {x}, [=](Tape& t, Var out) {
    const Tensor& gy = t.grad(out);
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
  });
}

Var weighted_sum(Tape& tape, const std::vector<std::pair<double, Var>>& terms) {
  double total = 0.0;
  std::vector<Var> inputs;
  inputs.reserve(terms.size());
  for (const auto& [w, v] : terms) {
    total += w * tape.value(v).item();
    inputs.push_back(v);
  }
  return tape.record(Tensor::scalar(total), inputs, [=](Tape& t, Var out) {
    const double g = t.grad(out)[0];
    for (const auto& [w, v] : terms) {
      if (t.requires_grad(v)) t.grad_buffer(v)[0] += w * g;
    }
  });
}

Var masked_fill(Tape& tape, Var x, const Tensor& mask, Var fill) {
  const Tensor& xv = tape.value(x);
  require_rank3(xv, "masked_fill");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (mask.rank() != 2 || mask.dim(0) != h || mask.dim(1) != w) throw Error("masked_fill: mask geometry mismatch");
  const Tensor& fv = tape.value(fill);
  if (static_cast<int>(fv.size()) != c) throw Error("masked_fill: fill must hold one value per channel");
  Tensor y = xv;
  for (int ch = 0; ch < c; ++ch)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx)
        if (mask[static_cast<std::size_t>(yy) * w + xx] != 0.0) y.at(ch, yy, xx) = fv[ch];
  return tape.record(std::move(y), {x, fill}, [=](Tape& t, Var out) {
    const Tensor& gy = t.grad(out);
    const bool gx_needed = t.requires_grad(x);
    const bool gf_needed = t.requires_grad(fill);
    for (int ch = 0; ch < c; ++ch)
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
          const bool masked = mask[static_cast<std::size_t>(yy) * w + xx] != 0.0;
          if (masked && gf_needed) t.grad_buffer(fill)[ch] += gy.at(ch, yy, xx);
          if (!masked && gx_needed) t.grad_buffer(x).at(ch, yy, xx) += gy.at(ch, yy, xx);
        }
  });
}

}  // namespace ssad::ops
