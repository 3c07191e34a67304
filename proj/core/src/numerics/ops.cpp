#include "skipformer/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "skipformer/errors.hpp"

namespace skf::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

MapC as_mat(const Array& a) {
  return MapC(a.data(), static_cast<Eigen::Index>(a.rows()),
              static_cast<Eigen::Index>(a.cols()));
}
Map as_mat(Array& a) {
  return Map(a.data(), static_cast<Eigen::Index>(a.rows()),
             static_cast<Eigen::Index>(a.cols()));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

void require_matrix(const Var& a, const char* op) {
  if (a.value().rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_string(a.shape()));
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()));
  }
  Array out(Shape{a.rows(), b.cols()});
  as_mat(out).noalias() = as_mat(a.value()) * as_mat(b.value());
  return make_op_result(std::move(out), {&a, &b}, [a, b](const Array& g) {
    if (Array* ga = grad_target(a)) {
      as_mat(*ga).noalias() += as_mat(g) * as_mat(b.value()).transpose();
    }
    if (Array* gb = grad_target(b)) {
      as_mat(*gb).noalias() += as_mat(a.value()).transpose() * as_mat(g);
    }
  });
}

Var transpose(const Var& a) {
  require_matrix(a, "transpose");
  Array out(Shape{a.cols(), a.rows()});
  as_mat(out) = as_mat(a.value()).transpose();
  return make_op_result(std::move(out), {&a}, [a](const Array& g) {
    if (Array* ga = grad_target(a)) as_mat(*ga) += as_mat(g).transpose();
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Array out = a.value();
  const Array& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return make_op_result(std::move(out), {&a, &b}, [a, b](const Array& g) {
    accumulate_grad(a, g);
    accumulate_grad(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Array out = a.value();
  const Array& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return make_op_result(std::move(out), {&a, &b}, [a, b](const Array& g) {
    accumulate_grad(a, g);
    if (Array* gb = grad_target(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Array out = a.value();
  const Array& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return make_op_result(std::move(out), {&a, &b}, [a, b](const Array& g) {
    if (Array* ga = grad_target(a)) {
      const Array& bv = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (Array* gb = grad_target(b)) {
      const Array& av = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Array out = a.value();
  for (double& v : out.values()) v *= s;
  return make_op_result(std::move(out), {&a}, [a, s](const Array& g) {
    if (Array* ga = grad_target(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
    }
  });
}

Var add_bias(const Var& a, const Var& bias) {
  require_matrix(a, "add_bias");
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  if (bias.value().size() != m) {
    throw DimensionError("add_bias: bias shape " + shape_string(bias.shape()) +
                         " does not match columns of " + shape_string(a.shape()));
  }
  Array out = a.value();
  const Array& b = bias.value();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) out(r, c) += b[c];
  }
  return make_op_result(std::move(out), {&a, &bias}, [a, bias, n, m](const Array& g) {
    accumulate_grad(a, g);
    if (Array* gb = grad_target(bias)) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) (*gb)[c] += g[r * m + c];
      }
    }
  });
}

Var sigmoid(const Var& a) {
  Array out(a.shape());
  const Array& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid_scalar(x[i]);
  Array y = out;
  return make_op_result(std::move(out), {&a}, [a, y = std::move(y)](const Array& g) {
    if (Array* ga = grad_target(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i] * (1.0 - y[i]);
    }
  });
}

Var swish(const Var& a) {
  Array out(a.shape());
  const Array& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * sigmoid_scalar(x[i]);
  return make_op_result(std::move(out), {&a}, [a](const Array& g) {
    if (Array* ga = grad_target(a)) {
      const Array& x = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = sigmoid_scalar(x[i]);
        (*ga)[i] += g[i] * (s + x[i] * s * (1.0 - s));
      }
    }
  });
}

Var glu(const Var& a) {
  require_matrix(a, "glu");
  const std::size_t n = a.rows();
  const std::size_t two_d = a.cols();
  if (two_d % 2 != 0) {
    throw DimensionError("glu: odd column count in " + shape_string(a.shape()));
  }
  const std::size_t d = two_d / 2;
  Array out(Shape{n, d});
  const Array& x = a.value();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      out(r, c) = x(r, c) * sigmoid_scalar(x(r, c + d));
    }
  }
  return make_op_result(std::move(out), {&a}, [a, n, d](const Array& g) {
    Array* ga = grad_target(a);
    if (!ga) return;
    const Array& x = a.value();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        const double s = sigmoid_scalar(x(r, c + d));
        const double go = g[r * d + c];
        (*ga)(r, c) += go * s;
        (*ga)(r, c + d) += go * x(r, c) * s * (1.0 - s);
      }
    }
  });
}

Var dropout(const Var& a, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ParameterError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (rate == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - rate);
  Array mask(a.shape());
  const double inv = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) m = keep(rng) ? inv : 0.0;
  return mul(a, Var(std::move(mask)));
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return make_op_result(Array::scalar(s), {&a}, [a](const Array& g) {
    if (Array* ga = grad_target(a)) {
      for (double& v : ga->values()) v += g[0];
    }
  });
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of an empty array");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var softmax_rows(const Var& a) {
  return softmax_rows_masked(a, AttentionMask{});
}

Var softmax_rows_masked(const Var& a, const AttentionMask& mask) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  if (m == 0) throw DimensionError("softmax over an empty row");
  Array out(Shape{n, m}, 0.0);
  const Array& x = a.value();
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t limit = std::min(m, mask.key_length);
    if (mask.causal) limit = std::min(limit, r + 1);
    if (limit == 0) throw DimensionError("softmax row " + std::to_string(r) + " fully masked");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < limit; ++c) mx = std::max(mx, x(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < limit; ++c) {
      const double e = std::exp(x(r, c) - mx);
      out(r, c) = e;
      z += e;
    }
    for (std::size_t c = 0; c < limit; ++c) out(r, c) /= z;
  }
  if (a.value().rank() == 1) out = out.reshaped(a.shape());
  Array y = out;
  return make_op_result(std::move(out), {&a}, [a, y = std::move(y), n, m](const Array& g) {
    Array* ga = grad_target(a);
    if (!ga) return;
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < m; ++c) dot += g[r * m + c] * y[r * m + c];
      for (std::size_t c = 0; c < m; ++c) {
        (*ga)[r * m + c] += y[r * m + c] * (g[r * m + c] - dot);
      }
    }
  });
}

Var log_softmax_rows(const Var& a) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  if (m == 0) throw DimensionError("log_softmax over an empty row");
  Array out(a.shape());
  const Array& x = a.value();
  for (std::size_t r = 0; r < n; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c) mx = std::max(mx, x[r * m + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < m; ++c) z += std::exp(x[r * m + c] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] = x[r * m + c] - lz;
  }
  Array y = out;
  return make_op_result(std::move(out), {&a}, [a, y = std::move(y), n, m](const Array& g) {
    Array* ga = grad_target(a);
    if (!ga) return;
    for (std::size_t r = 0; r < n; ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < m; ++c) gs += g[r * m + c];
      for (std::size_t c = 0; c < m; ++c) {
        (*ga)[r * m + c] += g[r * m + c] - std::exp(y[r * m + c]) * gs;
      }
    }
  });
}

Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps) {
  if (!(eps > 0.0)) {
    throw ParameterError("layer_norm eps must be positive, got " + std::to_string(eps));
  }
  const std::size_t n = a.rows();
  const std::size_t d = a.cols();
  if (gain.value().size() != d || bias.value().size() != d) {
    throw DimensionError("layer_norm: gain " + shape_string(gain.shape()) + " / bias " +
                         shape_string(bias.shape()) + " do not match last dimension of " +
                         shape_string(a.shape()));
  }
  const Array& x = a.value();
  const Array& gv = gain.value();
  const Array& bv = bias.value();
  Array xhat(a.shape());
  std::vector<double> rstd(n);
  Array out(a.shape());
  for (std::size_t r = 0; r < n; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += x[r * d + c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double t = x[r * d + c] - mu;
      var += t * t;
    }
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (x[r * d + c] - mu) * rstd[r];
      xhat[r * d + c] = h;
      out[r * d + c] = h * gv[c] + bv[c];
    }
  }
  return make_op_result(
      std::move(out), {&a, &gain, &bias},
      [a, gain, bias, xhat = std::move(xhat), rstd = std::move(rstd), n, d](const Array& g) {
        const Array& gv = gain.value();
        if (Array* gg = grad_target(gain)) {
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) (*gg)[c] += g[r * d + c] * xhat[r * d + c];
          }
        }
        if (Array* gb = grad_target(bias)) {
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) (*gb)[c] += g[r * d + c];
          }
        }
        if (Array* ga = grad_target(a)) {
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < n; ++r) {
            double m1 = 0.0;
            double m2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              const double dh = g[r * d + c] * gv[c];
              m1 += dh;
              m2 += dh * xhat[r * d + c];
            }
            m1 *= inv_d;
            m2 *= inv_d;
            for (std::size_t c = 0; c < d; ++c) {
              const double dh = g[r * d + c] * gv[c];
              (*ga)[r * d + c] += rstd[r] * (dh - m1 - xhat[r * d + c] * m2);
            }
          }
        }
      });
}

Var depthwise_conv1d(const Var& x, const Var& w, const Var& bias, std::size_t valid_length) {
  require_matrix(x, "depthwise_conv1d");
  require_matrix(w, "depthwise_conv1d");
  const std::size_t len = x.rows();
  const std::size_t d = x.cols();
  const std::size_t k = w.rows();
  if (w.cols() != d || bias.value().size() != d) {
    throw DimensionError("depthwise_conv1d: kernel " + shape_string(w.shape()) + " / bias " +
                         shape_string(bias.shape()) + " incompatible with input " +
                         shape_string(x.shape()));
  }
  if (k % 2 == 0) throw ParameterError("depthwise_conv1d: kernel size must be odd");
  const std::size_t valid = std::min(len, valid_length);
  const auto half = static_cast<std::ptrdiff_t>(k / 2);
  const Array& xv = x.value();
  const Array& wv = w.value();
  const Array& bv = bias.value();
  Array out(Shape{len, d}, 0.0);
  for (std::size_t t = 0; t < valid; ++t) {
    for (std::size_t c = 0; c < d; ++c) out(t, c) = bv[c];
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(valid)) continue;
      const double* xr = &xv[static_cast<std::size_t>(src) * d];
      const double* wr = &wv[j * d];
      double* o = &out[t * d];
      for (std::size_t c = 0; c < d; ++c) o[c] += wr[c] * xr[c];
    }
  }
  return make_op_result(
      std::move(out), {&x, &w, &bias}, [x, w, bias, valid, k, d, half](const Array& g) {
        Array* gx = grad_target(x);
        Array* gw = grad_target(w);
        Array* gb = grad_target(bias);
        const Array& xv = x.value();
        const Array& wv = w.value();
        for (std::size_t t = 0; t < valid; ++t) {
          const double* go = &g[t * d];
          if (gb) {
            for (std::size_t c = 0; c < d; ++c) (*gb)[c] += go[c];
          }
          for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t src =
                static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(valid)) continue;
            const auto s = static_cast<std::size_t>(src);
            for (std::size_t c = 0; c < d; ++c) {
              if (gw) (*gw)[j * d + c] += go[c] * xv[s * d + c];
              if (gx) (*gx)[s * d + c] += go[c] * wv[j * d + c];
            }
          }
        }
      });
}

Var conv2d(const Var& x, const Var& w, const Var& bias, std::size_t kernel,
           std::size_t stride) {
  const Shape& xs = x.shape();
  if (xs.size() != 3) {
    throw DimensionError("conv2d: expected (H, W, C) input, got " + shape_string(xs));
  }
  if (kernel == 0 || stride == 0) throw ParameterError("conv2d: kernel and stride must be positive");
  const std::size_t h = xs[0];
  const std::size_t wd = xs[1];
  const std::size_t cin = xs[2];
  if (h < kernel || wd < kernel) {
    throw DimensionError("conv2d: input " + shape_string(xs) + " smaller than kernel " +
                         std::to_string(kernel));
  }
  const std::size_t patch = kernel * kernel * cin;
  if (w.value().rank() != 2 || w.rows() != patch) {
    throw DimensionError("conv2d: weight " + shape_string(w.shape()) +
                         " incompatible with input " + shape_string(xs));
  }
  const std::size_t cout = w.cols();
  if (bias.value().size() != cout) {
    throw DimensionError("conv2d: bias " + shape_string(bias.shape()) + " does not match " +
                         std::to_string(cout) + " output channels");
  }
  const std::size_t ho = (h - kernel) / stride + 1;
  const std::size_t wo = (wd - kernel) / stride + 1;

  // im2col: one row per output pixel.
  auto cols = std::make_shared<Array>(Shape{ho * wo, patch});
  const Array& xv = x.value();
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      double* dst = &(*cols)[(oy * wo + ox) * patch];
      for (std::size_t ky = 0; ky < kernel; ++ky) {
        const double* src = &xv[((oy * stride + ky) * wd + ox * stride) * cin];
        std::copy(src, src + kernel * cin, dst + ky * kernel * cin);
      }
    }
  }
  Array out(Shape{ho * wo, cout});
  as_mat(out).noalias() = as_mat(*cols) * as_mat(w.value());
  const Array& bv = bias.value();
  for (std::size_t p = 0; p < ho * wo; ++p) {
    for (std::size_t c = 0; c < cout; ++c) out(p, c) += bv[c];
  }
  out = out.reshaped(Shape{ho, wo, cout});
  return make_op_result(
      std::move(out), {&x, &w, &bias},
      [x, w, bias, cols, kernel, stride, wd, cin, ho, wo, patch, cout](const Array& g) {
        const MapC gm(g.data(), static_cast<Eigen::Index>(ho * wo),
                      static_cast<Eigen::Index>(cout));
        if (Array* gw = grad_target(w)) as_mat(*gw).noalias() += as_mat(*cols).transpose() * gm;
        if (Array* gb = grad_target(bias)) {
          for (std::size_t p = 0; p < ho * wo; ++p) {
            for (std::size_t c = 0; c < cout; ++c) (*gb)[c] += g[p * cout + c];
          }
        }
        if (Array* gx = grad_target(x)) {
          Array dcols(Shape{ho * wo, patch});
          as_mat(dcols).noalias() = gm * as_mat(w.value()).transpose();
          for (std::size_t oy = 0; oy < ho; ++oy) {
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const double* src = &dcols[(oy * wo + ox) * patch];
              for (std::size_t ky = 0; ky < kernel; ++ky) {
                double* dst = &(*gx)[((oy * stride + ky) * wd + ox * stride) * cin];
                const double* s = src + ky * kernel * cin;
                for (std::size_t i = 0; i < kernel * cin; ++i) dst[i] += s[i];
              }
            }
          }
        }
      });
}

Var reshape(const Var& a, Shape shape) {
  Array out = a.value().reshaped(std::move(shape));
  return make_op_result(std::move(out), {&a}, [a](const Array& g) {
    if (Array* ga = grad_target(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    }
  });
}

Var slice_cols(const Var& a, std::size_t start, std::size_t width) {
  require_matrix(a, "slice_cols");
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  if (start + width > m) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                         std::to_string(start + width) + ") out of range for " +
                         shape_string(a.shape()));
  }
  Array out(Shape{n, width});
  const Array& x = a.value();
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(&x[r * m + start], width, &out[r * width]);
  }
  return make_op_result(std::move(out), {&a}, [a, n, m, start, width](const Array& g) {
    Array* ga = grad_target(a);
    if (!ga) return;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < width; ++c) (*ga)[r * m + start + c] += g[r * width + c];
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != n) {
      throw DimensionError("concat_cols: row mismatch " + shape_string(parts.front().shape()) +
                           " vs " + shape_string(p.shape()));
    }
    total += p.cols();
  }
  Array out(Shape{n, total});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const std::size_t w = p.cols();
    const Array& x = p.value();
    for (std::size_t r = 0; r < n; ++r) std::copy_n(&x[r * w], w, &out[r * total + off]);
    off += w;
  }
  return make_op_result(std::move(out), parts, [parts, n, total](const Array& g) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t w = p.cols();
      if (Array* gp = grad_target(p)) {
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t c = 0; c < w; ++c) (*gp)[r * w + c] += g[r * total + off + c];
        }
      }
      off += w;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  const std::size_t m = parts.front().cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != m) {
      throw DimensionError("concat_rows: column mismatch " +
                           shape_string(parts.front().shape()) + " vs " + shape_string(p.shape()));
    }
    total += p.rows();
  }
  std::vector<double> data;
  data.reserve(total * m);
  for (const Var& p : parts) {
    const auto& s = p.value().storage();
    data.insert(data.end(), s.begin(), s.end());
  }
  Array out(Shape{total, m}, std::move(data));
  return make_op_result(std::move(out), parts, [parts](const Array& g) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t sz = p.value().size();
      if (Array* gp = grad_target(p)) {
        for (std::size_t i = 0; i < sz; ++i) (*gp)[i] += g[off + i];
      }
      off += sz;
    }
  });
}

Var gather_rows(const Var& a, std::span<const std::size_t> indices) {
  require_matrix(a, "gather_rows");
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  for (std::size_t idx : indices) {
    if (idx >= n) {
      throw ContractError("gather_rows: index " + std::to_string(idx) +
                          " out of range for " + shape_string(a.shape()));
    }
  }
  Array out(Shape{indices.size(), m});
  const Array& x = a.value();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(&x[indices[i] * m], m, &out[i * m]);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_op_result(std::move(out), {&a}, [a, idx = std::move(idx), m](const Array& g) {
    Array* ga = grad_target(a);
    if (!ga) return;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < m; ++c) (*ga)[idx[i] * m + c] += g[i * m + c];
    }
  });
}

Var gather_elems(const Var& a, std::span<const std::size_t> flat_indices) {
  const std::size_t n = a.value().size();
  Array out(Shape{flat_indices.size()});
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    if (flat_indices[i] >= n) {
      throw ContractError("gather_elems: index " + std::to_string(flat_indices[i]) +
                          " out of range for " + shape_string(a.shape()));
    }
    out[i] = a.value()[flat_indices[i]];
  }
  std::vector<std::size_t> idx(flat_indices.begin(), flat_indices.end());
  return make_op_result(std::move(out), {&a}, [a, idx = std::move(idx)](const Array& g) {
    Array* ga = grad_target(a);
    if (!ga) return;
    for (std::size_t i = 0; i < idx.size(); ++i) (*ga)[idx[i]] += g[i];
  });
}

Var logsumexp_groups(const Var& a, const std::vector<std::vector<std::size_t>>& groups) {
  const Array& x = a.value();
  Array out(Shape{groups.size()});
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& grp = groups[i];
    if (grp.empty()) {
      out[i] = kLogZero;
      continue;
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j : grp) {
      if (j >= x.size()) {
        throw ContractError("logsumexp_groups: index " + std::to_string(j) +
                            " out of range for " + shape_string(a.shape()));
      }
      mx = std::max(mx, x[j]);
    }
    double s = 0.0;
    for (std::size_t j : grp) s += std::exp(x[j] - mx);
    out[i] = mx + std::log(s);
  }
  Array y = out;
  return make_op_result(std::move(out), {&a}, [a, groups, y = std::move(y)](const Array& g) {
    Array* ga = grad_target(a);
    if (!ga) return;
    const Array& x = a.value();
    for (std::size_t i = 0; i < groups.size(); ++i) {
      for (std::size_t j : groups[i]) (*ga)[j] += g[i] * std::exp(x[j] - y[i]);
    }
  });
}

Var cross_entropy(const Var& logits, std::span<const std::size_t> targets) {
  require_matrix(logits, "cross_entropy");
  const std::size_t n = logits.rows();
  const std::size_t v = logits.cols();
  if (targets.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_string(logits.shape()));
  }
  if (n == 0) throw DimensionError("cross_entropy over zero rows");
  std::vector<std::size_t> flat(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] >= v) {
      throw ContractError("cross_entropy: target " + std::to_string(targets[r]) +
                          " out of range for vocabulary " + std::to_string(v));
    }
    flat[r] = r * v + targets[r];
  }
  return scale(sum(gather_elems(log_softmax_rows(logits), flat)), -1.0 / static_cast<double>(n));
}

}  // namespace skf::num
