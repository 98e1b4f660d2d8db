#include "aurecon/diffcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "aurecon/common/error.hpp"

namespace aurecon::diff {

namespace {

using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

Tensor make_result(std::string_view op, Shape shape, std::vector<double> values,
                   std::initializer_list<const Tensor*> inputs,
                   std::function<void(const TensorImpl&)> backward) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError("non-finite value produced by " + std::string(op));
  }
  auto out = Tensor::from(std::move(shape), std::move(values));
  bool needs = false;
  for (const auto* in : inputs) needs = needs || (in->defined() && in->requires_grad());
  if (needs) {
    auto node = std::make_shared<detail::Node>();
    for (const auto* in : inputs) {
      if (in->defined()) node->inputs.push_back(in->impl());
    }
    node->backward = std::move(backward);
    node->op_name = std::string(op);
    out.impl()->node = std::move(node);
    out.impl()->requires_grad = true;
  }
  return out;
}

void require_defined(const Tensor& t, std::string_view op, std::string_view what) {
  if (!t.defined()) throw Error(std::string(op) + ": " + std::string(what) + " is undefined");
}

void require_rank(const Tensor& t, std::size_t rank, std::string_view op, std::string_view what) {
  require_defined(t, op, what);
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + std::string(what) + " must have rank " +
                     std::to_string(rank) + ", got shape " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  require_defined(a, op, "lhs");
  require_defined(b, op, "rhs");
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Elementwise unary op with derivative expressed through (x, y).
template <class Fwd, class Deriv>
Tensor unary(std::string_view op, const Tensor& x, Fwd fwd, Deriv deriv) {
  require_defined(x, op, "input");
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  ImplPtr xi = x.impl();
  return make_result(op, x.shape(), std::move(out), {&x}, [xi, deriv](const TensorImpl& o) {
    if (!xi->requires_grad) return;
    auto& g = xi->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * deriv(xi->data[i], o.data[i]);
  });
}

struct ConvGeom {
  std::size_t n, c, h, w, o, k, stride, pad, ho, wo;
};

void im2col(const double* img, const ConvGeom& g, double* cols) {
  const std::size_t plane = g.ho * g.wo;
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        double* row = cols + ((c * g.k + ki) * g.k + kj) * plane;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                          static_cast<std::ptrdiff_t>(g.pad);
          double* dst = row + oy * g.wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.wo, 0.0);
            continue;
          }
          const double* src = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                            static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w))
                          ? 0.0
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeom& g, double* img) {
  const std::size_t plane = g.ho * g.wo;
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const double* row = cols + ((c * g.k + ki) * g.k + kj) * plane;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          double* dst = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const double* src = row + oy * g.wo;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) {
              dst[static_cast<std::size_t>(ix)] += src[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw Error("unknown activation '" + std::string(name) + "'");
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  constexpr std::string_view op = "conv2d";
  require_rank(input, 4, op, "input");
  require_rank(weight, 4, op, "weight");
  if (stride == 0) throw Error("conv2d: stride must be positive");
  ConvGeom g{};
  g.n = input.dim(0);
  g.c = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.o = weight.dim(0);
  g.k = weight.dim(2);
  g.stride = stride;
  g.pad = padding;
  if (weight.dim(3) != g.k) {
    throw ShapeError("conv2d: kernel must be square, got " + std::to_string(weight.dim(2)) + "x" +
                     std::to_string(weight.dim(3)));
  }
  if (weight.dim(1) != g.c) {
    throw ShapeError("conv2d: input channels (dim 1) is " + std::to_string(g.c) +
                     " but weight expects " + std::to_string(weight.dim(1)));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.o)) {
    throw ShapeError("conv2d: bias must have shape (" + std::to_string(g.o) + "), got " +
                     shape_str(bias.shape()));
  }
  if (g.h + 2 * g.pad < g.k) {
    throw ShapeError("conv2d: input height (dim 2) " + std::to_string(g.h) +
                     " too small for kernel " + std::to_string(g.k));
  }
  if (g.w + 2 * g.pad < g.k) {
    throw ShapeError("conv2d: input width (dim 3) " + std::to_string(g.w) +
                     " too small for kernel " + std::to_string(g.k));
  }
  g.ho = (g.h + 2 * g.pad - g.k) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.k) / g.stride + 1;

  const std::size_t ckk = g.c * g.k * g.k;
  const std::size_t plane = g.ho * g.wo;
  std::vector<double> out(g.n * g.o * plane);
  std::vector<double> cols(ckk * plane);
  ConstMap wmat(weight.data().data(), static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(ckk));
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(input.data().data() + n * g.c * g.h * g.w, g, cols.data());
    ConstMap cmat(cols.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(plane));
    MutMap omat(out.data() + n * g.o * plane, static_cast<Eigen::Index>(g.o),
                static_cast<Eigen::Index>(plane));
    omat.noalias() = wmat * cmat;
    if (bias.defined()) {
      for (std::size_t o = 0; o < g.o; ++o) {
        omat.row(static_cast<Eigen::Index>(o)).array() += bias.data()[o];
      }
    }
  }

  ImplPtr xi = input.impl();
  ImplPtr wi = weight.impl();
  ImplPtr bi = bias.defined() ? bias.impl() : nullptr;
  return make_result(op, {g.n, g.o, g.ho, g.wo}, std::move(out), {&input, &weight, &bias},
                     [xi, wi, bi, g](const TensorImpl& o) {
                       const std::size_t ckk = g.c * g.k * g.k;
                       const std::size_t plane = g.ho * g.wo;
                       const auto eo = static_cast<Eigen::Index>(g.o);
                       const auto eckk = static_cast<Eigen::Index>(ckk);
                       const auto eplane = static_cast<Eigen::Index>(plane);
                       std::vector<double> cols(ckk * plane);
                       ConstMap wmat(wi->data.data(), eo, eckk);
                       for (std::size_t n = 0; n < g.n; ++n) {
                         ConstMap gout(o.grad.data() + n * g.o * plane, eo, eplane);
                         if (wi->requires_grad) {
                           im2col(xi->data.data() + n * g.c * g.h * g.w, g, cols.data());
                           ConstMap cmat(cols.data(), eckk, eplane);
                           MutMap gw(wi->ensure_grad().data(), eo, eckk);
                           gw.noalias() += gout * cmat.transpose();
                         }
                         if (bi && bi->requires_grad) {
                           auto& gb = bi->ensure_grad();
                           for (std::size_t oc = 0; oc < g.o; ++oc) {
                             gb[oc] += gout.row(static_cast<Eigen::Index>(oc)).sum();
                           }
                         }
                         if (xi->requires_grad) {
                           MutMap gcols(cols.data(), eckk, eplane);
                           gcols.noalias() = wmat.transpose() * gout;
                           col2im_add(cols.data(), g, xi->ensure_grad().data() + n * g.c * g.h * g.w);
                         }
                       }
                     });
}

Tensor avgpool2(const Tensor& input) {
  constexpr std::string_view op = "avgpool2";
  require_rank(input, 4, op, "input");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h < 2 || w < 2) {
    throw ShapeError("avgpool2: spatial extent must be at least 2x2, got " + std::to_string(h) +
                     "x" + std::to_string(w));
  }
  const std::size_t ho = h / 2, wo = w / 2;
  const auto x = input.data();
  std::vector<double> out(n * c * ho * wo);
  for (std::size_t p = 0; p < n * c; ++p) {
    const double* src = x.data() + p * h * w;
    double* dst = out.data() + p * ho * wo;
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        const double* a = src + 2 * i * w + 2 * j;
        dst[i * wo + j] = 0.25 * (a[0] + a[1] + a[w] + a[w + 1]);
      }
    }
  }
  ImplPtr xi = input.impl();
  return make_result(op, {n, c, ho, wo}, std::move(out), {&input},
                     [xi, n, c, h, w, ho, wo](const TensorImpl& o) {
                       if (!xi->requires_grad) return;
                       auto& gx = xi->ensure_grad();
                       for (std::size_t p = 0; p < n * c; ++p) {
                         double* dst = gx.data() + p * h * w;
                         const double* src = o.grad.data() + p * ho * wo;
                         for (std::size_t i = 0; i < ho; ++i) {
                           for (std::size_t j = 0; j < wo; ++j) {
                             const double v = 0.25 * src[i * wo + j];
                             double* a = dst + 2 * i * w + 2 * j;
                             a[0] += v;
                             a[1] += v;
                             a[w] += v;
                             a[w + 1] += v;
                           }
                         }
                       }
                     });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  constexpr std::string_view op = "linear";
  require_rank(input, 2, op, "input");
  require_rank(weight, 2, op, "weight");
  const std::size_t n = input.dim(0), in = input.dim(1), outf = weight.dim(0);
  if (weight.dim(1) != in) {
    throw ShapeError("linear: input features (dim 1) is " + std::to_string(in) +
                     " but weight expects " + std::to_string(weight.dim(1)));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != outf)) {
    throw ShapeError("linear: bias must have shape (" + std::to_string(outf) + "), got " +
                     shape_str(bias.shape()));
  }
  const auto en = static_cast<Eigen::Index>(n);
  const auto ein = static_cast<Eigen::Index>(in);
  const auto eout = static_cast<Eigen::Index>(outf);
  std::vector<double> out(n * outf);
  {
    ConstMap x(input.data().data(), en, ein);
    ConstMap wm(weight.data().data(), eout, ein);
    MutMap y(out.data(), en, eout);
    y.noalias() = x * wm.transpose();
    if (bias.defined()) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < outf; ++k) out[r * outf + k] += bias.data()[k];
      }
    }
  }
  ImplPtr xi = input.impl();
  ImplPtr wi = weight.impl();
  ImplPtr bi = bias.defined() ? bias.impl() : nullptr;
  return make_result(op, {n, outf}, std::move(out), {&input, &weight, &bias},
                     [xi, wi, bi, en, ein, eout](const TensorImpl& o) {
                       ConstMap gy(o.grad.data(), en, eout);
                       if (xi->requires_grad) {
                         MutMap gx(xi->ensure_grad().data(), en, ein);
                         gx.noalias() += gy * ConstMap(wi->data.data(), eout, ein);
                       }
                       if (wi->requires_grad) {
                         MutMap gw(wi->ensure_grad().data(), eout, ein);
                         gw.noalias() += gy.transpose() * ConstMap(xi->data.data(), en, ein);
                       }
                       if (bi && bi->requires_grad) {
                         auto& gb = bi->ensure_grad();
                         for (Eigen::Index r = 0; r < en; ++r) {
                           for (Eigen::Index k = 0; k < eout; ++k) {
                             gb[static_cast<std::size_t>(k)] += gy(r, k);
                           }
                         }
                       }
                     });
}

Tensor activation(const Tensor& input, Activation kind) {
  switch (kind) {
    case Activation::relu:
      return unary(
          "relu", input, [](double v) { return v > 0.0 ? v : 0.0; },
          [](double xv, double) { return xv > 0.0 ? 1.0 : 0.0; });
    case Activation::sigmoid:
      return unary(
          "sigmoid", input, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
    case Activation::tanh:
      return unary(
          "tanh", input, [](double v) { return std::tanh(v); },
          [](double, double y) { return 1.0 - y * y; });
  }
  throw Error("activation: unknown kind");
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  ImplPtr ai = a.impl(), bi = b.impl();
  return make_result("add", a.shape(), std::move(out), {&a, &b}, [ai, bi](const TensorImpl& o) {
    for (const auto& t : {ai, bi}) {
      if (!t->requires_grad) continue;
      auto& g = t->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  ImplPtr ai = a.impl(), bi = b.impl();
  return make_result("sub", a.shape(), std::move(out), {&a, &b}, [ai, bi](const TensorImpl& o) {
    if (ai->requires_grad) {
      auto& g = ai->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (bi->requires_grad) {
      auto& g = bi->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  ImplPtr ai = a.impl(), bi = b.impl();
  return make_result("mul", a.shape(), std::move(out), {&a, &b}, [ai, bi](const TensorImpl& o) {
    if (ai->requires_grad) {
      auto& g = ai->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * bi->data[i];
    }
    if (bi->requires_grad) {
      auto& g = bi->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * ai->data[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      "add_scalar", x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor log(const Tensor& x) {
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw Error("clamp: lo must not exceed hi");
  return unary(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum", "input");
  double s = 0.0;
  for (double v : x.data()) s += v;
  ImplPtr xi = x.impl();
  return make_result("sum", {1}, {s}, {&x}, [xi](const TensorImpl& o) {
    if (!xi->requires_grad) return;
    auto& g = xi->ensure_grad();
    for (auto& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean", "input");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape", "input");
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  ImplPtr xi = x.impl();
  return make_result("reshape", std::move(shape), std::move(out), {&x}, [xi](const TensorImpl& o) {
    if (!xi->requires_grad) return;
    auto& g = xi->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor flatten(const Tensor& x) {
  require_defined(x, "flatten", "input");
  if (x.rank() < 2) throw ShapeError("flatten: need rank >= 2, got " + shape_str(x.shape()));
  return reshape(x, {x.dim(0), x.numel() / x.dim(0)});
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  constexpr std::string_view op = "concat_channels";
  require_rank(a, 4, op, "lhs");
  require_rank(b, 4, op, "rhs");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: batch/spatial mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  std::vector<double> out(n * (ca + cb) * hw);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.data().data() + i * ca * hw, ca * hw, out.data() + i * (ca + cb) * hw);
    std::copy_n(b.data().data() + i * cb * hw, cb * hw, out.data() + (i * (ca + cb) + ca) * hw);
  }
  ImplPtr ai = a.impl(), bi = b.impl();
  return make_result(op, {n, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {&a, &b},
                     [ai, bi, n, ca, cb, hw](const TensorImpl& o) {
                       for (std::size_t i = 0; i < n; ++i) {
                         const double* src = o.grad.data() + i * (ca + cb) * hw;
                         if (ai->requires_grad) {
                           double* g = ai->ensure_grad().data() + i * ca * hw;
                           for (std::size_t k = 0; k < ca * hw; ++k) g[k] += src[k];
                         }
                         if (bi->requires_grad) {
                           double* g = bi->ensure_grad().data() + i * cb * hw;
                           for (std::size_t k = 0; k < cb * hw; ++k) g[k] += src[ca * hw + k];
                         }
                       }
                     });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool", "input");
  const std::size_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> out(nc);
  for (std::size_t p = 0; p < nc; ++p) {
    double s = 0.0;
    for (std::size_t k = 0; k < hw; ++k) s += x.data()[p * hw + k];
    out[p] = s / static_cast<double>(hw);
  }
  ImplPtr xi = x.impl();
  return make_result("global_avg_pool", {x.dim(0), x.dim(1)}, std::move(out), {&x},
                     [xi, nc, hw](const TensorImpl& o) {
                       if (!xi->requires_grad) return;
                       auto& g = xi->ensure_grad();
                       for (std::size_t p = 0; p < nc; ++p) {
                         const double v = o.grad[p] / static_cast<double>(hw);
                         for (std::size_t k = 0; k < hw; ++k) g[p * hw + k] += v;
                       }
                     });
}

Tensor global_max_pool(const Tensor& x) {
  require_rank(x, 4, "global_max_pool", "input");
  const std::size_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> out(nc);
  std::vector<std::size_t> arg(nc);
  for (std::size_t p = 0; p < nc; ++p) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < hw; ++k) {
      if (x.data()[p * hw + k] > x.data()[p * hw + best]) best = k;
    }
    arg[p] = p * hw + best;
    out[p] = x.data()[arg[p]];
  }
  ImplPtr xi = x.impl();
  return make_result("global_max_pool", {x.dim(0), x.dim(1)}, std::move(out), {&x},
                     [xi, arg = std::move(arg)](const TensorImpl& o) {
                       if (!xi->requires_grad) return;
                       auto& g = xi->ensure_grad();
                       for (std::size_t p = 0; p < arg.size(); ++p) g[arg[p]] += o.grad[p];
                     });
}

Tensor channel_mean(const Tensor& x) {
  require_rank(x, 4, "channel_mean", "input");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> out(n * hw, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* src = x.data().data() + (i * c + ch) * hw;
      for (std::size_t k = 0; k < hw; ++k) out[i * hw + k] += src[k];
    }
  }
  for (auto& v : out) v /= static_cast<double>(c);
  ImplPtr xi = x.impl();
  return make_result("channel_mean", {n, 1, x.dim(2), x.dim(3)}, std::move(out), {&x},
                     [xi, n, c, hw](const TensorImpl& o) {
                       if (!xi->requires_grad) return;
                       auto& g = xi->ensure_grad();
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t ch = 0; ch < c; ++ch) {
                           double* dst = g.data() + (i * c + ch) * hw;
                           for (std::size_t k = 0; k < hw; ++k) {
                             dst[k] += o.grad[i * hw + k] / static_cast<double>(c);
                           }
                         }
                       }
                     });
}

Tensor channel_max(const Tensor& x) {
  require_rank(x, 4, "channel_max", "input");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> out(n * hw);
  std::vector<std::size_t> arg(n * hw);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < hw; ++k) {
      std::size_t best = (i * c) * hw + k;
      for (std::size_t ch = 1; ch < c; ++ch) {
        const std::size_t idx = (i * c + ch) * hw + k;
        if (x.data()[idx] > x.data()[best]) best = idx;
      }
      arg[i * hw + k] = best;
      out[i * hw + k] = x.data()[best];
    }
  }
  ImplPtr xi = x.impl();
  return make_result("channel_max", {n, 1, x.dim(2), x.dim(3)}, std::move(out), {&x},
                     [xi, arg = std::move(arg)](const TensorImpl& o) {
                       if (!xi->requires_grad) return;
                       auto& g = xi->ensure_grad();
                       for (std::size_t p = 0; p < arg.size(); ++p) g[arg[p]] += o.grad[p];
                     });
}

Tensor channel_gate(const Tensor& x, const Tensor& gate) {
  require_rank(x, 4, "channel_gate", "input");
  require_rank(gate, 2, "channel_gate", "gate");
  if (gate.dim(0) != x.dim(0) || gate.dim(1) != x.dim(1)) {
    throw ShapeError("channel_gate: gate " + shape_str(gate.shape()) + " does not match input " +
                     shape_str(x.shape()));
  }
  const std::size_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> out(x.numel());
  for (std::size_t p = 0; p < nc; ++p) {
    for (std::size_t k = 0; k < hw; ++k) out[p * hw + k] = x.data()[p * hw + k] * gate.data()[p];
  }
  ImplPtr xi = x.impl(), gi = gate.impl();
  return make_result("channel_gate", x.shape(), std::move(out), {&x, &gate},
                     [xi, gi, nc, hw](const TensorImpl& o) {
                       if (xi->requires_grad) {
                         auto& g = xi->ensure_grad();
                         for (std::size_t p = 0; p < nc; ++p) {
                           for (std::size_t k = 0; k < hw; ++k) {
                             g[p * hw + k] += o.grad[p * hw + k] * gi->data[p];
                           }
                         }
                       }
                       if (gi->requires_grad) {
                         auto& g = gi->ensure_grad();
                         for (std::size_t p = 0; p < nc; ++p) {
                           double s = 0.0;
                           for (std::size_t k = 0; k < hw; ++k) {
                             s += o.grad[p * hw + k] * xi->data[p * hw + k];
                           }
                           g[p] += s;
                         }
                       }
                     });
}

Tensor spatial_gate(const Tensor& x, const Tensor& gate) {
  require_rank(x, 4, "spatial_gate", "input");
  require_rank(gate, 4, "spatial_gate", "gate");
  if (gate.dim(0) != x.dim(0) || gate.dim(1) != 1 || gate.dim(2) != x.dim(2) ||
      gate.dim(3) != x.dim(3)) {
    throw ShapeError("spatial_gate: gate " + shape_str(gate.shape()) + " does not match input " +
                     shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t k = 0; k < hw; ++k) {
        out[(i * c + ch) * hw + k] = x.data()[(i * c + ch) * hw + k] * gate.data()[i * hw + k];
      }
    }
  }
  ImplPtr xi = x.impl(), gi = gate.impl();
  return make_result("spatial_gate", x.shape(), std::move(out), {&x, &gate},
                     [xi, gi, n, c, hw](const TensorImpl& o) {
                       if (xi->requires_grad) {
                         auto& g = xi->ensure_grad();
                         for (std::size_t i = 0; i < n; ++i) {
                           for (std::size_t ch = 0; ch < c; ++ch) {
                             for (std::size_t k = 0; k < hw; ++k) {
                               const std::size_t idx = (i * c + ch) * hw + k;
                               g[idx] += o.grad[idx] * gi->data[i * hw + k];
                             }
                           }
                         }
                       }
                       if (gi->requires_grad) {
                         auto& g = gi->ensure_grad();
                         for (std::size_t i = 0; i < n; ++i) {
                           for (std::size_t ch = 0; ch < c; ++ch) {
                             for (std::size_t k = 0; k < hw; ++k) {
                               const std::size_t idx = (i * c + ch) * hw + k;
                               g[i * hw + k] += o.grad[idx] * xi->data[idx];
                             }
                           }
                         }
                       }
                     });
}

Tensor sum_per_sample(const Tensor& x) {
  require_defined(x, "sum_per_sample", "input");
  if (x.rank() < 1) throw ShapeError("sum_per_sample: rank-0 input");
  const std::size_t n = x.dim(0), per = x.numel() / n;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < per; ++k) out[i] += x.data()[i * per + k];
  }
  ImplPtr xi = x.impl();
  return make_result("sum_per_sample", {n}, std::move(out), {&x}, [xi, n, per](const TensorImpl& o) {
    if (!xi->requires_grad) return;
    auto& g = xi->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < per; ++k) g[i * per + k] += o.grad[i];
    }
  });
}

Tensor rms_normalize(const Tensor& x, double eps) {
  require_defined(x, "rms_normalize", "input");
  if (x.rank() < 1) throw ShapeError("rms_normalize: rank-0 input");
  if (!(eps > 0.0)) throw Error("rms_normalize: eps must be positive");
  const std::size_t n = x.dim(0), per = x.numel() / n;
  std::vector<double> out(x.numel()), inv(n);
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (std::size_t k = 0; k < per; ++k) ss += x.data()[i * per + k] * x.data()[i * per + k];
    inv[i] = 1.0 / std::sqrt(ss / static_cast<double>(per) + eps);
    for (std::size_t k = 0; k < per; ++k) out[i * per + k] = x.data()[i * per + k] * inv[i];
  }
  ImplPtr xi = x.impl();
  return make_result("rms_normalize", x.shape(), std::move(out), {&x}, [xi, n, per, inv](const TensorImpl& o) {
    if (!xi->requires_grad) return;
    auto& g = xi->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      // d y_k / d x_j = inv * delta_kj - x_k x_j inv^3 / per
      double dot = 0.0;
      for (std::size_t k = 0; k < per; ++k) dot += o.grad[i * per + k] * xi->data[i * per + k];
      const double c = dot * inv[i] * inv[i] * inv[i] / static_cast<double>(per);
      for (std::size_t k = 0; k < per; ++k) {
        g[i * per + k] += o.grad[i * per + k] * inv[i] - xi->data[i * per + k] * c;
      }
    }
  });
}

}  // namespace aurecon::diff
