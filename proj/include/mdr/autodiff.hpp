#ifndef MDR_AUTODIFF_HPP_
#define MDR_AUTODIFF_HPP_

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mdr::ad {

/// Dense row-major 2-D tensor. Vectors are 1 x n rows.
template <typename Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
std::string shape_string(const Tensor<Scalar>& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

/// A trainable tensor together with its gradient accumulator.
template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<Scalar> v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor<Scalar>::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

/// Compressed index lists: segment i covers indices[offsets[i] .. offsets[i+1]).
struct Segments {
  std::vector<int> offsets{0};
  std::vector<int> indices;

  std::size_t count() const { return offsets.size() - 1; }
  void push(std::span<const int> members) {
    indices.insert(indices.end(), members.begin(), members.end());
    offsets.push_back(static_cast<int>(indices.size()));
  }
};

template <typename Scalar>
class Tape;

/// Handle to a value recorded on a tape.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, int index) : tape_(tape), index_(index) {}

  const Tensor<Scalar>& value() const { return tape_->value(index_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar item() const {
    if (rows() != 1 || cols() != 1) throw std::invalid_argument("item: expected [1x1], got " + shape_string(value()));
    return value()(0, 0);
  }
  Tape<Scalar>* tape() const { return tape_; }
  int index() const { return index_; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  int index_ = -1;
};

/// Records a forward computation and replays it backwards.
///
/// Single-owner: one tape per forward/backward pass. Parameters are referenced,
/// not copied; they must stay alive and unmodified until backward() returns.
/// Reductions run in a fixed order, so identical inputs give bit-identical
/// results.
template <typename Scalar>
class Tape {
 public:
  using T = Tensor<Scalar>;
  // Receives the node's output gradient; accumulates into input gradients.
  using Backward = std::function<void(Tape&, const T&)>;

  Tape() { nodes_.reserve(64); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(T value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
  }

  Var<Scalar> parameter(Parameter<Scalar>& p) {
    Node n;
    n.external = &p.value;
    n.param = &p;
    n.requires_grad = true;
    return push(std::move(n));
  }

  /// Adds an op node. `backward` is only kept when some input needs a gradient.
  Var<Scalar> record(T value, std::initializer_list<Var<Scalar>> inputs, Backward backward) {
    Node n;
    n.value = std::move(value);
    for (const auto& in : inputs) {
      if (in.tape() != this) throw std::invalid_argument("autodiff: operand recorded on a different tape");
      n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(in.index())].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  const T& value(int i) const { return nodes_[static_cast<std::size_t>(i)].get(); }
  bool requires_grad(int i) const { return nodes_[static_cast<std::size_t>(i)].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// grad[i] += delta, allocating on first use. No-op for constants.
  template <typename Expr>
  void accumulate(int i, const Expr& delta) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad) return;
    // delta never reads this node's gradient, so products can skip the temporary.
    if (n.grad.size() == 0) {
      n.grad.resize(delta.rows(), delta.cols());
      n.grad.noalias() = delta;
    } else {
      n.grad.noalias() += delta;
    }
  }

  /// Back-propagates from a [1x1] loss and adds the result into every
  /// referenced Parameter::grad. Each recorded op is visited once.
  void backward(const Var<Scalar>& loss, Scalar seed = Scalar(1)) {
    if (loss.rows() != 1 || loss.cols() != 1) {
      throw std::invalid_argument("backward: loss must be [1x1], got " + shape_string(loss.value()));
    }
    accumulate(loss.index(), T::Constant(1, 1, seed));
    for (int i = loss.index(); i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.size() == 0) continue;
      if (n.backward) {
        const T g = std::move(n.grad);
        n.backward(*this, g);
      } else if (n.param) {
        n.param->grad += n.grad;
      }
    }
  }

 private:
  struct Node {
    T value;
    const T* external = nullptr;
    T grad;
    Backward backward;
    Parameter<Scalar>* param = nullptr;
    bool requires_grad = false;
    const T& get() const { return external ? *external : value; }
  };

  Var<Scalar> push(Node n) {
    nodes_.push_back(std::move(n));
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
};

namespace detail {

template <typename Scalar>
[[noreturn]] void shape_error(const char* op, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

template <typename Scalar>
void require_same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a.value(), b.value());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives. Each returns a new Var on the operands' tape.

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.rows()) detail::shape_error("matmul", a.value(), b.value());
  const int ia = a.index(), ib = b.index();
  return a.tape()->record(a.value() * b.value(), {a, b}, [ia, ib](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

/// a * b^T
template <typename Scalar>
Var<Scalar> matmul_nt(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.cols()) detail::shape_error("matmul_nt", a.value(), b.value());
  const int ia = a.index(), ib = b.index();
  return a.tape()->record(a.value() * b.value().transpose(), {a, b},
                          [ia, ib](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib));
                            if (t.requires_grad(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
                          });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  const int ia = a.index();
  return a.tape()->record(a.value().transpose(), {a}, [ia](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(ia, g.transpose());
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("add", a, b);
  const int ia = a.index(), ib = b.index();
  return a.tape()->record(a.value() + b.value(), {a, b}, [ia, ib](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("sub", a, b);
  const int ia = a.index(), ib = b.index();
  return a.tape()->record(a.value() - b.value(), {a, b}, [ia, ib](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

/// Adds a [1 x c] row to every row of a.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& a, const Var<Scalar>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) detail::shape_error("add_row", a.value(), row.value());
  const int ia = a.index(), ir = row.index();
  Tensor<Scalar> out = a.value().rowwise() + row.value().row(0);
  return a.tape()->record(std::move(out), {a, row}, [ia, ir](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

/// Elementwise product.
template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("mul", a, b);
  const int ia = a.index(), ib = b.index();
  Tensor<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  const int ia = a.index();
  return a.tape()->record(a.value() * s, {a}, [ia, s](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(ia, g * s);
  });
}

/// Concatenation along the last axis: [r x c1] ++ [r x c2] -> [r x (c1+c2)].
template <typename Scalar>
Var<Scalar> concat_cols(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.rows() != b.rows()) detail::shape_error("concat_cols", a.value(), b.value());
  const int ia = a.index(), ib = b.index();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  Tensor<Scalar> out(a.rows(), ca + cb);
  out << a.value(), b.value();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib, ca, cb](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g.leftCols(ca));
    if (t.requires_grad(ib)) t.accumulate(ib, g.rightCols(cb));
  });
}

/// Row i of the result is the mean of the rows of a listed in segment i; an
/// empty segment yields a zero row.
template <typename Scalar>
Var<Scalar> segment_mean(const Var<Scalar>& a, std::shared_ptr<const Segments> segments) {
  const auto& s = *segments;
  for (int idx : s.indices) {
    if (idx < 0 || idx >= a.rows()) {
      throw std::invalid_argument("segment_mean: index " + std::to_string(idx) + " out of range for " +
                                  shape_string(a.value()));
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(s.count());
  Tensor<Scalar> out = Tensor<Scalar>::Zero(n, a.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const int lo = s.offsets[static_cast<std::size_t>(i)], hi = s.offsets[static_cast<std::size_t>(i) + 1];
    if (hi == lo) continue;
    for (int k = lo; k < hi; ++k) out.row(i) += a.value().row(s.indices[static_cast<std::size_t>(k)]);
    out.row(i) /= static_cast<Scalar>(hi - lo);
  }
  const int ia = a.index();
  const Eigen::Index rows = a.rows();
  return a.tape()->record(std::move(out), {a},
                          [ia, rows, segments = std::move(segments)](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            const auto& s = *segments;
                            Tensor<Scalar> ga = Tensor<Scalar>::Zero(rows, g.cols());
                            for (std::size_t i = 0; i < s.count(); ++i) {
                              const int lo = s.offsets[i], hi = s.offsets[i + 1];
                              if (hi == lo) continue;
                              const Scalar w = Scalar(1) / static_cast<Scalar>(hi - lo);
                              for (int k = lo; k < hi; ++k) {
                                ga.row(s.indices[static_cast<std::size_t>(k)]) += w * g.row(static_cast<Eigen::Index>(i));
                              }
                            }
                            t.accumulate(ia, ga);
                          });
}

template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& a, std::vector<int> rows) {
  Tensor<Scalar> out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= a.rows()) {
      throw std::invalid_argument("gather_rows: row " + std::to_string(rows[k]) + " out of range for " +
                                  shape_string(a.value()));
    }
    out.row(static_cast<Eigen::Index>(k)) = a.value().row(rows[k]);
  }
  const int ia = a.index();
  const Eigen::Index n = a.rows();
  return a.tape()->record(std::move(out), {a}, [ia, n, rows = std::move(rows)](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    Tensor<Scalar> ga = Tensor<Scalar>::Zero(n, g.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) ga.row(rows[k]) += g.row(static_cast<Eigen::Index>(k));
    t.accumulate(ia, ga);
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  const int ia = a.index();
  return a.tape()->record(a.value().cwiseMax(Scalar(0)), {a}, [ia](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(ia, (t.value(ia).array() > Scalar(0)).select(g.array(), Scalar(0)).matrix());
  });
}

template <typename Scalar>
Var<Scalar> exp(const Var<Scalar>& a) {
  const int ia = a.index();
  Tensor<Scalar> out = a.value().array().exp().matrix();
  const int io = static_cast<int>(a.tape()->size());
  return a.tape()->record(std::move(out), {a}, [ia, io](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(ia, g.cwiseProduct(t.value(io)));
  });
}

template <typename Scalar>
Var<Scalar> log(const Var<Scalar>& a) {
  if ((a.value().array() <= Scalar(0)).any()) throw std::domain_error("log: non-positive input");
  const int ia = a.index();
  return a.tape()->record(a.value().array().log().matrix(), {a}, [ia](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(ia, g.cwiseQuotient(t.value(ia)));
  });
}

/// Softmax along each row (max-shifted).
template <typename Scalar>
Var<Scalar> softmax_rows(const Var<Scalar>& a) {
  Tensor<Scalar> out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    out.row(r).array() -= out.row(r).maxCoeff();
    out.row(r) = out.row(r).array().exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  const int ia = a.index();
  const int io = static_cast<int>(a.tape()->size());
  return a.tape()->record(std::move(out), {a}, [ia, io](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    const Tensor<Scalar>& y = t.value(io);
    Tensor<Scalar> ga = y.cwiseProduct(g);
    for (Eigen::Index r = 0; r < y.rows(); ++r) ga.row(r) -= y.row(r) * ga.row(r).sum();
    t.accumulate(ia, ga);
  });
}

/// Log-softmax along each row.
template <typename Scalar>
Var<Scalar> log_softmax_rows(const Var<Scalar>& a) {
  Tensor<Scalar> out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const Scalar m = out.row(r).maxCoeff();
    const Scalar lse = m + std::log((out.row(r).array() - m).exp().sum());
    out.row(r).array() -= lse;
  }
  const int ia = a.index();
  const int io = static_cast<int>(a.tape()->size());
  return a.tape()->record(std::move(out), {a}, [ia, io](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    const Tensor<Scalar> p = t.value(io).array().exp().matrix();
    Tensor<Scalar> ga = g;
    for (Eigen::Index r = 0; r < g.rows(); ++r) ga.row(r) -= p.row(r) * g.row(r).sum();
    t.accumulate(ia, ga);
  });
}

/// Column-wise sum: [r x c] -> [1 x c].
template <typename Scalar>
Var<Scalar> sum_rows(const Var<Scalar>& a) {
  const int ia = a.index();
  const Eigen::Index n = a.rows();
  Tensor<Scalar> out = Tensor<Scalar>::Zero(1, a.cols());
  for (Eigen::Index r = 0; r < n; ++r) out.row(0) += a.value().row(r);
  return a.tape()->record(std::move(out), {a}, [ia, n](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(ia, g.replicate(n, 1));
  });
}

/// Sum of all entries: -> [1 x 1]. Row-major order.
template <typename Scalar>
Var<Scalar> sum_all(const Var<Scalar>& a) {
  const int ia = a.index();
  Scalar s = 0;
  const auto& v = a.value();
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v.data()[i];
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape()->record(Tensor<Scalar>::Constant(1, 1, s), {a}, [ia, r, c](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(ia, Tensor<Scalar>::Constant(r, c, g(0, 0)));
  });
}

template <typename Scalar>
Var<Scalar> mean_all(const Var<Scalar>& a) {
  return scale(sum_all(a), Scalar(1) / static_cast<Scalar>(a.value().size()));
}

/// Mean squared error against a constant target: -> [1 x 1].
template <typename Scalar>
Var<Scalar> mse(const Var<Scalar>& a, const Tensor<Scalar>& target) {
  if (a.rows() != target.rows() || a.cols() != target.cols()) detail::shape_error("mse", a.value(), target);
  const Tensor<Scalar> diff = a.value() - target;
  Scalar s = 0;
  for (Eigen::Index i = 0; i < diff.size(); ++i) s += diff.data()[i] * diff.data()[i];
  const Scalar n = static_cast<Scalar>(diff.size());
  const int ia = a.index();
  return a.tape()->record(Tensor<Scalar>::Constant(1, 1, s / n), {a},
                          [ia, diff, n](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            t.accumulate(ia, diff * (Scalar(2) * g(0, 0) / n));
                          });
}

/// Clamp into [lo, hi]; the gradient is zero where the bound is active.
template <typename Scalar>
Var<Scalar> clamp(const Var<Scalar>& a, Scalar lo, Scalar hi) {
  const int ia = a.index();
  Tensor<Scalar> out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape()->record(std::move(out), {a}, [ia, lo, hi](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    const auto& x = t.value(ia).array();
    t.accumulate(ia, ((x >= lo) && (x <= hi)).select(g.array(), Scalar(0)).matrix());
  });
}

/// Elementwise minimum; ties route the gradient to the first operand.
template <typename Scalar>
Var<Scalar> minimum(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("minimum", a, b);
  const int ia = a.index(), ib = b.index();
  Tensor<Scalar> out = a.value().cwiseMin(b.value());
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    const auto first = (t.value(ia).array() <= t.value(ib).array());
    if (t.requires_grad(ia)) t.accumulate(ia, first.select(g.array(), Scalar(0)).matrix());
    if (t.requires_grad(ib)) t.accumulate(ib, first.select(Scalar(0), g.array()).matrix());
  });
}

/// Single entry as [1 x 1].
template <typename Scalar>
Var<Scalar> pick(const Var<Scalar>& a, Eigen::Index r, Eigen::Index c) {
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) {
    throw std::invalid_argument("pick: (" + std::to_string(r) + "," + std::to_string(c) + ") out of range for " +
                                shape_string(a.value()));
  }
  const int ia = a.index();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return a.tape()->record(Tensor<Scalar>::Constant(1, 1, a.value()(r, c)), {a},
                          [ia, r, c, rows, cols](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            Tensor<Scalar> ga = Tensor<Scalar>::Zero(rows, cols);
                            ga(r, c) = g(0, 0);
                            t.accumulate(ia, ga);
                          });
}

/// Divides each row by max(||row||_2, eps).
template <typename Scalar>
Var<Scalar> normalize_rows(const Var<Scalar>& a, Scalar eps = Scalar(1e-12)) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> norms = a.value().rowwise().norm().cwiseMax(eps);
  Tensor<Scalar> out = norms.cwiseInverse().asDiagonal() * a.value();
  const int ia = a.index();
  const int io = static_cast<int>(a.tape()->size());
  return a.tape()->record(std::move(out), {a}, [ia, io, norms, eps](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    const Tensor<Scalar>& y = t.value(io);
    Tensor<Scalar> ga(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      if (norms(r) > eps) {
        ga.row(r) = (g.row(r) - y.row(r) * g.row(r).dot(y.row(r))) / norms(r);
      } else {
        ga.row(r) = g.row(r) / eps;
      }
    }
    t.accumulate(ia, ga);
  });
}

// ---------------------------------------------------------------------------

/// Compares reverse-mode gradients of a scalar function with central finite
/// differences over every entry of `params`. Returns the largest
/// |a - g| / max(1e-8, |a| + |g|).
///
/// `f` records the function on the tape it is handed and returns a [1x1] Var.
template <typename Scalar, typename F>
Scalar grad_check(F&& f, std::span<Parameter<Scalar>* const> params, Scalar h = Scalar(1e-5)) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<Scalar> tape;
    Var<Scalar> out = f(tape);
    if (out.rows() != 1 || out.cols() != 1) {
      throw std::invalid_argument("grad_check: function must be scalar, got " + shape_string(out.value()));
    }
    tape.backward(out);
  }
  auto eval = [&f]() {
    Tape<Scalar> tape;
    return f(tape).item();
  };
  Scalar worst = 0;
  for (auto* p : params) {
    const Tensor<Scalar> analytic = p->grad;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      Scalar& w = p->value.data()[i];
      const Scalar orig = w;
      w = orig + h;
      const Scalar fp = eval();
      w = orig - h;
      const Scalar fm = eval();
      w = orig;
      const Scalar numeric = (fp - fm) / (Scalar(2) * h);
      const Scalar a = analytic.data()[i];
      const Scalar err = std::abs(a - numeric) / std::max(Scalar(1e-8), std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

/// Adam with bias correction.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(Scalar lr, Scalar beta1 = Scalar(0.9), Scalar beta2 = Scalar(0.999), Scalar eps = Scalar(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Applies one update from each parameter's grad. The parameter set must be
  /// the same (same order and shapes) on every call.
  void step(std::span<Parameter<Scalar>* const> params) {
    if (first_.empty()) {
      for (auto* p : params) {
        first_.push_back(Tensor<Scalar>::Zero(p->value.rows(), p->value.cols()));
        second_.push_back(Tensor<Scalar>::Zero(p->value.rows(), p->value.cols()));
      }
    }
    if (params.size() != first_.size()) throw std::invalid_argument("adam: parameter count changed between steps");
    ++steps_;
    const Scalar c1 = Scalar(1) - std::pow(beta1_, static_cast<Scalar>(steps_));
    const Scalar c2 = Scalar(1) - std::pow(beta2_, static_cast<Scalar>(steps_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter<Scalar>& p = *params[k];
      Tensor<Scalar>& m = first_[k];
      Tensor<Scalar>& v = second_[k];
      if (p.grad.rows() != m.rows() || p.grad.cols() != m.cols() || p.value.rows() != m.rows() ||
          p.value.cols() != m.cols()) {
        throw std::invalid_argument("adam: shape mismatch for '" + p.name + "' " + shape_string(p.grad) + " vs " +
                                    shape_string(m));
      }
      m = beta1_ * m + (Scalar(1) - beta1_) * p.grad;
      v = beta2_ * v + (Scalar(1) - beta2_) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    }
  }

  Scalar learning_rate() const { return lr_; }
  void set_learning_rate(Scalar lr) { lr_ = lr; }
  long steps() const { return steps_; }
  const std::vector<Tensor<Scalar>>& first_moments() const { return first_; }
  const std::vector<Tensor<Scalar>>& second_moments() const { return second_; }

 private:
  Scalar lr_, beta1_, beta2_, eps_;
  long steps_ = 0;
  std::vector<Tensor<Scalar>> first_;
  std::vector<Tensor<Scalar>> second_;
};

}  // namespace mdr::ad

#endif  // MDR_AUTODIFF_HPP_
