#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aurecon::diff {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl;

// One recorded operation. `backward` reads the output's grad and accumulates
// into the grads of `inputs` that require it.
struct Node {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(const TensorImpl& out)> backward;
  std::string op_name;
  bool consumed = false;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty == no gradient buffer
  bool requires_grad = false;
  std::shared_ptr<Node> node;  // null for leaves and constants

  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Reference-counted handle to a dense row-major array of doubles.
///
/// Copies alias the same storage (as with a shared_ptr); use clone() for a
/// deep copy. Tensors that require a gradient record the operations applied
/// to them so that backward() can propagate derivatives to every reachable
/// leaf.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  /// Allocates (if needed) and zero-fills the gradient buffer.
  void zero_grad();
  /// Drops the gradient buffer entirely.
  void clear_grad();

  /// Leaf with copied values that does not take part in any graph.
  Tensor detach() const;
  /// Deep copy of values; the copy is a leaf with the same requires_grad flag.
  Tensor clone() const;

  /// Reverse-mode sweep from this single-element tensor.
  void backward();

  bool is_leaf() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  // Used by operation implementations.
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

}  // namespace aurecon::diff
