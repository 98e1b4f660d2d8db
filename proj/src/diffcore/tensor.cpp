#include "aurecon/diffcore/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "aurecon/common/error.hpp"

namespace aurecon::diff {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace detail {

std::vector<double>& TensorImpl::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

}  // namespace detail

namespace {

std::shared_ptr<detail::TensorImpl> make_impl(Shape shape, std::vector<double> values) {
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor of shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return impl;
}

const detail::TensorImpl& checked(const std::shared_ptr<detail::TensorImpl>& impl) {
  if (!impl) throw Error("use of an undefined tensor");
  return *impl;
}

}  // namespace

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  return Tensor(make_impl(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Shape& Tensor::shape() const { return checked(impl_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(impl_).data.size(); }

std::span<const double> Tensor::data() const { return checked(impl_).data; }

std::span<double> Tensor::mutable_data() {
  checked(impl_);
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  checked(impl_);
  if (impl_->node) throw Error("requires_grad can only be changed on leaf tensors");
  impl_->requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const { return !checked(impl_).grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw Error("tensor has no gradient buffer");
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!has_grad()) throw Error("tensor has no gradient buffer");
  return impl_->grad;
}

void Tensor::zero_grad() {
  checked(impl_);
  impl_->grad.assign(impl_->data.size(), 0.0);
}

void Tensor::clear_grad() {
  checked(impl_);
  impl_->grad.clear();
  impl_->grad.shrink_to_fit();
}

Tensor Tensor::detach() const {
  const auto& src = checked(impl_);
  return Tensor(make_impl(src.shape, src.data));
}

Tensor Tensor::clone() const {
  const auto& src = checked(impl_);
  auto impl = make_impl(src.shape, src.data);
  impl->requires_grad = src.requires_grad && !src.node;
  return Tensor(std::move(impl));
}

bool Tensor::is_leaf() const { return !checked(impl_).node; }

void Tensor::backward() {
  checked(impl_);
  if (impl_->data.size() != 1) {
    throw ShapeError("backward() needs a single-element loss, got shape " + shape_str(impl_->shape));
  }
  if (!std::isfinite(impl_->data[0])) throw NonFiniteError("backward() on a non-finite loss");
  if (!impl_->requires_grad) {
    throw Error("backward() on a tensor that does not depend on any parameter");
  }
  if (!impl_->node) {
    impl_->ensure_grad()[0] += 1.0;
    return;
  }

  // Post-order DFS gives inputs before outputs.
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> seen;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [cur, next] = stack.back();
    if (cur->node->consumed) {
      throw Error("graph through '" + cur->node->op_name +
                  "' was already used by a previous backward(); re-run the forward pass");
    }
    if (next < cur->node->inputs.size()) {
      auto* child = cur->node->inputs[next++].get();
      if (child->node && child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(cur);
    stack.pop_back();
  }

  for (auto* t : order) t->ensure_grad();
  impl_->grad[0] = 1.0;

  std::vector<detail::TensorImpl*> leaves;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* t = *it;
    t->node->backward(*t);
    for (auto& in : t->node->inputs) {
      if (!in->node && in->requires_grad) leaves.push_back(in.get());
    }
  }

  for (auto* t : order) {
    t->node->consumed = true;
    t->node->backward = nullptr;
    t->node->inputs.clear();
    t->grad.clear();
    t->grad.shrink_to_fit();
  }

  for (auto* leaf : leaves) {
    for (double g : leaf->grad) {
      if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient reached a leaf tensor");
    }
  }
}

}  // namespace aurecon::diff
