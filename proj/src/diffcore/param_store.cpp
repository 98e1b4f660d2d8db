#include "aurecon/diffcore/param_store.hpp"

#include <algorithm>

#include "aurecon/common/error.hpp"

namespace aurecon::diff {

Tensor ParamStore::add(std::string name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter name '" + name + "'");
  if (!value.defined()) throw Error("parameter '" + name + "' is undefined");
  if (!value.is_leaf()) throw Error("parameter '" + name + "' must be a leaf tensor");
  value.set_requires_grad(true);
  entries_.push_back({std::move(name), std::move(value), {}});
  return entries_.back().value;
}

bool ParamStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const ParamEntry& e) { return e.name == name; });
}

ParamEntry& ParamStore::entry(const std::string& name) {
  for (auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw Error("no parameter named '" + name + "'");
}

const ParamEntry& ParamStore::entry(const std::string& name) const {
  return const_cast<ParamStore*>(this)->entry(name);
}

const Tensor& ParamStore::at(const std::string& name) const { return entry(name).value; }
Tensor& ParamStore::at(const std::string& name) { return entry(name).value; }

std::size_t ParamStore::numel() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

void ParamStore::clear_grad() {
  for (auto& e : entries_) e.value.clear_grad();
}

void ParamStore::set_requires_grad(bool flag) {
  for (auto& e : entries_) e.value.set_requires_grad(flag);
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& e : entries_) {
    auto copy = out.add(e.name, e.value.clone());
    copy.set_requires_grad(e.value.requires_grad());
    out.entries_.back().state = e.state;
  }
  return out;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.size() != size()) {
    throw ShapeError("parameter count mismatch: " + std::to_string(size()) + " vs " +
                     std::to_string(other.size()));
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& src = other.entries_[i];
    auto& dst = entries_[i];
    if (src.value.shape() != dst.value.shape()) {
      throw ShapeError("parameter '" + dst.name + "' has shape " + shape_str(dst.value.shape()) +
                       " but source '" + src.name + "' has " + shape_str(src.value.shape()));
    }
    std::copy(src.value.data().begin(), src.value.data().end(), dst.value.mutable_data().begin());
  }
}

}  // namespace aurecon::diff
