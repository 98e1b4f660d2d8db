#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aurecon/diffcore/tensor.hpp"

namespace aurecon::diff {

/// Adam moment buffers and step counter for one parameter.
struct OptimState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

struct ParamEntry {
  std::string name;
  Tensor value;
  OptimState state;
};

/// Ordered, uniquely named collection of trainable tensors.
///
/// Copying is disabled because Tensor copies alias storage; clone() makes
/// an independent deep copy (values and optimizer state).
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  /// Registers a leaf tensor (marked requires_grad); throws on duplicate name.
  Tensor add(std::string name, Tensor value);

  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  ParamEntry& entry(const std::string& name);
  const ParamEntry& entry(const std::string& name) const;

  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t numel() const;

  void zero_grad();
  void clear_grad();
  void set_requires_grad(bool flag);

  ParamStore clone() const;
  /// Overwrites values (not optimizer state) from a structurally equal store.
  void copy_values_from(const ParamStore& other);

 private:
  std::vector<ParamEntry> entries_;
};

}  // namespace aurecon::diff
