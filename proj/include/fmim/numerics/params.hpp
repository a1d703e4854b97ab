#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fmim/numerics/tensor.hpp"

namespace fmim {

/// Flat, named, ordered collection of learnable tensors. Order is insertion
/// order and defines serialization and aggregation order.
template <typename T>
class ModelParams {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool decay = true;  // subject to decoupled weight decay
  };

  void add(std::string name, Tensor<T> tensor, bool decay = true);

  bool contains(std::string_view name) const;
  const Tensor<T>& get(std::string_view name) const;
  Tensor<T>& get(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t total_numel() const;

  /// Entries whose name starts with any of the prefixes; tensors are shared.
  ModelParams subset(const std::vector<std::string>& prefixes) const;
  /// Deep copy with independent leaves.
  ModelParams clone() const;
  /// Copies values from other (same names, same shapes) into this collection.
  void assign_values(const ModelParams& other);
  /// Replaces or inserts every entry of other (deep copies).
  void merge(const ModelParams& other);

  void zero_grad();
  bool all_finite() const;
  bool same_layout(const ModelParams& other) const;

  template <typename U>
  ModelParams<U> cast() const;

 private:
  std::vector<Entry> entries_;
};

extern template class ModelParams<float>;
extern template class ModelParams<double>;

}  // namespace fmim
