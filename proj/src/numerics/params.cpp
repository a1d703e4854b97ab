#include "fmim/numerics/params.hpp"

#include <algorithm>
#include <cmath>

namespace fmim {

template <typename T>
void ModelParams<T>::add(std::string name, Tensor<T> tensor, bool decay) {
  require(!contains(name), "ModelParams: duplicate parameter name " + name);
  entries_.push_back({std::move(name), std::move(tensor), decay});
}

template <typename T>
bool ModelParams<T>::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.name == name; });
}

template <typename T>
const Tensor<T>& ModelParams<T>::get(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw ContractViolation("ModelParams: unknown parameter " + std::string(name));
}

template <typename T>
Tensor<T>& ModelParams<T>::get(std::string_view name) {
  for (auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw ContractViolation("ModelParams: unknown parameter " + std::string(name));
}

template <typename T>
std::size_t ModelParams<T>::total_numel() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

template <typename T>
ModelParams<T> ModelParams<T>::subset(const std::vector<std::string>& prefixes) const {
  ModelParams out;
  for (const auto& e : entries_) {
    const bool keep = std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) {
      return e.name.compare(0, p.size(), p) == 0;
    });
    if (keep) out.entries_.push_back(e);
  }
  return out;
}

template <typename T>
ModelParams<T> ModelParams<T>::clone() const {
  ModelParams out;
  out.entries_.reserve(entries_.size());
  for (const auto& e : entries_) out.entries_.push_back({e.name, e.tensor.clone(), e.decay});
  return out;
}

template <typename T>
void ModelParams<T>::assign_values(const ModelParams& other) {
  require(same_layout(other), "ModelParams::assign_values: layouts differ");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto src = other.entries_[i].tensor.data();
    auto dst = entries_[i].tensor.mutable_data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

template <typename T>
void ModelParams<T>::merge(const ModelParams& other) {
  for (const auto& e : other.entries_) {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const Entry& mine) { return mine.name == e.name; });
    if (it == entries_.end())
      entries_.push_back({e.name, e.tensor.clone(), e.decay});
    else
      *it = {e.name, e.tensor.clone(), e.decay};
  }
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename T>
bool ModelParams<T>::all_finite() const {
  for (const auto& e : entries_)
    for (const auto v : e.tensor.data())
      if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
bool ModelParams<T>::same_layout(const ModelParams& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name) return false;
    if (entries_[i].tensor.shape() != other.entries_[i].tensor.shape()) return false;
  }
  return true;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  for (const auto& e : entries_) {
    std::vector<U> values(e.tensor.data().begin(), e.tensor.data().end());
    auto t = e.tensor.requires_grad() ? Tensor<U>::parameter(e.tensor.shape(), std::move(values))
                                      : Tensor<U>::constant(e.tensor.shape(), std::move(values));
    out.add(e.name, std::move(t), e.decay);
  }
  return out;
}

template class ModelParams<float>;
template class ModelParams<double>;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

}  // namespace fmim
