#include "fmim/numerics/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

namespace fmim {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (const auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T> Tensor<T>::constant(Shape shape, std::vector<T> data) {
  require(shape_numel(shape) == data.size(),
          "Tensor: data length " + std::to_string(data.size()) + " does not match shape " +
              shape_string(shape));
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::parameter(Shape shape, std::vector<T> data) {
  auto t = constant(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  auto t = constant(std::move(shape), std::vector<T>(n, T(0)));
  t.node_->requires_grad = requires_grad;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T v, bool requires_grad) {
  auto t = constant({}, {v});
  t.node_->requires_grad = requires_grad;
  return t;
}

template <typename T>
T Tensor<T>::item() const {
  require(numel() == 1, "Tensor::item: tensor is not a scalar");
  return node_->value[0];
}

template <typename T>
void Tensor<T>::zero_grad() {
  node_->grad.assign(node_->value.size(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return constant(node_->shape, node_->value);
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  auto t = constant(node_->shape, node_->value);
  t.node_->requires_grad = node_->requires_grad;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::from_op(Shape shape, std::vector<T> value, std::vector<Tensor> inputs,
                             std::function<void(detail::Node<T>&)> backward_fn) {
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node_);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

template <typename T>
void backward(const Tensor<T>& loss) {
  require(loss.defined() && loss.numel() == 1 && loss.rank() == 0,
          "backward: loss must be a scalar tensor");
  using NodeT = detail::Node<T>;

  // Iterative post-order DFS over nodes that require grad; a node seen again
  // while still on the stack means the graph has a cycle.
  enum class Mark { in_progress, done };
  std::unordered_map<const NodeT*, Mark> marks;
  std::vector<NodeT*> order;
  std::vector<std::pair<NodeT*, std::size_t>> stack;
  NodeT* root = loss.node_ptr().get();
  if (!root->requires_grad) return;
  stack.emplace_back(root, 0);
  marks[root] = Mark::in_progress;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      NodeT* child = node->inputs[next++].get();
      if (!child->requires_grad) continue;
      auto it = marks.find(child);
      if (it == marks.end()) {
        marks.emplace(child, Mark::in_progress);
        stack.emplace_back(child, 0);
      } else if (it->second == Mark::in_progress) {
        throw InternalError("backward: computation graph contains a cycle");
      }
    } else {
      marks[node] = Mark::done;
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients start from zero on every call; leaves accumulate.
  for (NodeT* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), T(0));
  }
  root->ensure_grad();
  root->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* n = *it;
    if (n->is_leaf() || !n->backward_fn) continue;
    for (auto& in : n->inputs) {
      if (in->requires_grad) in->ensure_grad();
    }
    n->backward_fn(*n);
  }
  for (NodeT* n : order) {
    if (!n->is_leaf()) std::vector<T>().swap(n->grad);
  }
}

template class Tensor<float>;
template class Tensor<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace fmim
