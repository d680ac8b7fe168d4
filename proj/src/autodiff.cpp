/* Copyright 2026 The condadapt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "condadapt/autodiff.hpp"

#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace condadapt {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename Scalar>
void Var<Scalar>::backward() const {
  if (!requires_grad()) throw std::logic_error("backward() on a value that does not require grad");

  // Iterative post-order DFS gives a topological order (parents first).
  // Owning handles: clearing a node's closure below may drop the last
  // other reference to its parents.
  std::vector<std::shared_ptr<Node<Scalar>>> order;
  std::unordered_set<Node<Scalar>*> visited;
  std::vector<std::pair<std::shared_ptr<Node<Scalar>>, std::size_t>> stack;
  stack.emplace_back(node_, 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      auto parent = node->parents[next++];
      if (parent->requires_grad && visited.insert(parent.get()).second)
        stack.emplace_back(std::move(parent), 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer().array() += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar>* node = it->get();
    if (!node->backward) continue;
    if (!node->grad.empty()) node->backward(node->grad);
    node->backward = nullptr;
    node->parents.clear();
    node->grad = Tensor<Scalar>();
  }
}

template class Var<float>;
template class Var<double>;

}  // namespace condadapt
