#include "dvit/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace dvit {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(Shape s, bool requires_grad) {
  return full(std::move(s), 0.0, requires_grad);
}

Tensor Tensor::full(Shape s, double v, bool requires_grad) {
  auto n = std::make_shared<TensorNode>();
  int64_t count = shape_numel(s);
  n->shape = std::move(s);
  n->value.assign(static_cast<size_t>(count), v);
  n->requires_grad = requires_grad;
  n->needs_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(Shape s, std::vector<double> data,
                         bool requires_grad) {
  if (shape_numel(s) != static_cast<int64_t>(data.size()))
    throw DimensionError("from_data: shape " + shape_str(s) + " needs " +
                         std::to_string(shape_numel(s)) + " values, got " +
                         std::to_string(data.size()));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(s);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  n->needs_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({}, {v}, requires_grad);
}

Tensor Tensor::make_op(Shape s, std::vector<double> value,
                       std::vector<Tensor> parents,
                       std::function<void(TensorNode&)> backward_fn) {
  if (shape_numel(s) != static_cast<int64_t>(value.size()))
    throw DimensionError("make_op: shape/value size mismatch");
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(s);
  n->value = std::move(value);
  bool track = false;
  for (const auto& p : parents) track = track || p.needs_grad();
  if (track) {
    n->needs_grad = true;
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

int64_t Tensor::size(int64_t axis) const {
  if (axis < 0) axis += dim();
  if (axis < 0 || axis >= dim())
    throw DimensionError("size: axis out of range for " + shape_str(shape()));
  return n_->shape[static_cast<size_t>(axis)];
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item: tensor is not scalar");
  return n_->value[0];
}

double Tensor::at(const std::vector<int64_t>& idx) const {
  if (idx.size() != n_->shape.size())
    throw DimensionError("at: index rank mismatch");
  int64_t flat = 0;
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= n_->shape[i])
      throw DimensionError("at: index out of range");
    flat = flat * n_->shape[i] + idx[i];
  }
  return n_->value[static_cast<size_t>(flat)];
}

std::vector<double>& Tensor::grad() {
  n_->ensure_grad();
  return n_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (n_->grad.empty())
    throw ContractError("grad: no gradient has been computed");
  return n_->grad;
}

void Tensor::zero_grad() {
  if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
}

void Tensor::backward() const {
  if (numel() != 1)
    throw ContractError("backward: root must be scalar, got " +
                        shape_str(shape()));
  if (!n_->needs_grad) return;

  // Iterative post-order DFS for a topological order.
  std::vector<TensorNode*> topo;
  std::unordered_set<TensorNode*> visited;
  struct Frame {
    TensorNode* node;
    size_t next_parent;
  };
  std::vector<Frame> stack{{n_.get(), 0}};
  visited.insert(n_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorNode* p = f.node->parents[f.next_parent++].get();
      if (p->needs_grad && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  // Interior grads restart at zero each sweep; leaf grads accumulate.
  for (TensorNode* t : topo) {
    if (!t->is_leaf()) t->grad.assign(t->value.size(), 0.0);
    else t->ensure_grad();
  }
  n_->grad[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorNode* t = *it;
    if (t->backward_fn) {
      for (auto& p : t->parents)
        if (p->needs_grad) p->ensure_grad();
      t->backward_fn(*t);
    }
  }
}

}  // namespace dvit
