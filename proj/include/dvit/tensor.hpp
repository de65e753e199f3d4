#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace dvit {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until backward touches this node
  bool requires_grad = false;  // leaf flag
  bool needs_grad = false;     // requires_grad or depends on such a leaf
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  bool is_leaf() const { return parents.empty(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

// Value-semantics handle over a shared autograd node. Values are immutable
// after creation except for gradient accumulation; a graph belongs to one
// thread of execution.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape s, bool requires_grad = false);
  static Tensor full(Shape s, double v, bool requires_grad = false);
  static Tensor from_data(Shape s, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  // Result node for an op: keeps lineage only when some parent needs grad.
  static Tensor make_op(Shape s, std::vector<double> value,
                        std::vector<Tensor> parents,
                        std::function<void(TensorNode&)> backward_fn);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int64_t dim() const { return static_cast<int64_t>(n_->shape.size()); }
  int64_t numel() const { return static_cast<int64_t>(n_->value.size()); }
  int64_t size(int64_t axis) const;

  std::vector<double>& data() { return n_->value; }
  const std::vector<double>& data() const { return n_->value; }
  double* ptr() { return n_->value.data(); }
  const double* ptr() const { return n_->value.data(); }

  double item() const;
  double at(const std::vector<int64_t>& idx) const;

  bool requires_grad() const { return n_->requires_grad; }
  bool needs_grad() const { return n_->needs_grad; }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool has_grad() const { return !n_->grad.empty(); }
  void zero_grad();

  // Reverse-mode sweep from a scalar root. Leaf grads accumulate across
  // calls; interior grads are reset per call.
  void backward() const;

  std::shared_ptr<TensorNode> node() const { return n_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : n_(std::move(n)) {}
  std::shared_ptr<TensorNode> n_;
};

}  // namespace dvit
