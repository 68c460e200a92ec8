#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vvs::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the reverse-mode tape. Children own their parents through
// `parents`, so the graph is freed once the last handle to the root goes away.
struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;  // empty until something flows back
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::vector<float>& ensure_grad();
};

}  // namespace detail

// Dense row-major float32 tensor with an optional autodiff history.
//
// Tensor is a cheap handle: copies share the same storage and history. Use
// clone() for a deep, detached copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const float> data() const;
  // Writable view; only meaningful on leaves (parameters, constants).
  std::span<float> mutable_data();
  std::span<const float> grad() const;  // empty when no gradient was recorded
  std::span<float> mutable_grad();
  void zero_grad();

  float item() const;
  float at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  // Runs reverse-mode accumulation from this scalar.
  void backward() const;

  Tensor detach() const;
  Tensor clone() const;

  // Internal: used by op implementations.
  static Tensor make_result(Shape shape, std::vector<float> values,
                            std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward_fn);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Trainable tensor plus its name; the gradient lives on the tensor's node.
struct Parameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<Parameter*>;

// Raises vvs::Error naming `where` when any value is NaN/Inf.
void check_finite(const Tensor& t, const std::string& where);

}  // namespace vvs::nn
