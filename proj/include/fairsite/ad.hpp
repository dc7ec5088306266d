#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <vector>

namespace fairsite::ad {

using Mat = Eigen::MatrixXd;

// Reverse-mode tape over dense matrices. Nodes are identified by index;
// a node's gradient has the same shape as its value. One tape serves one
// forward pass; backward() accumulates into leaf gradients which callers
// read before the tape is discarded.
class Tape {
 public:
  int leaf(Mat value) { return push(std::move(value), nullptr); }

  const Mat& value(int id) const { return nodes_[check(id)].value; }
  const Mat& grad(int id) const { return nodes_[check(id)].grad; }

  int matmul(int a, int b);
  int add(int a, int b);
  int sub(int a, int b);
  int scale(int a, double s);
  // Adds a 1 x n row vector to every row of a.
  int add_rowvec(int a, int row);
  int cmul(int a, int b);  // elementwise
  int relu(int a);
  int tanh(int a);
  int sigmoid(int a);
  int concat_cols(const std::vector<int>& parts);
  int concat_rows(const std::vector<int>& parts);
  int slice_cols(int a, int first, int count);
  int slice_rows(int a, int first, int count);
  int transpose(int a);
  // Row-wise softmax restricted to `present` columns; absent columns get
  // weight exactly 0 and receive no gradient. `present` is per column,
  // shared across rows.
  int masked_softmax_rows(int a, const std::vector<bool>& present);
  // Row-wise layer normalization with learned gain/bias (1 x n each).
  int layer_norm_rows(int a, int gain, int bias, double eps = 1e-5);
  int sum(int a);  // 1x1

  // Seeds node `id` with `seed` (same shape) and runs reverse sweep.
  void backward(int id, const Mat& seed);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&, const Node&)> backprop;
  };

  int push(Mat value, std::function<void(Tape&, const Node&)> backprop) {
    Node n;
    n.grad = Mat::Zero(value.rows(), value.cols());
    n.value = std::move(value);
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int check(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
      throw std::out_of_range("Tape: bad node id");
    return id;
  }

  Mat& grad_mut(int id) { return nodes_[check(id)].grad; }

  std::vector<Node> nodes_;
};

}  // namespace fairsite::ad
