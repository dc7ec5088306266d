#include "fairsite/ad.hpp"

#include <cmath>

namespace fairsite::ad {

int Tape::matmul(int a, int b) {
  Mat out = value(a) * value(b);
  return push(std::move(out), [a, b](Tape& t, const Node& self) {
    t.grad_mut(a) += self.grad * t.value(b).transpose();
    t.grad_mut(b) += t.value(a).transpose() * self.grad;
  });
}

int Tape::add(int a, int b) {
  Mat out = value(a) + value(b);
  return push(std::move(out), [a, b](Tape& t, const Node& self) {
    t.grad_mut(a) += self.grad;
    t.grad_mut(b) += self.grad;
  });
}

int Tape::sub(int a, int b) {
  Mat out = value(a) - value(b);
  return push(std::move(out), [a, b](Tape& t, const Node& self) {
    t.grad_mut(a) += self.grad;
    t.grad_mut(b) -= self.grad;
  });
}

int Tape::scale(int a, double s) {
  Mat out = value(a) * s;
  return push(std::move(out), [a, s](Tape& t, const Node& self) {
    t.grad_mut(a) += self.grad * s;
  });
}

int Tape::add_rowvec(int a, int row) {
  Mat out = value(a);
  out.rowwise() += value(row).row(0);
  return push(std::move(out), [a, row](Tape& t, const Node& self) {
    t.grad_mut(a) += self.grad;
    t.grad_mut(row).row(0) += self.grad.colwise().sum();
  });
}

int Tape::cmul(int a, int b) {
  Mat out = value(a).cwiseProduct(value(b));
  return push(std::move(out), [a, b](Tape& t, const Node& self) {
    t.grad_mut(a) += self.grad.cwiseProduct(t.value(b));
    t.grad_mut(b) += self.grad.cwiseProduct(t.value(a));
  });
}

int Tape::relu(int a) {
  Mat out = value(a).cwiseMax(0.0);
  return push(std::move(out), [a](Tape& t, const Node& self) {
    t.grad_mut(a) +=
        self.grad.cwiseProduct((t.value(a).array() > 0.0).cast<double>().matrix());
  });
}

int Tape::tanh(int a) {
  Mat out = value(a).array().tanh().matrix();
  return push(std::move(out), [a](Tape& t, const Node& self) {
    t.grad_mut(a) +=
        self.grad.cwiseProduct((1.0 - self.value.array().square()).matrix());
  });
}

int Tape::sigmoid(int a) {
  Mat out = (1.0 / (1.0 + (-value(a)).array().exp())).matrix();
  return push(std::move(out), [a](Tape& t, const Node& self) {
    t.grad_mut(a) += self.grad.cwiseProduct(
        (self.value.array() * (1.0 - self.value.array())).matrix());
  });
}

int Tape::concat_cols(const std::vector<int>& parts) {
  Eigen::Index rows = value(parts.front()).rows();
  Eigen::Index cols = 0;
  for (int p : parts) cols += value(p).cols();
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (int p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  return push(std::move(out), [parts](Tape& t, const Node& self) {
    Eigen::Index at = 0;
    for (int p : parts) {
      const Eigen::Index w = t.value(p).cols();
      t.grad_mut(p) += self.grad.middleCols(at, w);
      at += w;
    }
  });
}

int Tape::concat_rows(const std::vector<int>& parts) {
  Eigen::Index cols = value(parts.front()).cols();
  Eigen::Index rows = 0;
  for (int p : parts) rows += value(p).rows();
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (int p : parts) {
    out.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  return push(std::move(out), [parts](Tape& t, const Node& self) {
    Eigen::Index at = 0;
    for (int p : parts) {
      const Eigen::Index h = t.value(p).rows();
      t.grad_mut(p) += self.grad.middleRows(at, h);
      at += h;
    }
  });
}

int Tape::slice_cols(int a, int first, int count) {
  Mat out = value(a).middleCols(first, count);
  return push(std::move(out), [a, first, count](Tape& t, const Node& self) {
    t.grad_mut(a).middleCols(first, count) += self.grad;
  });
}

int Tape::slice_rows(int a, int first, int count) {
  Mat out = value(a).middleRows(first, count);
  return push(std::move(out), [a, first, count](Tape& t, const Node& self) {
    t.grad_mut(a).middleRows(first, count) += self.grad;
  });
}

int Tape::transpose(int a) {
  Mat out = value(a).transpose();
  return push(std::move(out), [a](Tape& t, const Node& self) {
    t.grad_mut(a) += self.grad.transpose();
  });
}

int Tape::masked_softmax_rows(int a, const std::vector<bool>& present) {
  const Mat& x = value(a);
  Mat out = Mat::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (present[static_cast<std::size_t>(c)]) mx = std::max(mx, x(r, c));
    double z = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (!present[static_cast<std::size_t>(c)]) continue;
      out(r, c) = std::exp(x(r, c) - mx);
      z += out(r, c);
    }
    for (Eigen::Index c = 0; c < x.cols(); ++c) out(r, c) /= z;
  }
  return push(std::move(out), [a, present](Tape& t, const Node& self) {
    const Mat& p = self.value;
    const Mat& g = self.grad;
    Mat& da = t.grad_mut(a);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      double dot = 0.0;
      for (Eigen::Index c = 0; c < p.cols(); ++c) dot += g(r, c) * p(r, c);
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        if (!present[static_cast<std::size_t>(c)]) continue;
        da(r, c) += p(r, c) * (g(r, c) - dot);
      }
    }
  });
}

int Tape::layer_norm_rows(int a, int gain, int bias, double eps) {
  const Mat& x = value(a);
  const Eigen::Index n = x.cols();
  Mat xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mean) * inv_std[r];
  }
  Mat out = xhat.array().rowwise() * value(gain).row(0).array();
  out.rowwise() += value(bias).row(0);
  return push(std::move(out),
              [a, gain, bias, xhat, inv_std](Tape& t, const Node& self) {
                const Mat& g = self.grad;
                const Eigen::Index n = xhat.cols();
                const Mat& w = t.value(gain);
                for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                  // d/dxhat = g * gain; project out mean and xhat components.
                  Eigen::RowVectorXd dxhat =
                      g.row(r).cwiseProduct(w.row(0));
                  const double m1 = dxhat.mean();
                  const double m2 =
                      dxhat.cwiseProduct(xhat.row(r)).mean();
                  t.grad_mut(a).row(r) +=
                      inv_std[r] *
                      (dxhat.array() - m1 - xhat.row(r).array() * m2).matrix();
                  t.grad_mut(gain).row(0) += g.row(r).cwiseProduct(xhat.row(r));
                  t.grad_mut(bias).row(0) += g.row(r);
                }
                (void)n;
              });
}

int Tape::sum(int a) {
  Mat out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), [a](Tape& t, const Node& self) {
    t.grad_mut(a).array() += self.grad(0, 0);
  });
}

void Tape::backward(int id, const Mat& seed) {
  check(id);
  if (seed.rows() != nodes_[id].value.rows() ||
      seed.cols() != nodes_[id].value.cols())
    throw std::invalid_argument("Tape::backward: seed shape mismatch");
  nodes_[id].grad = seed;
  for (int i = id; i >= 0; --i) {
    if (nodes_[i].backprop && nodes_[i].grad.cwiseAbs().sum() != 0.0)
      nodes_[i].backprop(*this, nodes_[i]);
  }
}

}  // namespace fairsite::ad
