#pragma once

// Small hand-built networks with known closed forms.

#include "socicnn/model.hpp"

namespace fixtures {

using socicnn::Matrix;
using socicnn::Vector;

// One layer of `width` units that are off everywhere (zero weights, bias -1); the caller
// fills in what it needs.
inline socicnn::SocIcnnParams empty_net(Eigen::Index d0, Eigen::Index width = 1) {
  socicnn::SocIcnnParams p;
  p.input_dim = d0;
  p.layers.push_back({Matrix::Zero(width, d0), Matrix::Zero(width, 0), Vector::Constant(width, -1.0)});
  p.c = Vector::Zero(width);
  p.v = Vector::Zero(d0);
  return p;
}

// f(x) = (alpha/2) ||x||^2.
inline socicnn::SocIcnnParams quadratic_only(Eigen::Index d0, double alpha = 2.0) {
  auto p = empty_net(d0);
  p.quad.push_back({alpha, Matrix::Identity(d0, d0), Vector::Zero(d0)});
  return p;
}

// f(x) = lambda ||A x + d||.
inline socicnn::SocIcnnParams cone_only(const Matrix& A, const Vector& d, double lambda = 1.0) {
  auto p = empty_net(A.cols());
  p.cone.push_back({lambda, A, d});
  return p;
}

// f(x) = c . max(W x + b, 0) with a single layer.
inline socicnn::SocIcnnParams single_layer(const Matrix& W, const Vector& b, const Vector& c) {
  socicnn::SocIcnnParams p;
  p.input_dim = W.cols();
  p.layers.push_back({W, Matrix::Zero(W.rows(), 0), b});
  p.c = c;
  p.v = Vector::Zero(W.cols());
  return p;
}

inline socicnn::Architecture small_arch() {
  return socicnn::Architecture::uniform(4, 6, 3, 1, 3, 2, 3);
}

}  // namespace fixtures
