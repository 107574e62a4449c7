#pragma once

// One-hidden-layer tanh network with a sigmoid output, trained by full-batch
// gradient descent with momentum on the mean cross-entropy. Inputs are
// standardized with the training-pool mean and standard deviation.

#include <cmath>
#include <limits>

#include "mhc/rand.hpp"
#include "mhc/types.hpp"

namespace mhc {

struct NeuralNetOptions {
  std::size_t hidden = 50;
  std::size_t epochs = 500;
  double learning_rate = 0.01;
  double momentum = 0.9;
};

struct NeuralNetModel {
  Matrix W1;  // hidden x p
  Vector b1;
  Vector w2;
  double b2 = 0.0;
  Vector in_mean, in_scale;
  double initial_loss = 0.0;
  double final_loss = 0.0;

  template <class Row>
  double output(const Row& x) const {
    const Vector z = (x.transpose() - in_mean).cwiseQuotient(in_scale);
    const Vector h = (W1 * z + b1).array().tanh().matrix();
    return h.dot(w2) + b2;
  }
};

namespace detail {

inline double nn_loss(const Vector& o, const Vector& y) {
  double l = 0.0;
  for (Eigen::Index i = 0; i < o.size(); ++i) {
    const double v = o(i);
    const double sp = v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    l += sp - y(i) * v;
  }
  return l / static_cast<double>(o.size());
}

}  // namespace detail

inline NeuralNetModel fit_neural_net(const Matrix& X, const Vector& y, const NeuralNetOptions& opt,
                                     RngStream& stream) {
  const Eigen::Index N = X.rows(), p = X.cols(), H = static_cast<Eigen::Index>(opt.hidden);
  NeuralNetModel net;
  net.in_mean = X.colwise().mean().transpose();
  net.in_scale.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double sd = std::sqrt((X.col(j).array() - net.in_mean(j)).square().mean());
    net.in_scale(j) = sd > 0 ? sd : 1.0;
  }
  const Matrix Z = (X.rowwise() - net.in_mean.transpose()).array().rowwise() / net.in_scale.transpose().array();

  net.W1.resize(H, p);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(p));
  for (Eigen::Index i = 0; i < H; ++i)
    for (Eigen::Index j = 0; j < p; ++j) net.W1(i, j) = s1 * std_normal(stream);
  net.b1 = Vector::Zero(H);
  net.w2.resize(H);
  const double s2 = 1.0 / std::sqrt(static_cast<double>(H));
  for (Eigen::Index i = 0; i < H; ++i) net.w2(i) = s2 * std_normal(stream);
  net.b2 = 0.0;

  Matrix vW1 = Matrix::Zero(H, p);
  Vector vb1 = Vector::Zero(H), vw2 = Vector::Zero(H);
  double vb2 = 0.0;

  auto forward = [&](Matrix& hidden) {
    hidden = ((Z * net.W1.transpose()).rowwise() + net.b1.transpose()).array().tanh().matrix();
    return Vector((hidden * net.w2).array() + net.b2);
  };

  Matrix Hm;
  Vector o = forward(Hm);
  net.initial_loss = detail::nn_loss(o, y);
  double best_loss = net.initial_loss;
  NeuralNetModel best = net;
  const double invN = 1.0 / static_cast<double>(N);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    Vector dout(N);
    for (Eigen::Index i = 0; i < N; ++i) {
      const double v = o(i);
      const double prob = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      dout(i) = (prob - y(i)) * invN;
    }
    const Vector gw2 = Hm.transpose() * dout;
    const double gb2 = dout.sum();
    const Matrix dH = ((dout * net.w2.transpose()).array() * (1.0 - Hm.array().square())).matrix();
    const Matrix gW1 = dH.transpose() * Z;
    const Vector gb1 = dH.colwise().sum().transpose();

    vW1 = opt.momentum * vW1 - opt.learning_rate * gW1;
    vb1 = opt.momentum * vb1 - opt.learning_rate * gb1;
    vw2 = opt.momentum * vw2 - opt.learning_rate * gw2;
    vb2 = opt.momentum * vb2 - opt.learning_rate * gb2;
    net.W1 += vW1;
    net.b1 += vb1;
    net.w2 += vw2;
    net.b2 += vb2;

    o = forward(Hm);
    const double loss = detail::nn_loss(o, y);
    if (loss < best_loss) {
      best_loss = loss;
      best.W1 = net.W1;
      best.b1 = net.b1;
      best.w2 = net.w2;
      best.b2 = net.b2;
    }
  }
  net.final_loss = detail::nn_loss(o, y);
  // Momentum can overshoot; never hand back something worse than the start.
  if (net.final_loss > net.initial_loss) {
    net.W1 = best.W1;
    net.b1 = best.b1;
    net.w2 = best.w2;
    net.b2 = best.b2;
    net.final_loss = best_loss;
  }
  return net;
}

}  // namespace mhc
