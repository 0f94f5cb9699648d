// Dense probability-vector kernels shared by the decision and simulation
// layers. Beliefs are column vectors; transition matrices are row-stochastic
// with rows indexing the current state.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace riskdesk::linalg {

template <typename Derived>
typename Derived::Scalar total(const Eigen::MatrixBase<Derived>& v) {
  return v.sum();
}

/// Scales `v` to unit mass. Returns false (leaving `v` untouched) on zero mass.
template <typename Derived>
bool normalize(Eigen::MatrixBase<Derived>& v) {
  const auto z = v.sum();
  if (!(z > typename Derived::Scalar(0))) return false;
  v /= z;
  return true;
}

/// b' = b^T T, returned as a column vector.
template <typename BeliefT, typename TransitionT>
Eigen::Matrix<typename BeliefT::Scalar, Eigen::Dynamic, 1> propagate(
    const Eigen::MatrixBase<BeliefT>& belief, const Eigen::MatrixBase<TransitionT>& transition) {
  return (belief.transpose() * transition).transpose();
}

/// Elementwise Bayes update b(h) * L(h, obs), unnormalized.
template <typename BeliefT, typename LikelihoodT>
Eigen::Matrix<typename BeliefT::Scalar, Eigen::Dynamic, 1> weigh(
    const Eigen::MatrixBase<BeliefT>& belief, const Eigen::MatrixBase<LikelihoodT>& likelihood,
    Eigen::Index obs) {
  return belief.cwiseProduct(likelihood.col(obs));
}

/// Kronecker product of per-component matrices, first component most
/// significant in the product index.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> kron_all(
    std::span<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> factors) {
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  M acc = M::Ones(1, 1);
  for (const auto& f : factors) {
    M next(acc.rows() * f.rows(), acc.cols() * f.cols());
    for (Eigen::Index i = 0; i < acc.rows(); ++i) {
      for (Eigen::Index j = 0; j < acc.cols(); ++j) {
        next.block(i * f.rows(), j * f.cols(), f.rows(), f.cols()) = acc(i, j) * f;
      }
    }
    acc = std::move(next);
  }
  return acc;
}

/// b^T (F_1 (x) ... (x) F_n) without materializing the product matrix: each
/// factor is applied along its own axis of the belief tensor.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> propagate_factored(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& belief,
    std::span<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> factors) {
  using V = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using ColMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  V cur = belief;
  V next(cur.size());
  Eigen::Index inner = cur.size();
  Eigen::Index outer = 1;
  for (const auto& f : factors) {
    const Eigen::Index card = f.rows();
    inner /= card;
    // Block o holds states (o, i, r) for axis card i and trailing index r;
    // seen column-major it is an inner x card matrix with entry (r, i).
    for (Eigen::Index o = 0; o < outer; ++o) {
      Eigen::Map<const ColMajor> in(cur.data() + o * card * inner, inner, card);
      Eigen::Map<ColMajor> out(next.data() + o * card * inner, inner, card);
      out.noalias() = in * f;
    }
    std::swap(cur, next);
    outer *= card;
  }
  return cur;
}

}  // namespace riskdesk::linalg
