#pragma once

#include <Eigen/Core>

#include "unmix/tensor.hpp"

namespace unmix {

// Thread budget for GEMM. Eigen partitions the output matrix, never the
// accumulation (K) dimension, so results are bitwise identical for any
// thread count.
inline void set_num_threads(int n) { Eigen::setNbThreads(n); }
inline int num_threads() { return Eigen::nbThreads(); }

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// C(MxN) = A(MxK) * B(KxN), row-major contiguous.
template <typename T>
void gemm(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  ConstMatMap<T> A(a, m, k);
  ConstMatMap<T> B(b, k, n);
  MatMap<T> C(c, m, n);
  C.noalias() = A * B;
}

// C(MxN) = A^T(MxK from KxM) * B(KxN)
template <typename T>
void gemm_at_b(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  ConstMatMap<T> A(a, k, m);
  ConstMatMap<T> B(b, k, n);
  MatMap<T> C(c, m, n);
  C.noalias() = A.transpose() * B;
}

// C(MxN) = A(MxK) * B^T(KxN from NxK)
template <typename T>
void gemm_a_bt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  ConstMatMap<T> A(a, m, k);
  ConstMatMap<T> B(b, n, k);
  MatMap<T> C(c, m, n);
  C.noalias() = A * B.transpose();
}

}  // namespace unmix
