// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace cei {

using TokenId = std::int32_t;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Numerically stable softmax (max subtraction). Throws NumericError on
/// non-finite input.
Vector softmax(const Vector& logits);

/// Index of the largest entry; ties go to the lowest index.
Eigen::Index argmax(const Vector& values);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

namespace ops {

/// y = x * scale / sqrt(mean(x^2) + eps). Returns 1/rms through inv_rms.
RowVector rms_norm(const RowVector& x, const Vector& scale, double eps, double* inv_rms = nullptr);

/// Row-wise RMS norm over a [T x d] matrix; inv_rms receives T entries.
Matrix rms_norm_rows(const Matrix& x, const Vector& scale, double eps, Vector* inv_rms = nullptr);

/// Backward of rms_norm_rows. Accumulates into scale_grad and returns dx.
Matrix rms_norm_rows_backward(const Matrix& x, const Vector& scale, const Vector& inv_rms,
                              const Matrix& dy, Vector& scale_grad);

/// tanh-approximated GELU and its derivative.
double gelu(double x);
double gelu_grad(double x);

/// (1 - alpha) * h + alpha * c. alpha == 0 returns h unchanged.
Vector convex_blend(const Vector& h, const Vector& c, double alpha);

/// Rotary position encoding applied in place to every head slice of a
/// [d]-wide row. inverse=true applies the transpose rotation.
void rope_in_place(double* row, int dim, int head_dim, int position, bool inverse = false);

}  // namespace ops
}  // namespace cei
