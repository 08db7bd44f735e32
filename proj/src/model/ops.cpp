// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/ops.hpp"

#include "cei/error.hpp"

#include <cmath>
#include <numbers>

namespace cei {

Vector softmax(const Vector& logits) {
    if (logits.size() == 0) throw InputError("softmax of empty vector");
    if (!all_finite(logits)) throw NumericError("softmax input is not finite");
    const double peak = logits.maxCoeff();
    Vector out = (logits.array() - peak).exp().matrix();
    out /= out.sum();
    return out;
}

Eigen::Index argmax(const Vector& values) {
    if (values.size() == 0) throw InputError("argmax of empty vector");
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

bool all_finite(const Vector& v) { return v.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

namespace ops {

RowVector rms_norm(const RowVector& x, const Vector& scale, double eps, double* inv_rms) {
    const double ms = x.squaredNorm() / static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(ms + eps);
    if (inv_rms) *inv_rms = inv;
    return (x.array() * scale.transpose().array() * inv).matrix();
}

Matrix rms_norm_rows(const Matrix& x, const Vector& scale, double eps, Vector* inv_rms) {
    Matrix out(x.rows(), x.cols());
    if (inv_rms) inv_rms->resize(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double inv = 0.0;
        out.row(i) = rms_norm(x.row(i), scale, eps, &inv);
        if (inv_rms) (*inv_rms)[i] = inv;
    }
    return out;
}

Matrix rms_norm_rows_backward(const Matrix& x, const Vector& scale, const Vector& inv_rms,
                              const Matrix& dy, Vector& scale_grad) {
    const auto d = static_cast<double>(x.cols());
    Matrix dx(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double r = inv_rms[i];
        scale_grad += (dy.row(i).array() * x.row(i).array() * r).matrix().transpose();
        const RowVector gdy = (dy.row(i).array() * scale.transpose().array()).matrix();
        const double proj = gdy.dot(x.row(i));
        dx.row(i) = gdy * r - x.row(i) * (proj * r * r * r / d);
    }
    return dx;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
constexpr double kRopeBase = 10000.0;
}  // namespace

double gelu(double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
    const double u = kGeluC * (x + kGeluA * x * x * x);
    const double t = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Vector convex_blend(const Vector& h, const Vector& c, double alpha) {
    if (alpha == 0.0) return h;
    return (1.0 - alpha) * h + alpha * c;
}

void rope_in_place(double* row, int dim, int head_dim, int position, bool inverse) {
    const int half = head_dim / 2;
    for (int h0 = 0; h0 < dim; h0 += head_dim) {
        for (int i = 0; i < half; ++i) {
            const double freq = std::pow(kRopeBase, -2.0 * i / head_dim);
            const double angle = (inverse ? -1.0 : 1.0) * position * freq;
            const double c = std::cos(angle);
            const double s = std::sin(angle);
            double& a = row[h0 + 2 * i];
            double& b = row[h0 + 2 * i + 1];
            const double ra = a * c - b * s;
            const double rb = a * s + b * c;
            a = ra;
            b = rb;
        }
    }
}

}  // namespace ops
}  // namespace cei
