// Reference implementations used only by tests. Everything here is written
// against the raw matrix container with hand-rolled algorithms so that the
// library's decomposition backend is never on both sides of a comparison.
#pragma once

#include "q3r/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace oracle {

using q3r::Index;
using q3r::Matrix;
using q3r::Vector;

struct Eigh {
    Vector values;  // descending
    Matrix vectors; // full square orthogonal, columns match values
};

// Cyclic Jacobi eigensolver for symmetric matrices.
inline Eigh jacobi_eigh(Matrix s) {
    const Index n = s.rows();
    Matrix q = Matrix::Identity(n, n);
    const double scale = std::max(s.cwiseAbs().maxCoeff(), 1e-300);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Index p = 0; p < n; ++p)
            for (Index r = p + 1; r < n; ++r)
                off += s(p, r) * s(p, r);
        if (off <= 1e-30 * scale * scale)
            break;

        for (Index p = 0; p < n; ++p) {
            for (Index r = p + 1; r < n; ++r) {
                if (std::abs(s(p, r)) <= 1e-18 * scale)
                    continue;
                const double theta = (s(r, r) - s(p, p)) / (2.0 * s(p, r));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (Index k = 0; k < n; ++k) {
                    const double skp = s(k, p), skr = s(k, r);
                    s(k, p) = c * skp - sn * skr;
                    s(k, r) = sn * skp + c * skr;
                }
                for (Index k = 0; k < n; ++k) {
                    const double spk = s(p, k), srk = s(r, k);
                    s(p, k) = c * spk - sn * srk;
                    s(r, k) = sn * spk + c * srk;
                }
                for (Index k = 0; k < n; ++k) {
                    const double qkp = q(k, p), qkr = q(k, r);
                    q(k, p) = c * qkp - sn * qkr;
                    q(k, r) = sn * qkp + c * qkr;
                }
            }
        }
    }

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return s(a, a) > s(b, b); });

    Eigh out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Index i = 0; i < n; ++i) {
        out.values[i] = s(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        out.vectors.col(i) = q.col(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

// Singular values through the Gram matrix, independent of any SVD routine.
inline Vector gram_singular_values(const Matrix& w) {
    const bool wide = w.rows() < w.cols();
    const Matrix gram = wide ? Matrix(w * w.transpose()) : Matrix(w.transpose() * w);
    const Eigh e = jacobi_eigh(gram);
    Vector s(e.values.size());
    for (Index i = 0; i < s.size(); ++i)
        s[i] = std::sqrt(std::max(e.values[i], 0.0));
    return s;
}

struct Svd {
    Matrix u;
    Vector s; // descending
    Matrix v;
};

// One-sided Jacobi on the columns; u columns with negligible norm are left
// zero, which is fine for consumers that only touch the eps-envelope.
inline Svd jacobi_svd(const Matrix& a_in) {
    if (a_in.rows() < a_in.cols()) {
        Svd t = jacobi_svd(Matrix(a_in.transpose()));
        return Svd{t.v, t.s, t.u};
    }
    Matrix a = a_in;
    const Index n = a.cols();
    Matrix v = Matrix::Identity(n, n);
    const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);

    for (int sweep = 0; sweep < 100; ++sweep) {
        bool rotated = false;
        for (Index p = 0; p < n; ++p) {
            for (Index r = p + 1; r < n; ++r) {
                const double app = a.col(p).squaredNorm();
                const double arr = a.col(r).squaredNorm();
                const double apr = a.col(p).dot(a.col(r));
                if (std::abs(apr) <= 1e-16 * scale * scale &&
                    std::abs(apr) <= 1e-14 * std::sqrt(app * arr))
                    continue;
                rotated = true;
                const double theta = (arr - app) / (2.0 * apr);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (Index k = 0; k < a.rows(); ++k) {
                    const double akp = a(k, p), akr = a(k, r);
                    a(k, p) = c * akp - sn * akr;
                    a(k, r) = sn * akp + c * akr;
                }
                for (Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkr = v(k, r);
                    v(k, p) = c * vkp - sn * vkr;
                    v(k, r) = sn * vkp + c * vkr;
                }
            }
        }
        if (!rotated)
            break;
    }

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::vector<double> norms(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j)
        norms[static_cast<std::size_t>(j)] = a.col(j).norm();
    std::sort(order.begin(), order.end(), [&](Index x, Index y) {
        return norms[static_cast<std::size_t>(x)] > norms[static_cast<std::size_t>(y)];
    });

    Svd out;
    out.u = Matrix::Zero(a.rows(), n);
    out.s.resize(n);
    out.v.resize(n, n);
    for (Index j = 0; j < n; ++j) {
        const Index src = order[static_cast<std::size_t>(j)];
        const double norm = norms[static_cast<std::size_t>(src)];
        out.s[j] = norm;
        out.v.col(j) = v.col(src);
        if (norm > 1e-300)
            out.u.col(j) = a.col(src) / norm;
    }
    return out;
}

// Central finite differences of a scalar field over matrix entries.
template <typename F>
Matrix fd_grad(F f, const Matrix& w, double h) {
    Matrix g(w.rows(), w.cols());
    Matrix x = w;
    for (Index i = 0; i < w.rows(); ++i) {
        for (Index j = 0; j < w.cols(); ++j) {
            x(i, j) = w(i, j) + h;
            const double fp = f(x);
            x(i, j) = w(i, j) - h;
            const double fm = f(x);
            x(i, j) = w(i, j);
            g(i, j) = (fp - fm) / (2.0 * h);
        }
    }
    return g;
}

// Reweighting sandwich exactly as defined: full square orthogonal factors
// from the Gram eigenproblems on both sides, diagonal weights
// max(sigma_i / eps, 1) padded with ones past min(d1, d2).
inline Matrix dense_reweighting(const Matrix& anchor, double eps, const Matrix& w) {
    const Eigh left = jacobi_eigh(Matrix(anchor * anchor.transpose()));
    const Eigh right = jacobi_eigh(Matrix(anchor.transpose() * anchor));

    Vector wl(left.values.size());
    for (Index i = 0; i < wl.size(); ++i) {
        const double sigma = std::sqrt(std::max(left.values[i], 0.0));
        wl[i] = 1.0 / std::max(sigma / eps, 1.0);
    }
    Vector wr(right.values.size());
    for (Index i = 0; i < wr.size(); ++i) {
        const double sigma = std::sqrt(std::max(right.values[i], 0.0));
        wr[i] = 1.0 / std::max(sigma / eps, 1.0);
    }

    const Matrix lhs = left.vectors * wl.asDiagonal() * left.vectors.transpose();
    const Matrix rhs = right.vectors * wr.asDiagonal() * right.vectors.transpose();
    return lhs * w * rhs;
}

// Four-term partial form of the same map, written against envelope factors
// (u, sigma, v) of the anchor:
//   eps^2 U S^-1 U^T W V S^-1 V^T + eps U S^-1 U^T W (I - V V^T)
//   + eps (I - U U^T) W V S^-1 V^T + (I - U U^T) W (I - V V^T)
inline Matrix partial_reweighting(const Matrix& u, const Vector& sigma, const Matrix& v,
                                  double eps, const Matrix& w) {
    const Index d1 = w.rows();
    const Index d2 = w.cols();
    const Matrix pu = u * u.transpose();
    const Matrix pv = v * v.transpose();
    const Matrix inv = sigma.cwiseInverse().asDiagonal();
    const Matrix usu = u * inv * u.transpose();
    const Matrix vsv = v * inv * v.transpose();
    const Matrix cu = Matrix::Identity(d1, d1) - pu;
    const Matrix cv = Matrix::Identity(d2, d2) - pv;

    return eps * eps * usu * w * vsv + eps * usu * w * cv + eps * cu * w * vsv +
           cu * w * cv;
}

} // namespace oracle
