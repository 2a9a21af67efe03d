// Copyright (C) 2026 The comi authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "comi/emb_io.hpp"

namespace comi::test {

inline EmbeddingMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                                     Role role = Role::context) {
    std::normal_distribution<float> normal(0.0f, 1.0f);
    EmbeddingMatrix m(role, rows, cols);
    for (float& v : m.data()) {
        v = normal(rng);
    }
    return m;
}

inline EmbeddingMatrix random_unit_rows(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    EmbeddingMatrix m = random_matrix(rng, rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (float v : m.row(r)) {
            sq += static_cast<double>(v) * v;
        }
        const auto inv = static_cast<float>(1.0 / std::sqrt(sq));
        for (float& v : m.row(r)) {
            v *= inv;
        }
    }
    return m;
}

/// Naive cosine, independent of the library: long double, no clamping.
template <typename A, typename B>
long double naive_cosine(const A& u, const B& v) {
    long double uv = 0, uu = 0, vv = 0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        uv += static_cast<long double>(u[k]) * static_cast<long double>(v[k]);
        uu += static_cast<long double>(u[k]) * static_cast<long double>(u[k]);
        vv += static_cast<long double>(v[k]) * static_cast<long double>(v[k]);
    }
    if (uu == 0 || vv == 0) {
        return 0;
    }
    return uv / std::sqrt(uu * vv);
}

/// Vectors whose pairwise dot products equal the given Gram matrix (rows of the factor).
inline Eigen::MatrixXd factor_gram(const Eigen::MatrixXd& gram) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace comi::test

namespace comi::test {

/// Reference group gains (inter-group MIG per segment) and the sizes they apportion to at budget 233.
inline const std::vector<double> kTableGains = {0.2227, 0.0078, -0.1719, -0.4546, -0.5583, -0.3682, -0.3203, -0.2832};
inline const std::vector<std::size_t> kTableSizes = {18, 22, 26, 35, 39, 32, 31, 30};

struct EngineeredContext {
    EmbeddingMatrix context;
    EmbeddingMatrix query;
};

/**
 * Context of gains.size() groups of `group_size` tokens whose representative
 * scope group gains equal `gains`. Representatives are pairwise at cosine
 * `shared` and at cosine gains[i] + shared from the query; every other token
 * points away from the query so it never becomes a representative.
 */
inline EngineeredContext engineered_context(const std::vector<double>& gains, std::size_t group_size,
                                            double shared = 0.1) {
    const auto m = static_cast<Eigen::Index>(gains.size());
    Eigen::MatrixXd gram = Eigen::MatrixXd::Constant(m + 1, m + 1, shared);
    gram.diagonal().setOnes();
    for (Eigen::Index i = 0; i < m; ++i) {
        gram(0, i + 1) = gram(i + 1, 0) = gains[static_cast<std::size_t>(i)] + shared;
    }
    const Eigen::MatrixXd vecs = factor_gram(gram);
    const auto d = static_cast<std::size_t>(vecs.cols());

    EngineeredContext out{EmbeddingMatrix(Role::context, gains.size() * group_size, d),
                          EmbeddingMatrix(Role::query, 1, d)};
    for (std::size_t c = 0; c < d; ++c) {
        out.query.row(0)[c] = static_cast<float>(vecs(0, static_cast<Eigen::Index>(c)));
    }
    for (std::size_t g = 0; g < gains.size(); ++g) {
        for (std::size_t k = 0; k < group_size; ++k) {
            auto row = out.context.row(g * group_size + k);
            for (std::size_t c = 0; c < d; ++c) {
                row[c] = k == 0 ? static_cast<float>(vecs(static_cast<Eigen::Index>(g) + 1, static_cast<Eigen::Index>(c)))
                                : -out.query.row(0)[c];
            }
        }
    }
    return out;
}

}  // namespace comi::test
