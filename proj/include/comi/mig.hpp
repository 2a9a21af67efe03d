// Copyright (C) 2026 The comi authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "comi/emb_io.hpp"
#include "comi/error.hpp"
#include "comi/parallel.hpp"

namespace comi {

/// Relevance, redundancy and marginal information gain of one unit.
struct GainRecord {
    std::size_t index = 0;                   ///< token position in the context
    double relevance = 0.0;                  ///< cos(x_i, q)
    double redundancy = 0.0;                 ///< max cos(x_i, x_j) over peers, 0 without peers
    double gain = 0.0;                       ///< relevance - redundancy
    std::optional<std::size_t> argmax_peer;  ///< peer attaining the redundancy
};

/// Mean of the query token rows.
struct PooledQuery {
    std::vector<double> vector;

    std::size_t dim() const noexcept { return vector.size(); }
    std::span<const double> span() const noexcept { return vector; }
};

template <typename A, typename B>
double dot(std::span<const A> u, std::span<const B> v) {
    double acc = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        acc += static_cast<double>(u[k]) * static_cast<double>(v[k]);
    }
    return acc;
}

template <typename A>
double norm(std::span<const A> u) {
    return std::sqrt(dot(u, u));
}

/// Cosine similarity in double precision. Zero-norm inputs give 0 and the
/// result is clamped to [-1, 1]. One square root of the product of squared
/// norms keeps parallel vectors at exactly 1 more often than two roots do.
template <typename A, typename B>
double cosine(std::span<const A> u, std::span<const B> v) {
    require(u.size() == v.size(), ErrorKind::shape,
            "cosine of vectors with dimensions " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
    const double uu = dot(u, u);
    const double vv = dot(v, v);
    if (uu == 0.0 || vv == 0.0) {
        return 0.0;
    }
    return std::clamp(dot(u, v) / std::sqrt(uu * vv), -1.0, 1.0);
}

template <typename A, typename B>
double cosine(const std::vector<A>& u, const std::vector<B>& v) {
    return cosine(std::span<const A>(u), std::span<const B>(v));
}

inline PooledQuery pool_query(const EmbeddingMatrix& query) {
    require(query.rows() >= 1, ErrorKind::empty_query, "query has no rows");
    PooledQuery pooled{std::vector<double>(query.cols(), 0.0)};
    for (std::size_t r = 0; r < query.rows(); ++r) {
        const auto row = query.row(r);
        for (std::size_t c = 0; c < query.cols(); ++c) {
            pooled.vector[c] += static_cast<double>(row[c]);
        }
    }
    const auto n = static_cast<double>(query.rows());
    for (double& v : pooled.vector) {
        v /= n;
    }
    return pooled;
}

/**
 * MIG of row `index` of `x` against the peer rows listed in `peers`.
 *
 * Peers are scanned in the given order; argmax ties resolve to the lowest
 * index regardless of that order.
 */
inline GainRecord mig_record(const EmbeddingMatrix& x, const PooledQuery& qbar, std::size_t index,
                             std::span<const std::size_t> peers) {
    require(qbar.dim() == x.cols(), ErrorKind::shape,
            "query dimension " + std::to_string(qbar.dim()) + " vs context dimension " + std::to_string(x.cols()));
    require(index < x.rows(), ErrorKind::range, "token index " + std::to_string(index) + " out of range");

    GainRecord rec;
    rec.index = index;
    const auto xi = x.row(index);
    rec.relevance = cosine(xi, qbar.span());

    for (std::size_t j : peers) {
        require(j != index, ErrorKind::self_comparison,
                "peer set of token " + std::to_string(index) + " contains the token itself");
        require(j < x.rows(), ErrorKind::range, "peer index " + std::to_string(j) + " out of range");
        const double c = cosine(xi, x.row(j));
        if (!rec.argmax_peer || c > rec.redundancy || (c == rec.redundancy && j < *rec.argmax_peer)) {
            rec.redundancy = c;
            rec.argmax_peer = j;
        }
    }
    rec.gain = rec.relevance - rec.redundancy;
    return rec;
}

/// MIG for every row of `x`; `comparison[i]` lists the peers of row i.
inline std::vector<GainRecord> mig_scores(const EmbeddingMatrix& x, const PooledQuery& qbar,
                                          const std::vector<std::vector<std::size_t>>& comparison,
                                          std::size_t threads = 1) {
    require(comparison.size() == x.rows(), ErrorKind::shape,
            "comparison sets for " + std::to_string(comparison.size()) + " tokens, matrix has " +
                std::to_string(x.rows()));
    std::vector<GainRecord> out(x.rows());
    parallel_for(x.rows(), threads, [&](std::size_t i) { out[i] = mig_record(x, qbar, i, comparison[i]); });
    return out;
}

/// Peer sets where every row is compared with every other row.
inline std::vector<std::vector<std::size_t>> full_peer_sets(std::size_t n) {
    std::vector<std::vector<std::size_t>> sets(n);
    for (std::size_t i = 0; i < n; ++i) {
        sets[i].reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                sets[i].push_back(j);
            }
        }
    }
    return sets;
}

/// Row of `segment` most similar to the pooled query, as a context index.
inline std::size_t representative(const RowSlice& segment, const PooledQuery& qbar) {
    require(!segment.empty(), ErrorKind::empty_segment, "cannot pick a representative of an empty segment");
    require(qbar.dim() == segment.cols(), ErrorKind::shape, "query and segment dimensions differ");
    std::size_t best = 0;
    double best_score = cosine(segment.row(0), qbar.span());
    for (std::size_t k = 1; k < segment.size(); ++k) {
        const double s = cosine(segment.row(k), qbar.span());
        if (s > best_score) {
            best_score = s;
            best = k;
        }
    }
    return segment.offset + best;
}

inline void to_json(nlohmann::ordered_json& j, const GainRecord& r) {
    j = nlohmann::ordered_json{{"index", r.index},
                               {"relevance", r.relevance},
                               {"redundancy", r.redundancy},
                               {"gain", r.gain},
                               {"argmax_peer", nullptr}};
    if (r.argmax_peer) {
        j["argmax_peer"] = *r.argmax_peer;
    }
}

inline void from_json(const nlohmann::ordered_json& j, GainRecord& r) {
    r.index = j.at("index").get<std::size_t>();
    r.relevance = j.at("relevance").get<double>();
    r.redundancy = j.at("redundancy").get<double>();
    r.gain = j.at("gain").get<double>();
    r.argmax_peer.reset();
    if (!j.at("argmax_peer").is_null()) {
        r.argmax_peer = j.at("argmax_peer").get<std::size_t>();
    }
}

}  // namespace comi
