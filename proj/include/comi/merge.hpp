// Copyright (C) 2026 The comi authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "comi/emb_io.hpp"
#include "comi/error.hpp"
#include "comi/mig.hpp"
#include "comi/parallel.hpp"
#include "comi/realloc.hpp"

namespace comi {

/// MIG of each token in `group` against the other tokens of the same group.
inline std::vector<GainRecord> intra_group_gains(const RowSlice& group, const PooledQuery& qbar) {
    require(!group.empty(), ErrorKind::empty_segment, "group has no tokens");
    std::vector<GainRecord> out(group.size());
    std::vector<std::size_t> peers;
    peers.reserve(group.size() - 1);
    for (std::size_t k = 0; k < group.size(); ++k) {
        peers.clear();
        for (std::size_t o = 0; o < group.size(); ++o) {
            if (o != k) {
                peers.push_back(group.offset + o);
            }
        }
        out[k] = mig_record(*group.matrix, qbar, group.offset + k, peers);
    }
    return out;
}

/// Softmax of the intra-group gains; strictly positive and sums to one.
inline std::vector<double> merge_weights(std::span<const double> gains) {
    for (std::size_t i = 0; i < gains.size(); ++i) {
        require(std::isfinite(gains[i]), ErrorKind::validation, "gain " + std::to_string(i) + " is not finite");
    }
    return stable_softmax(gains, 1.0);
}

/// Weighted sum of the group rows, accumulated row by row in double.
inline std::vector<double> merge_rows(const RowSlice& group, std::span<const double> weights) {
    require(weights.size() == group.size(), ErrorKind::shape, "one weight per group row required");
    std::vector<double> out(group.cols(), 0.0);
    for (std::size_t k = 0; k < group.size(); ++k) {
        const auto row = group.row(k);
        for (std::size_t c = 0; c < out.size(); ++c) {
            out[c] += weights[k] * static_cast<double>(row[c]);
        }
    }
    return out;
}

inline std::vector<double> merge_group(const RowSlice& group, std::span<const double> gains) {
    require(!group.empty(), ErrorKind::empty_segment, "group has no tokens");
    require(gains.size() == group.size(), ErrorKind::shape, "one gain per group row required");
    const auto weights = merge_weights(gains);
    return merge_rows(group, weights);
}

struct CompressedContext {
    EmbeddingMatrix tokens;
    Reallocation reallocation;
    std::vector<std::vector<GainRecord>> group_token_gains;
    std::vector<std::vector<double>> merge_weights;
};

inline std::vector<double> gain_values(const std::vector<GainRecord>& records) {
    std::vector<double> g;
    g.reserve(records.size());
    for (const auto& r : records) {
        g.push_back(r.gain);
    }
    return g;
}

/**
 * @brief Coarse-to-fine compression of a context against a query.
 *
 * Pools the query, reallocates group sizes from inter-group MIG, scores every
 * token against its own group, and merges each group into one token. Output
 * has max(1, floor(L/rate)) rows in group order. Groups are processed
 * independently, so `cfg.threads` does not affect any output bit.
 */
inline CompressedContext compress(const EmbeddingMatrix& context, const EmbeddingMatrix& query,
                                  const CompressionConfig& cfg) {
    cfg.validate();
    require(context.rows() >= 1, ErrorKind::empty_context, "context has no tokens");
    require(context.cols() == query.cols(), ErrorKind::shape,
            "context dimension " + std::to_string(context.cols()) + " differs from query dimension " +
                std::to_string(query.cols()));

    const PooledQuery qbar = pool_query(query);
    CompressedContext out;
    out.reallocation = reallocate(context, qbar, cfg);

    const auto& part = out.reallocation.after;
    const auto offsets = part.offsets();
    const std::size_t m = part.groups();
    out.group_token_gains.resize(m);
    out.merge_weights.resize(m);
    out.tokens = EmbeddingMatrix(Role::compressed, m, context.cols());

    parallel_for(m, cfg.threads, [&](std::size_t g) {
        const RowSlice group = slice(context, offsets[g], part.sizes[g]);
        out.group_token_gains[g] = intra_group_gains(group, qbar);
        out.merge_weights[g] = merge_weights(gain_values(out.group_token_gains[g]));
        const auto merged = merge_rows(group, out.merge_weights[g]);
        auto dst = out.tokens.row(g);
        for (std::size_t c = 0; c < merged.size(); ++c) {
            dst[c] = static_cast<float>(merged[c]);
        }
    });
    return out;
}

inline nlohmann::ordered_json compression_trace(const CompressedContext& cc) {
    nlohmann::ordered_json groups = nlohmann::ordered_json::array();
    for (std::size_t g = 0; g < cc.group_token_gains.size(); ++g) {
        groups.push_back(nlohmann::ordered_json{{"group", g},
                                                {"representative", cc.reallocation.gains[g]},
                                                {"token_gains", cc.group_token_gains[g]},
                                                {"merge_weights", cc.merge_weights[g]}});
    }
    return nlohmann::ordered_json{{"reallocation", reallocation_trace(cc.reallocation)}, {"groups", groups}};
}

}  // namespace comi
