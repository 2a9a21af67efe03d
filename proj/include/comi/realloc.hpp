// Copyright (C) 2026 The comi authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "comi/emb_io.hpp"
#include "comi/error.hpp"
#include "comi/mig.hpp"
#include "comi/parallel.hpp"

namespace comi {

/// Which tokens a group representative is compared against for redundancy.
enum class RedundancyScope {
    representatives,  ///< the other groups' representatives
    all_tokens,       ///< every token outside the group
};

inline std::string_view to_string(RedundancyScope scope) {
    return scope == RedundancyScope::representatives ? "representatives" : "all_tokens";
}

inline RedundancyScope parse_scope(std::string_view text) {
    if (text == "representatives") {
        return RedundancyScope::representatives;
    }
    if (text == "all_tokens") {
        return RedundancyScope::all_tokens;
    }
    fail(ErrorKind::validation, "unknown redundancy scope \"" + std::string(text) + "\"");
}

struct CompressionConfig {
    std::size_t rate = 32;
    RedundancyScope redundancy_scope = RedundancyScope::representatives;
    std::size_t min_group_size = 1;
    std::size_t threads = 1;

    void validate() const {
        require(rate >= 1, ErrorKind::validation, "rate must be >= 1");
        require(min_group_size >= 1, ErrorKind::validation, "min_group_size must be >= 1");
    }
};

/// Ordered contiguous segmentation of a context.
struct GroupPartition {
    std::vector<std::size_t> sizes;

    std::size_t groups() const noexcept { return sizes.size(); }
    std::size_t total() const noexcept { return std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}); }

    std::vector<std::size_t> offsets() const {
        std::vector<std::size_t> out(sizes.size(), 0);
        for (std::size_t i = 1; i < sizes.size(); ++i) {
            out[i] = out[i - 1] + sizes[i - 1];
        }
        return out;
    }

    friend bool operator==(const GroupPartition&, const GroupPartition&) = default;
};

inline std::size_t compressed_length(std::size_t context_length, std::size_t rate) {
    return std::max<std::size_t>(1, context_length / rate);
}

inline GroupPartition initial_partition(std::size_t context_length, const CompressionConfig& cfg) {
    cfg.validate();
    require(context_length >= 1, ErrorKind::empty_context, "context has no tokens");
    const std::size_t m = compressed_length(context_length, cfg.rate);
    const std::size_t base = context_length / m;
    const std::size_t extra = context_length % m;
    GroupPartition part;
    part.sizes.assign(m, base);
    for (std::size_t i = 0; i < extra; ++i) {
        ++part.sizes[i];
    }
    return part;
}

/// One GainRecord per group, computed on the group's representative token.
inline std::vector<GainRecord> group_gains(const EmbeddingMatrix& h, const GroupPartition& part,
                                           const PooledQuery& qbar, const CompressionConfig& cfg) {
    require(part.total() == h.rows(), ErrorKind::shape,
            "partition covers " + std::to_string(part.total()) + " tokens, context has " + std::to_string(h.rows()));
    const auto offsets = part.offsets();
    const std::size_t m = part.groups();

    std::vector<std::size_t> reps(m);
    parallel_for(m, cfg.threads,
                 [&](std::size_t g) { reps[g] = representative(slice(h, offsets[g], part.sizes[g]), qbar); });

    std::vector<GainRecord> out(m);
    parallel_for(m, cfg.threads, [&](std::size_t g) {
        std::vector<std::size_t> peers;
        if (cfg.redundancy_scope == RedundancyScope::representatives) {
            peers.reserve(m - 1);
            for (std::size_t o = 0; o < m; ++o) {
                if (o != g) {
                    peers.push_back(reps[o]);
                }
            }
        } else {
            peers.reserve(h.rows() - part.sizes[g]);
            for (std::size_t j = 0; j < h.rows(); ++j) {
                if (j < offsets[g] || j >= offsets[g] + part.sizes[g]) {
                    peers.push_back(j);
                }
            }
        }
        out[g] = mig_record(h, qbar, reps[g], peers);
    });
    return out;
}

/// Max-subtracted softmax of `sign * values`.
inline std::vector<double> stable_softmax(std::span<const double> values, double sign = 1.0) {
    std::vector<double> out(values.size());
    if (values.empty()) {
        return out;
    }
    double top = sign * values[0];
    for (double v : values) {
        top = std::max(top, sign * v);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::exp(sign * values[i] - top);
        total += out[i];
    }
    for (double& w : out) {
        w /= total;
    }
    return out;
}

/// Allocation weights P_i = softmax(-G)_i; higher gain means a smaller share.
inline std::vector<double> allocation_weights(std::span<const double> gains) {
    for (std::size_t i = 0; i < gains.size(); ++i) {
        require(std::isfinite(gains[i]), ErrorKind::validation, "gain " + std::to_string(i) + " is not finite");
    }
    return stable_softmax(gains, -1.0);
}

/**
 * Integer apportionment of `budget` by largest remainder: every group gets
 * floor(budget * w_i), and the leftover units go to the largest fractional
 * parts (ties to the lowest index). The result always sums to `budget`.
 */
inline std::vector<std::size_t> largest_remainder(std::span<const double> weights, std::size_t budget) {
    const std::size_t m = weights.size();
    std::vector<std::size_t> sizes(m);
    std::vector<double> fraction(m);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double target = static_cast<double>(budget) * weights[i];
        const double whole = std::floor(target);
        sizes[i] = static_cast<std::size_t>(whole);
        fraction[i] = target - whole;
        assigned += sizes[i];
    }

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fraction[a] > fraction[b]; });

    // Rounding in the weights can leave the floors off by more than the usual
    // 0..m-1 leftover; cycle through the ranking until the total is exact.
    for (std::size_t k = 0; assigned < budget; k = (k + 1) % m) {
        ++sizes[order[k]];
        ++assigned;
    }
    for (std::size_t k = 0; assigned > budget; k = (k + 1) % m) {
        const std::size_t i = order[m - 1 - k];
        if (sizes[i] > 0) {
            --sizes[i];
            --assigned;
        }
    }
    return sizes;
}

inline GroupPartition allocate_sizes(std::span<const double> gains, std::size_t budget, const CompressionConfig& cfg) {
    cfg.validate();
    const std::size_t m = gains.size();
    require(m >= 1, ErrorKind::validation, "no gains to allocate");
    require(budget >= m * cfg.min_group_size, ErrorKind::infeasible_budget,
            "budget " + std::to_string(budget) + " cannot give " + std::to_string(m) + " groups at least " +
                std::to_string(cfg.min_group_size) + " tokens each");

    const auto weights = allocation_weights(gains);
    GroupPartition part{largest_remainder(weights, budget)};

    // Lift undersized groups, taking the deficit one token at a time from the
    // currently largest group (lowest index on ties).
    std::size_t deficit = 0;
    for (auto& s : part.sizes) {
        if (s < cfg.min_group_size) {
            deficit += cfg.min_group_size - s;
            s = cfg.min_group_size;
        }
    }
    while (deficit > 0) {
        const auto largest = std::max_element(part.sizes.begin(), part.sizes.end());
        --*largest;
        --deficit;
    }
    return part;
}

inline GroupPartition allocate_sizes(const std::vector<GainRecord>& gains, std::size_t budget,
                                     const CompressionConfig& cfg) {
    std::vector<double> g(gains.size());
    std::transform(gains.begin(), gains.end(), g.begin(), [](const GainRecord& r) { return r.gain; });
    return allocate_sizes(std::span<const double>(g), budget, cfg);
}

struct Reallocation {
    GroupPartition before;
    GroupPartition after;
    std::vector<GainRecord> gains;
    std::vector<double> weights;
};

/// Initial equal partition, inter-group MIG, then resized groups over the same tokens.
inline Reallocation reallocate(const EmbeddingMatrix& h, const PooledQuery& qbar, const CompressionConfig& cfg) {
    Reallocation out;
    out.before = initial_partition(h.rows(), cfg);
    out.gains = group_gains(h, out.before, qbar, cfg);
    std::vector<double> g(out.gains.size());
    std::transform(out.gains.begin(), out.gains.end(), g.begin(), [](const GainRecord& r) { return r.gain; });
    out.weights = allocation_weights(g);
    out.after = allocate_sizes(std::span<const double>(g), h.rows(), cfg);
    return out;
}

inline nlohmann::ordered_json reallocation_trace(const Reallocation& r) {
    nlohmann::ordered_json gains = nlohmann::ordered_json::array();
    for (const auto& rec : r.gains) {
        gains.push_back(rec.gain);
    }
    return nlohmann::ordered_json{{"gains", gains},
                                  {"weights", r.weights},
                                  {"sizes_before", r.before.sizes},
                                  {"sizes_after", r.after.sizes}};
}

}  // namespace comi
