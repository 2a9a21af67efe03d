// Copyright (C) 2026 The comi authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "comi/emb_io.hpp"
#include "comi/error.hpp"
#include "comi/mig.hpp"

namespace comi {

struct LabeledScores {
    std::vector<double> scores;
    std::vector<int> labels;

    void validate() const {
        require(scores.size() == labels.size(), ErrorKind::shape,
                std::to_string(scores.size()) + " scores but " + std::to_string(labels.size()) + " labels");
        for (std::size_t i = 0; i < scores.size(); ++i) {
            require(std::isfinite(scores[i]), ErrorKind::validation, "score " + std::to_string(i) + " is not finite");
            require(labels[i] == 0 || labels[i] == 1, ErrorKind::validation,
                    "label " + std::to_string(i) + " is not 0 or 1");
        }
    }
};

/**
 * Mann-Whitney AUC: share of (positive, negative) pairs where the positive
 * scores higher, ties counting one half.
 *
 * Sorts once and walks tie blocks, accumulating twice the U statistic as an
 * integer so the only rounding is the final division.
 */
inline double auc(const LabeledScores& ls) {
    ls.validate();
    const std::size_t n = ls.scores.size();
    const auto positives = static_cast<std::uint64_t>(std::count(ls.labels.begin(), ls.labels.end(), 1));
    const auto negatives = static_cast<std::uint64_t>(n) - positives;
    require(positives > 0 && negatives > 0, ErrorKind::degenerate_labels,
            "AUC needs at least one positive and one negative label");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ls.scores[a] < ls.scores[b]; });

    std::uint64_t twice_u = 0;
    std::uint64_t negatives_below = 0;
    for (std::size_t start = 0; start < n;) {
        std::size_t end = start;
        std::uint64_t pos = 0;
        std::uint64_t neg = 0;
        while (end < n && ls.scores[order[end]] == ls.scores[order[start]]) {
            (ls.labels[order[end]] == 1 ? pos : neg) += 1;
            ++end;
        }
        twice_u += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        start = end;
    }
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

/// Mean cosine over ordered pairs of distinct rows; 0 for fewer than two rows.
inline double redundancy_score(const EmbeddingMatrix& e) {
    const std::size_t k = e.rows();
    if (k <= 1) {
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (i != j) {
                total += cosine(e.row(i), e.row(j));
            }
        }
    }
    return total / (static_cast<double>(k) * static_cast<double>(k - 1));
}

/// Indices of the top ceil(ratio * n) scores, ties to the lower index, sorted ascending.
inline std::vector<std::size_t> retention_select(std::span<const double> scores, double ratio) {
    require(!scores.empty(), ErrorKind::validation, "no scores to select from");
    require(ratio > 0.0 && ratio <= 1.0, ErrorKind::range, "retention ratio must lie in (0, 1]");
    const auto n = scores.size();
    // 0.7 * 10 evaluates to 7.000000000000001; shave representation error before ceil.
    const double exact = ratio * static_cast<double>(n);
    const auto keep = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(exact - 1e-9 * exact)), 1, n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return order;
}

/// Copies the listed rows into a new matrix, preserving the role.
inline EmbeddingMatrix select_rows(const EmbeddingMatrix& e, std::span<const std::size_t> rows) {
    EmbeddingMatrix out(e.role(), rows.size(), e.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        require(rows[r] < e.rows(), ErrorKind::range, "row " + std::to_string(rows[r]) + " out of range");
        const auto src = e.row(rows[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

}  // namespace comi
