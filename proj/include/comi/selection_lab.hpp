// Copyright (C) 2026 The comi authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "comi/error.hpp"
#include "comi/mig.hpp"
#include "comi/parallel.hpp"

namespace comi::lab {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IndexList = std::vector<std::size_t>;

/// Eigenvalues below this count as negative when checking a correlation matrix.
inline constexpr double kEigenFloor = -1e-10;
/// Largest entry change a nearest-PSD repair may make before the spec is rejected.
inline constexpr double kMaxProjection = 0.05;
inline constexpr double kMaxCondition = 1e12;
inline constexpr std::size_t kEnumerationBound = 20;

enum class Family {
    explicit_corr,  ///< relevances and feature correlations given verbatim
    orthogonal,     ///< independent features
    redundant_top,  ///< the most relevant features form a tightly correlated cluster
    random_latent,  ///< Gram matrix of random unit vectors
};

inline std::string_view to_string(Family f) {
    switch (f) {
    case Family::explicit_corr: return "explicit";
    case Family::orthogonal: return "orthogonal";
    case Family::redundant_top: return "redundant-top";
    case Family::random_latent: return "random";
    }
    return "unknown";
}

inline Family parse_family(std::string_view text) {
    for (Family f : {Family::explicit_corr, Family::orthogonal, Family::redundant_top, Family::random_latent}) {
        if (text == to_string(f)) {
            return f;
        }
    }
    fail(ErrorKind::validation, "unknown instance family \"" + std::string(text) + "\"");
}

struct FamilyParams {
    // redundant-top
    std::size_t cluster_size = 3;
    double cluster_corr_min = 0.8;
    double cluster_corr_max = 0.9;
    double top_relevance_min = 0.5;
    double top_relevance_max = 0.6;
    double other_relevance_min = 0.25;
    double other_relevance_max = 0.4;
    // orthogonal
    double relevance_min = 0.1;
    double relevance_max = 0.5;
    // random
    std::size_t latent_extra = 2;
};

struct InstanceSpec {
    Family family = Family::redundant_top;
    std::size_t n = 6;
    std::uint64_t seed = 0;
    FamilyParams params;
    std::vector<double> relevance;     ///< explicit: corr(x_i, y)
    std::vector<double> feature_corr;  ///< explicit: n*n row-major corr(x_i, x_j)
};

/**
 * @brief Jointly Gaussian features x_0..x_{n-1} and target y.
 *
 * `corr` is (n+1)x(n+1) with the target last. Row i of `embeddings` is a
 * unit vector whose dot products with the other rows reproduce `corr`, so the
 * cosine-based MIG score and the information quantities describe the same
 * object.
 */
struct GaussianInstance {
    std::size_t n = 0;
    Eigen::MatrixXd corr;
    RowMatrix embeddings;
    bool projected = false;
    double max_adjustment = 0.0;
    double min_eigenvalue = 0.0;

    std::span<const double> embedding(std::size_t i) const {
        return {embeddings.data() + i * embeddings.cols(), static_cast<std::size_t>(embeddings.cols())};
    }
    std::span<const double> target() const { return embedding(n); }

    /// cos(x_i, q), read from `corr` so exact ties stay exact (the embeddings reproduce it to 1e-8).
    double relevance(std::size_t i) const { return similarity(i, n); }
    double similarity(std::size_t i, std::size_t j) const {
        return corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
};

namespace detail {

inline void check_correlation(const Eigen::MatrixXd& c) {
    require(c.rows() == c.cols() && c.rows() >= 2, ErrorKind::shape, "correlation matrix must be square, size >= 2");
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        require(std::abs(c(i, i) - 1.0) <= 1e-12, ErrorKind::validation, "correlation diagonal must be 1");
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            require(std::isfinite(c(i, j)) && std::abs(c(i, j)) <= 1.0 + 1e-12, ErrorKind::validation,
                    "correlation entries must lie in [-1, 1]");
            require(std::abs(c(i, j) - c(j, i)) <= 1e-12, ErrorKind::validation, "correlation matrix not symmetric");
        }
    }
}

/// Eigenvector columns flipped so each one's largest-magnitude entry is positive.
inline void fix_signs(Eigen::MatrixXd& vectors) {
    for (Eigen::Index col = 0; col < vectors.cols(); ++col) {
        Eigen::Index arg = 0;
        for (Eigen::Index r = 1; r < vectors.rows(); ++r) {
            if (std::abs(vectors(r, col)) > std::abs(vectors(arg, col))) {
                arg = r;
            }
        }
        if (vectors(arg, col) < 0.0) {
            vectors.col(col) *= -1.0;
        }
    }
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

inline Eigen::MatrixXd assemble(const Eigen::MatrixXd& features, const std::vector<double>& relevance) {
    const auto n = features.rows();
    Eigen::MatrixXd c(n + 1, n + 1);
    c.topLeftCorner(n, n) = features;
    for (Eigen::Index i = 0; i < n; ++i) {
        c(i, n) = c(n, i) = relevance[static_cast<std::size_t>(i)];
    }
    c(n, n) = 1.0;
    return c;
}

inline double min_eigenvalue(const Eigen::MatrixXd& c) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace detail

/**
 * Validates `corr`, repairs a slightly indefinite matrix by eigenvalue
 * clipping plus diagonal rescaling (rejecting repairs that move any entry by
 * more than kMaxProjection), then factors it as V V^T.
 */
inline GaussianInstance instance_from_correlation(Eigen::MatrixXd corr) {
    detail::check_correlation(corr);
    GaussianInstance inst;
    inst.n = static_cast<std::size_t>(corr.rows() - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    inst.min_eigenvalue = eig.eigenvalues().minCoeff();
    if (inst.min_eigenvalue < kEigenFloor) {
        const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
        Eigen::MatrixXd repaired = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
        const Eigen::VectorXd scale = repaired.diagonal().cwiseSqrt().cwiseInverse();
        repaired = scale.asDiagonal() * repaired * scale.asDiagonal();
        repaired = 0.5 * (repaired + repaired.transpose());
        repaired.diagonal().setOnes();
        inst.max_adjustment = (repaired - corr).cwiseAbs().maxCoeff();
        require(inst.max_adjustment <= kMaxProjection, ErrorKind::infeasible_spec,
                "correlation profile is not positive semidefinite (nearest PSD matrix moves an entry by " +
                    std::to_string(inst.max_adjustment) + ")");
        inst.projected = true;
        corr = repaired;
        eig.compute(corr);
        inst.min_eigenvalue = eig.eigenvalues().minCoeff();
    }

    // Columns in descending eigenvalue order.
    Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    const Eigen::VectorXd values = eig.eigenvalues().reverse().cwiseMax(0.0);
    detail::fix_signs(vectors);
    inst.embeddings = vectors * values.cwiseSqrt().asDiagonal();
    inst.corr = std::move(corr);

    const double err = (inst.embeddings * inst.embeddings.transpose() - inst.corr).cwiseAbs().maxCoeff();
    require(err <= 1e-8, ErrorKind::infeasible_spec,
            "factorization reproduces the correlation only to " + std::to_string(err));
    return inst;
}

/// Builds the correlation matrix for `spec` and factors it. Deterministic in spec.seed.
inline GaussianInstance gen_instance(const InstanceSpec& spec) {
    const std::size_t n = spec.n;
    require(n >= 1, ErrorKind::validation, "instance needs at least one feature");
    const auto& p = spec.params;
    auto rng = detail::trial_rng(spec.seed, 0);

    switch (spec.family) {
    case Family::explicit_corr: {
        require(spec.relevance.size() == n, ErrorKind::shape, "explicit instance needs n relevances");
        Eigen::MatrixXd features = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        if (!spec.feature_corr.empty()) {
            require(spec.feature_corr.size() == n * n, ErrorKind::shape, "explicit feature_corr must be n x n");
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = spec.feature_corr[i * n + j];
                }
            }
        }
        return instance_from_correlation(detail::assemble(features, spec.relevance));
    }
    case Family::orthogonal: {
        std::vector<double> rel(n);
        double sq = 0.0;
        for (auto& r : rel) {
            r = detail::uniform(rng, p.relevance_min, p.relevance_max);
            sq += r * r;
        }
        // Independent features jointly explain sum(rho^2) of the target's variance.
        if (sq > 0.9) {
            const double shrink = std::sqrt(0.9 / sq);
            for (auto& r : rel) {
                r *= shrink;
            }
        }
        const auto nn = static_cast<Eigen::Index>(n);
        return instance_from_correlation(detail::assemble(Eigen::MatrixXd::Identity(nn, nn), rel));
    }
    case Family::redundant_top: {
        const std::size_t c = std::min(p.cluster_size, n);
        const auto nn = static_cast<Eigen::Index>(n);
        // Rejection sampling keeps every accepted draw strictly inside the PSD cone.
        for (int attempt = 0; attempt < 1000; ++attempt) {
            IndexList position(n);
            std::iota(position.begin(), position.end(), std::size_t{0});
            std::shuffle(position.begin(), position.end(), rng);

            Eigen::MatrixXd features = Eigen::MatrixXd::Identity(nn, nn);
            std::vector<double> rel(n);
            for (std::size_t a = 0; a < c; ++a) {
                rel[position[a]] = detail::uniform(rng, p.top_relevance_min, p.top_relevance_max);
                for (std::size_t b = a + 1; b < c; ++b) {
                    const double tau = detail::uniform(rng, p.cluster_corr_min, p.cluster_corr_max);
                    features(static_cast<Eigen::Index>(position[a]), static_cast<Eigen::Index>(position[b])) = tau;
                    features(static_cast<Eigen::Index>(position[b]), static_cast<Eigen::Index>(position[a])) = tau;
                }
            }
            for (std::size_t a = c; a < n; ++a) {
                rel[position[a]] = detail::uniform(rng, p.other_relevance_min, p.other_relevance_max);
            }
            const Eigen::MatrixXd corr = detail::assemble(features, rel);
            if (detail::min_eigenvalue(corr) >= 1e-3) {
                return instance_from_correlation(corr);
            }
        }
        fail(ErrorKind::infeasible_spec, "redundant-top parameters rarely yield a valid correlation matrix");
    }
    case Family::random_latent: {
        const std::size_t dim = n + 1 + p.latent_extra;
        RowMatrix vectors(static_cast<Eigen::Index>(n + 1), static_cast<Eigen::Index>(dim));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
            for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
                vectors(r, k) = normal(rng);
            }
            vectors.row(r).normalize();
        }
        Eigen::MatrixXd corr = vectors * vectors.transpose();
        corr.diagonal().setOnes();
        corr = 0.5 * (corr + corr.transpose());
        return instance_from_correlation(corr);
    }
    }
    fail(ErrorKind::validation, "unhandled family");
}

/**
 * I(S; y) in nats for the Gaussian instance: -1/2 ln(1 - rho_S^T Sigma_SS^-1 rho_S).
 * Empty S gives 0. Near-singular Sigma_SS (condition number >= 1e12) is a
 * degenerate-set error.
 */
inline double gaussian_mi(std::span<const std::size_t> subset, const GaussianInstance& inst) {
    if (subset.empty()) {
        return 0.0;
    }
    const auto k = static_cast<Eigen::Index>(subset.size());
    Eigen::MatrixXd sigma(k, k);
    Eigen::VectorXd rho(k);
    const auto target = static_cast<Eigen::Index>(inst.n);
    for (Eigen::Index a = 0; a < k; ++a) {
        const auto ia = static_cast<Eigen::Index>(subset[static_cast<std::size_t>(a)]);
        require(subset[static_cast<std::size_t>(a)] < inst.n, ErrorKind::range, "feature index out of range");
        rho(a) = inst.corr(ia, target);
        for (Eigen::Index b = 0; b < k; ++b) {
            sigma(a, b) = inst.corr(ia, static_cast<Eigen::Index>(subset[static_cast<std::size_t>(b)]));
        }
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    require(lo > 0.0 && hi / lo < kMaxCondition, ErrorKind::degenerate_set,
            "feature correlations of the subset are singular");
    const double explained = rho.dot(sigma.ldlt().solve(rho));
    require(explained < 1.0, ErrorKind::degenerate_set, "subset determines the target exactly");
    return std::max(0.0, -0.5 * std::log1p(-explained));
}

enum class Strategy { relevance, mig };

inline std::string_view to_string(Strategy s) { return s == Strategy::relevance ? "relevance" : "mig"; }

/**
 * Greedy selection of k features, returned in pick order.
 *
 * relevance: highest cos(x_i, q) first. mig: each step maximizes
 * cos(x_i, q) - max_{j in S} cos(x_i, x_j), with no redundancy on the first
 * pick. Ties go to the lowest index in both.
 */
inline IndexList greedy_select(Strategy strategy, std::size_t k, const GaussianInstance& inst) {
    require(k >= 1 && k <= inst.n, ErrorKind::range,
            "k = " + std::to_string(k) + " outside [1, " + std::to_string(inst.n) + "]");
    std::vector<double> rel(inst.n);
    for (std::size_t i = 0; i < inst.n; ++i) {
        rel[i] = inst.relevance(i);
    }

    IndexList picked;
    std::vector<bool> taken(inst.n, false);
    std::vector<double> redundancy(inst.n, 0.0);
    while (picked.size() < k) {
        std::optional<std::size_t> best;
        double best_score = 0.0;
        for (std::size_t i = 0; i < inst.n; ++i) {
            if (taken[i]) {
                continue;
            }
            const double score = strategy == Strategy::relevance ? rel[i] : rel[i] - redundancy[i];
            if (!best || score > best_score) {
                best = i;
                best_score = score;
            }
        }
        picked.push_back(*best);
        taken[*best] = true;
        for (std::size_t i = 0; i < inst.n; ++i) {
            const double sim = inst.similarity(i, *best);
            redundancy[i] = picked.size() == 1 ? sim : std::max(redundancy[i], sim);
        }
    }
    return picked;
}

/// Greedy by the true marginal gain of the MI oracle; candidates making the set degenerate are skipped.
inline IndexList greedy_true_mi(std::size_t k, const GaussianInstance& inst) {
    require(k >= 1 && k <= inst.n, ErrorKind::range, "k outside [1, n]");
    IndexList picked;
    std::vector<bool> taken(inst.n, false);
    while (picked.size() < k) {
        std::optional<std::size_t> best;
        double best_mi = 0.0;
        for (std::size_t i = 0; i < inst.n; ++i) {
            if (taken[i]) {
                continue;
            }
            picked.push_back(i);
            try {
                const double mi = gaussian_mi(picked, inst);
                if (!best || mi > best_mi) {
                    best = i;
                    best_mi = mi;
                }
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::degenerate_set) {
                    throw;
                }
            }
            picked.pop_back();
        }
        require(best.has_value(), ErrorKind::degenerate_set, "no candidate extends the set non-degenerately");
        picked.push_back(*best);
        taken[*best] = true;
    }
    return picked;
}

/// The k-subset with the largest MI, lexicographically smallest on ties. Degenerate subsets are skipped.
inline IndexList brute_force_best(std::size_t k, const GaussianInstance& inst) {
    require(inst.n <= kEnumerationBound, ErrorKind::enumeration_bound,
            "n = " + std::to_string(inst.n) + " exceeds the enumeration bound " + std::to_string(kEnumerationBound));
    require(k >= 1 && k <= inst.n, ErrorKind::range, "k outside [1, n]");

    IndexList current(k);
    std::iota(current.begin(), current.end(), std::size_t{0});
    std::optional<IndexList> best;
    double best_mi = 0.0;
    while (true) {
        try {
            const double mi = gaussian_mi(current, inst);
            if (!best || mi > best_mi) {
                best = current;
                best_mi = mi;
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::degenerate_set) {
                throw;
            }
        }
        // Next combination in lexicographic order.
        std::size_t pos = k;
        while (pos > 0 && current[pos - 1] == inst.n - k + pos - 1) {
            --pos;
        }
        if (pos == 0) {
            break;
        }
        ++current[pos - 1];
        for (std::size_t j = pos; j < k; ++j) {
            current[j] = current[j - 1] + 1;
        }
    }
    require(best.has_value(), ErrorKind::degenerate_set, "every subset of this size is degenerate");
    return *best;
}

/// Checks f(S+i) + f(S+j) >= f(S+i+j) + f(S) over all S and i, j outside S (n <= 16).
inline bool mi_is_submodular(const GaussianInstance& inst, double tolerance = 1e-12) {
    require(inst.n <= 16, ErrorKind::enumeration_bound, "submodularity check limited to n <= 16");
    const std::size_t full = std::size_t{1} << inst.n;
    std::vector<double> f(full, 0.0);
    std::vector<bool> valid(full, true);
    IndexList members;
    for (std::size_t mask = 1; mask < full; ++mask) {
        members.clear();
        for (std::size_t i = 0; i < inst.n; ++i) {
            if (mask & (std::size_t{1} << i)) {
                members.push_back(i);
            }
        }
        try {
            f[mask] = gaussian_mi(members, inst);
        } catch (const Error&) {
            valid[mask] = false;
        }
    }
    for (std::size_t mask = 0; mask < full; ++mask) {
        for (std::size_t i = 0; i < inst.n; ++i) {
            const std::size_t bi = std::size_t{1} << i;
            if (mask & bi) {
                continue;
            }
            for (std::size_t j = i + 1; j < inst.n; ++j) {
                const std::size_t bj = std::size_t{1} << j;
                if (mask & bj) {
                    continue;
                }
                if (!valid[mask] || !valid[mask | bi] || !valid[mask | bj] || !valid[mask | bi | bj]) {
                    return false;
                }
                if (f[mask | bi] + f[mask | bj] + tolerance < f[mask | bi | bj] + f[mask]) {
                    return false;
                }
            }
        }
    }
    return true;
}

struct TrialConfig {
    Family family = Family::redundant_top;
    std::size_t trials = 1000;
    std::size_t n = 6;
    std::size_t k = 3;
    FamilyParams params;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::vector<double> relevance;     ///< explicit family only
    std::vector<double> feature_corr;  ///< explicit family only
};

enum class Outcome { tie, mig_wins, relevance_wins };

struct TrialResult {
    std::size_t trial = 0;
    IndexList relevance_set;
    IndexList mig_set;
    double mi_relevance = 0.0;
    double mi_mig = 0.0;
    bool differ = false;
    Outcome outcome = Outcome::tie;
    bool projected = false;
    std::optional<double> mi_best;
    std::optional<double> mi_true_greedy;
    std::optional<bool> submodular;
};

struct SelectionReport {
    TrialConfig config;
    std::vector<TrialResult> results;
    std::size_t differing = 0;
    std::size_t mig_wins = 0;
    std::size_t relevance_wins = 0;
    std::size_t ties = 0;
    double mean_mi_mig = 0.0;
    double mean_mi_relevance = 0.0;
    double mean_mi_gap = 0.0;
    std::optional<double> mean_ratio_mig;
    std::optional<double> mean_ratio_relevance;
    std::optional<double> mean_ratio_true_greedy;
    std::size_t submodular_instances = 0;
    std::optional<double> min_true_greedy_ratio_submodular;

    std::optional<double> mig_win_rate() const {
        if (differing == 0) {
            return std::nullopt;
        }
        return static_cast<double>(mig_wins) / static_cast<double>(differing);
    }
};

inline InstanceSpec trial_spec(const TrialConfig& cfg, std::size_t trial) {
    InstanceSpec spec;
    spec.family = cfg.family;
    spec.n = cfg.n;
    spec.params = cfg.params;
    spec.relevance = cfg.relevance;
    spec.feature_corr = cfg.feature_corr;
    // Trial t draws from its own stream, so results ignore scheduling.
    std::mt19937_64 mix = detail::trial_rng(cfg.seed, trial + 1);
    spec.seed = mix();
    return spec;
}

/**
 * Runs both greedy strategies on cfg.trials generated instances and scores
 * them with the MI oracle. For n <= 20 every trial is also compared with the
 * brute-force optimum; for n <= 10 the MI set function is checked for
 * submodularity, and the (1 - 1/e) bound of true-marginal greedy is tracked on
 * instances that pass.
 */
inline SelectionReport run_trials(const TrialConfig& cfg) {
    require(cfg.trials >= 1, ErrorKind::validation, "trials must be >= 1");
    require(cfg.k >= 1 && cfg.k <= cfg.n, ErrorKind::range, "k outside [1, n]");

    SelectionReport report;
    report.config = cfg;
    report.results.resize(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
        const GaussianInstance inst = gen_instance(trial_spec(cfg, t));
        TrialResult& r = report.results[t];
        r.trial = t;
        r.projected = inst.projected;
        r.relevance_set = greedy_select(Strategy::relevance, cfg.k, inst);
        r.mig_set = greedy_select(Strategy::mig, cfg.k, inst);
        r.mi_relevance = gaussian_mi(r.relevance_set, inst);
        r.mi_mig = gaussian_mi(r.mig_set, inst);

        IndexList a = r.relevance_set;
        IndexList b = r.mig_set;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        r.differ = a != b;
        if (r.differ && r.mi_mig > r.mi_relevance) {
            r.outcome = Outcome::mig_wins;
        } else if (r.differ && r.mi_relevance > r.mi_mig) {
            r.outcome = Outcome::relevance_wins;
        }

        if (cfg.n <= kEnumerationBound) {
            r.mi_best = gaussian_mi(brute_force_best(cfg.k, inst), inst);
            r.mi_true_greedy = gaussian_mi(greedy_true_mi(cfg.k, inst), inst);
        }
        if (cfg.n <= 10) {
            r.submodular = mi_is_submodular(inst);
        }
    });

    double ratio_mig = 0.0;
    double ratio_rel = 0.0;
    double ratio_true = 0.0;
    std::size_t ratio_count = 0;
    for (const auto& r : report.results) {
        report.differing += r.differ ? 1 : 0;
        report.mig_wins += r.outcome == Outcome::mig_wins ? 1 : 0;
        report.relevance_wins += r.outcome == Outcome::relevance_wins ? 1 : 0;
        report.mean_mi_mig += r.mi_mig;
        report.mean_mi_relevance += r.mi_relevance;
        if (r.mi_best && *r.mi_best > 0.0) {
            ratio_mig += r.mi_mig / *r.mi_best;
            ratio_rel += r.mi_relevance / *r.mi_best;
            ratio_true += *r.mi_true_greedy / *r.mi_best;
            ++ratio_count;
            if (r.submodular.value_or(false)) {
                ++report.submodular_instances;
                const double ratio = *r.mi_true_greedy / *r.mi_best;
                report.min_true_greedy_ratio_submodular =
                    std::min(report.min_true_greedy_ratio_submodular.value_or(ratio), ratio);
            }
        }
    }
    report.ties = cfg.trials - report.mig_wins - report.relevance_wins;
    const auto trials = static_cast<double>(cfg.trials);
    report.mean_mi_mig /= trials;
    report.mean_mi_relevance /= trials;
    report.mean_mi_gap = report.mean_mi_mig - report.mean_mi_relevance;
    if (ratio_count > 0) {
        const auto rc = static_cast<double>(ratio_count);
        report.mean_ratio_mig = ratio_mig / rc;
        report.mean_ratio_relevance = ratio_rel / rc;
        report.mean_ratio_true_greedy = ratio_true / rc;
    }
    return report;
}

// ---------------------------------------------------------------------------
// JSON

inline FamilyParams params_from_json(const nlohmann::json& j) {
    FamilyParams p;
    p.cluster_size = j.value("cluster_size", p.cluster_size);
    p.cluster_corr_min = j.value("cluster_corr_min", p.cluster_corr_min);
    p.cluster_corr_max = j.value("cluster_corr_max", p.cluster_corr_max);
    p.top_relevance_min = j.value("top_relevance_min", p.top_relevance_min);
    p.top_relevance_max = j.value("top_relevance_max", p.top_relevance_max);
    p.other_relevance_min = j.value("other_relevance_min", p.other_relevance_min);
    p.other_relevance_max = j.value("other_relevance_max", p.other_relevance_max);
    p.relevance_min = j.value("relevance_min", p.relevance_min);
    p.relevance_max = j.value("relevance_max", p.relevance_max);
    p.latent_extra = j.value("latent_extra", p.latent_extra);
    return p;
}

inline nlohmann::ordered_json params_to_json(const FamilyParams& p) {
    return nlohmann::ordered_json{{"cluster_size", p.cluster_size},
                                  {"cluster_corr_min", p.cluster_corr_min},
                                  {"cluster_corr_max", p.cluster_corr_max},
                                  {"top_relevance_min", p.top_relevance_min},
                                  {"top_relevance_max", p.top_relevance_max},
                                  {"other_relevance_min", p.other_relevance_min},
                                  {"other_relevance_max", p.other_relevance_max},
                                  {"relevance_min", p.relevance_min},
                                  {"relevance_max", p.relevance_max},
                                  {"latent_extra", p.latent_extra}};
}

/// Lab config document; the seed is supplied separately.
inline TrialConfig trial_config_from_json(const nlohmann::json& j) {
    TrialConfig cfg;
    try {
        cfg.family = parse_family(j.value("family", std::string(to_string(cfg.family))));
        cfg.trials = j.value("trials", cfg.trials);
        cfg.n = j.value("n", cfg.n);
        cfg.k = j.value("k", cfg.k);
        if (j.contains("params")) {
            cfg.params = params_from_json(j.at("params"));
        }
        if (j.contains("relevance")) {
            cfg.relevance = j.at("relevance").get<std::vector<double>>();
        }
        if (j.contains("feature_corr")) {
            for (const auto& row : j.at("feature_corr")) {
                for (const auto& v : row) {
                    cfg.feature_corr.push_back(v.get<double>());
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, std::string("bad lab config: ") + e.what());
    }
    return cfg;
}

inline nlohmann::ordered_json to_json(const SelectionReport& rep) {
    using J = nlohmann::ordered_json;
    const auto opt = [](const std::optional<double>& v) { return v ? J(*v) : J(nullptr); };
    constexpr double kNatsToBits = 1.4426950408889634;

    J trials = J::array();
    for (const auto& r : rep.results) {
        trials.push_back(J{{"trial", r.trial},
                           {"relevance_set", r.relevance_set},
                           {"mig_set", r.mig_set},
                           {"mi_relevance", r.mi_relevance},
                           {"mi_mig", r.mi_mig},
                           {"mi_best", opt(r.mi_best)},
                           {"mi_true_greedy", opt(r.mi_true_greedy)},
                           {"outcome", r.outcome == Outcome::mig_wins         ? "mig"
                                       : r.outcome == Outcome::relevance_wins ? "relevance"
                                                                              : "tie"},
                           {"projected", r.projected}});
    }
    const auto& c = rep.config;
    return J{{"config",
              J{{"family", to_string(c.family)},
                {"trials", c.trials},
                {"n", c.n},
                {"k", c.k},
                {"seed", c.seed},
                {"params", params_to_json(c.params)}}},
             {"summary",
              J{{"differing_trials", rep.differing},
                {"mig_wins", rep.mig_wins},
                {"relevance_wins", rep.relevance_wins},
                {"ties", rep.ties},
                {"mig_win_rate", opt(rep.mig_win_rate())},
                {"mean_mi_mig_nats", rep.mean_mi_mig},
                {"mean_mi_relevance_nats", rep.mean_mi_relevance},
                {"mean_mi_gap_nats", rep.mean_mi_gap},
                {"mean_mi_mig_bits", rep.mean_mi_mig * kNatsToBits},
                {"mean_mi_relevance_bits", rep.mean_mi_relevance * kNatsToBits},
                {"mean_ratio_mig_to_best", opt(rep.mean_ratio_mig)},
                {"mean_ratio_relevance_to_best", opt(rep.mean_ratio_relevance)},
                {"mean_ratio_true_greedy_to_best", opt(rep.mean_ratio_true_greedy)},
                {"submodular_instances", rep.submodular_instances},
                {"min_true_greedy_ratio_on_submodular", opt(rep.min_true_greedy_ratio_submodular)}}},
             {"trials", trials}};
}

}  // namespace comi::lab
