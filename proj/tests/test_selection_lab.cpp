// Copyright (C) 2026 The comi authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "comi/selection_lab.hpp"

using namespace comi;
using namespace comi::lab;

namespace {

GaussianInstance explicit_instance(std::vector<double> relevance, std::vector<double> feature_corr = {}) {
    InstanceSpec spec;
    spec.family = Family::explicit_corr;
    spec.n = relevance.size();
    spec.relevance = std::move(relevance);
    spec.feature_corr = std::move(feature_corr);
    return gen_instance(spec);
}

/// x_0, x_1 relevant at 0.6 and correlated 0.9; x_2 relevant at 0.5 and independent.
GaussianInstance redundant_top() {
    return explicit_instance({0.6, 0.6, 0.5}, {1.0, 0.9, 0.0, 0.9, 1.0, 0.0, 0.0, 0.0, 1.0});
}

GaussianInstance random_instance(std::size_t n, std::uint64_t seed) {
    InstanceSpec spec;
    spec.family = Family::random_latent;
    spec.n = n;
    spec.seed = seed;
    return gen_instance(spec);
}

template <typename Fn>
ErrorKind error_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorKind::io;
}

/// Enumerates subsets as bitmasks of popcount k, in a different order than the library.
double best_by_bitmask(std::size_t k, const GaussianInstance& inst, std::vector<std::size_t>& best_set) {
    double best = -1.0;
    for (std::uint32_t mask = (1u << inst.n) - 1;; --mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) == k) {
            std::vector<std::size_t> s;
            for (std::size_t i = 0; i < inst.n; ++i) {
                if (mask & (1u << i)) {
                    s.push_back(i);
                }
            }
            const double mi = gaussian_mi(s, inst);
            if (mi > best + 1e-13 || (std::abs(mi - best) <= 1e-13 && s < best_set)) {
                best = std::max(best, mi);
                best_set = s;
            }
        }
        if (mask == 0) {
            break;
        }
    }
    return best;
}

}  // namespace

TEST(GenInstance, SingleFeature) {
    const auto inst = explicit_instance({0.6});
    ASSERT_EQ(inst.corr.rows(), 2);
    EXPECT_DOUBLE_EQ(inst.corr(0, 1), 0.6);
    EXPECT_DOUBLE_EQ(inst.corr(1, 0), 0.6);
    EXPECT_NEAR(inst.relevance(0), 0.6, 1e-12);
    EXPECT_FALSE(inst.projected);
}

TEST(GenInstance, RedundantTopIsPositiveDefinite) {
    const auto inst = redundant_top();
    EXPECT_GT(inst.min_eigenvalue, 0.0);
    EXPECT_FALSE(inst.projected);
    for (std::size_t i = 0; i <= inst.n; ++i) {
        double sq = 0;
        for (double v : inst.embedding(i)) {
            sq += v * v;
        }
        EXPECT_NEAR(sq, 1.0, 1e-12);
        for (std::size_t j = 0; j <= inst.n; ++j) {
            EXPECT_NEAR(cosine(inst.embedding(i), inst.embedding(j)), inst.similarity(i, j), 1e-8);
        }
    }
}

TEST(GenInstance, SameSeedSameInstance) {
    for (Family f : {Family::redundant_top, Family::orthogonal, Family::random_latent}) {
        InstanceSpec spec;
        spec.family = f;
        spec.n = 7;
        spec.seed = 99;
        const auto a = gen_instance(spec);
        const auto b = gen_instance(spec);
        EXPECT_EQ(a.corr, b.corr);
        EXPECT_EQ(a.embeddings, b.embeddings);
        spec.seed = 100;
        EXPECT_NE(gen_instance(spec).corr, a.corr);
    }
}

TEST(GenInstance, InfeasibleProfileIsRejected) {
    // Two features both correlated 0.95 with y but anti-correlated with each other.
    EXPECT_EQ(error_of([] { explicit_instance({0.95, 0.95}, {1.0, -0.9, -0.9, 1.0}); }), ErrorKind::infeasible_spec);
}

TEST(GenInstance, SlightlyIndefiniteProfileIsRepaired) {
    // 0.6^2 + 0.8^2 = 1 is exactly singular; nudging it slightly over makes it indefinite.
    const auto inst = explicit_instance({0.6, 0.8005});
    EXPECT_TRUE(inst.projected);
    EXPECT_GT(inst.max_adjustment, 0.0);
    EXPECT_LE(inst.max_adjustment, kMaxProjection);
    EXPECT_GE(inst.min_eigenvalue, -1e-10);
}

TEST(GenInstance, FamiliesRespectTheirProfiles) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        InstanceSpec spec;
        spec.n = 6;
        spec.seed = seed;
        spec.family = Family::orthogonal;
        const auto orth = gen_instance(spec);
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = i + 1; j < 6; ++j) {
                EXPECT_NEAR(orth.similarity(i, j), 0.0, 1e-8);
            }
        }
        spec.family = Family::redundant_top;
        const auto top = gen_instance(spec);
        std::vector<std::size_t> cluster;
        for (std::size_t i = 0; i < 6; ++i) {
            if (top.relevance(i) >= 0.5 - 1e-9) {
                cluster.push_back(i);
            }
        }
        ASSERT_EQ(cluster.size(), 3u);
        for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t b = a + 1; b < 3; ++b) {
                EXPECT_GE(top.similarity(cluster[a], cluster[b]), 0.8 - 1e-8);
            }
        }
    }
}

TEST(GaussianMi, ClosedFormValues) {
    const std::vector<std::size_t> none;
    const std::vector<std::size_t> first = {0};
    const std::vector<std::size_t> pair01 = {0, 1};
    const std::vector<std::size_t> pair02 = {0, 2};
    EXPECT_NEAR(gaussian_mi(first, explicit_instance({0.6})), 0.2231435513, 1e-9);
    EXPECT_EQ(gaussian_mi(none, explicit_instance({0.6})), 0.0);
    const auto inst = redundant_top();
    // 2 * 0.36 / 1.9 explained; 0.36 + 0.25 explained
    EXPECT_NEAR(gaussian_mi(pair01, inst), -0.5 * std::log(1.0 - 0.72 / 1.9), 1e-12);
    EXPECT_NEAR(gaussian_mi(pair01, inst), 0.2381697238, 1e-9);
    EXPECT_NEAR(gaussian_mi(pair02, inst), -0.5 * std::log(1.0 - 0.61), 1e-12);
    EXPECT_NEAR(gaussian_mi(pair02, inst), 0.4708042699, 1e-9);
}

TEST(GaussianMi, DuplicateFeaturesAreDegenerate) {
    const auto inst = explicit_instance({0.5, 0.5}, {1.0, 1.0, 1.0, 1.0});
    const std::vector<std::size_t> both = {0, 1};
    EXPECT_EQ(error_of([&] { gaussian_mi(both, inst); }), ErrorKind::degenerate_set);
    const std::vector<std::size_t> out_of_range = {5};
    EXPECT_EQ(error_of([&] { gaussian_mi(out_of_range, inst); }), ErrorKind::range);
}

TEST(GaussianMi, MonotoneUnderAddingFeatures) {
    std::mt19937_64 rng(31);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto inst = random_instance(6, seed);
        for (std::uint32_t mask = 0; mask < 64; ++mask) {
            std::vector<std::size_t> s;
            for (std::size_t i = 0; i < 6; ++i) {
                if (mask & (1u << i)) {
                    s.push_back(i);
                }
            }
            const std::size_t add = rng() % 6;
            if (mask & (1u << add)) {
                continue;
            }
            auto bigger = s;
            bigger.push_back(add);
            EXPECT_GE(gaussian_mi(bigger, inst), gaussian_mi(s, inst) - 1e-12);
        }
    }
}

TEST(Greedy, FirstPickIsShared) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto inst = random_instance(5, seed);
        EXPECT_EQ(greedy_select(Strategy::mig, 1, inst), greedy_select(Strategy::relevance, 1, inst));
    }
}

TEST(Greedy, RedundantTopDiverges) {
    const auto inst = redundant_top();
    EXPECT_EQ(greedy_select(Strategy::relevance, 2, inst), (IndexList{0, 1}));
    EXPECT_EQ(greedy_select(Strategy::mig, 2, inst), (IndexList{0, 2}));
}

TEST(Greedy, OrthogonalFeaturesAgreeForEveryK) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        InstanceSpec spec;
        spec.family = Family::orthogonal;
        spec.n = 8;
        spec.seed = seed;
        const auto inst = gen_instance(spec);
        for (std::size_t k = 1; k <= 8; ++k) {
            EXPECT_EQ(greedy_select(Strategy::mig, k, inst), greedy_select(Strategy::relevance, k, inst));
        }
    }
}

TEST(Greedy, KOutOfRange) {
    const auto inst = redundant_top();
    EXPECT_EQ(error_of([&] { greedy_select(Strategy::mig, 0, inst); }), ErrorKind::range);
    EXPECT_EQ(error_of([&] { greedy_select(Strategy::relevance, 4, inst); }), ErrorKind::range);
}

TEST(Greedy, MigSkipsExactDuplicates) {
    // x_1 duplicates x_0; x_2 is weakly relevant but distinct.
    const auto inst = explicit_instance({0.7, 0.7, 0.1}, {1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0});
    const auto picked = greedy_select(Strategy::mig, 2, inst);
    EXPECT_EQ(picked, (IndexList{0, 2}));
}

TEST(BruteForce, Examples) {
    const auto inst = redundant_top();
    EXPECT_EQ(brute_force_best(3, inst), (IndexList{0, 1, 2}));
    EXPECT_EQ(brute_force_best(2, inst), (IndexList{0, 2}));
}

TEST(BruteForce, AgreesWithBitmaskEnumerator) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto inst = random_instance(8, seed);
        std::vector<std::size_t> other;
        const double best = best_by_bitmask(3, inst, other);
        const auto ours = brute_force_best(3, inst);
        EXPECT_NEAR(gaussian_mi(ours, inst), best, 1e-12);
        EXPECT_EQ(ours, other);
    }
}

TEST(BruteForce, DominatesGreedy) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto inst = random_instance(7, seed);
        for (std::size_t k = 1; k <= 7; ++k) {
            const double best = gaussian_mi(brute_force_best(k, inst), inst);
            EXPECT_GE(best + 1e-12, gaussian_mi(greedy_select(Strategy::mig, k, inst), inst));
            EXPECT_GE(best + 1e-12, gaussian_mi(greedy_select(Strategy::relevance, k, inst), inst));
            EXPECT_GE(best + 1e-12, gaussian_mi(greedy_true_mi(k, inst), inst));
        }
    }
}

TEST(BruteForce, EnumerationBound) {
    const auto inst = random_instance(21, 1);
    EXPECT_EQ(error_of([&] { brute_force_best(3, inst); }), ErrorKind::enumeration_bound);
}

TEST(Submodularity, TrueGreedyBoundOnSubmodularInstances) {
    std::size_t checked = 0;
    // Gaussian MI is rarely submodular; three-feature redundant clusters often are.
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        InstanceSpec spec;
        spec.n = 3;
        spec.seed = seed;
        const auto inst = gen_instance(spec);
        if (!mi_is_submodular(inst)) {
            continue;
        }
        ++checked;
        for (std::size_t k = 1; k <= 3; ++k) {
            const double best = gaussian_mi(brute_force_best(k, inst), inst);
            EXPECT_GE(gaussian_mi(greedy_true_mi(k, inst), inst), (1.0 - 1.0 / std::exp(1.0)) * best - 1e-12);
        }
    }
    EXPECT_GT(checked, 0u);
    // independent features: MI is -1/2 ln(1 - sum rho^2), which is supermodular, not submodular
    InstanceSpec spec;
    spec.family = Family::orthogonal;
    spec.n = 4;
    EXPECT_FALSE(mi_is_submodular(gen_instance(spec)));
}

TEST(Trials, OrthogonalFamilyIsAllTies) {
    TrialConfig cfg;
    cfg.family = Family::orthogonal;
    cfg.trials = 40;
    cfg.seed = 3;
    const auto rep = run_trials(cfg);
    EXPECT_EQ(rep.differing, 0u);
    EXPECT_EQ(rep.ties, 40u);
    EXPECT_FALSE(rep.mig_win_rate().has_value());
    EXPECT_TRUE(to_json(rep).at("summary").at("mig_win_rate").is_null());
}

TEST(Trials, RedundantTopFavoursMig) {
    TrialConfig cfg;
    cfg.trials = 200;
    cfg.seed = 11;
    const auto rep = run_trials(cfg);
    EXPECT_GE(rep.mean_mi_mig, rep.mean_mi_relevance);
    EXPECT_GT(rep.differing, 0u);
    for (const auto& r : rep.results) {
        EXPECT_GE(r.mi_mig, 0.0);
        EXPECT_GE(r.mi_relevance, 0.0);
        EXPECT_GE(*r.mi_best + 1e-12, std::max(r.mi_mig, r.mi_relevance));
    }
}

TEST(Trials, DeterministicAcrossRunsAndThreads) {
    TrialConfig cfg;
    cfg.trials = 64;
    cfg.seed = 5;
    const auto one = to_json(run_trials(cfg)).dump();
    EXPECT_EQ(to_json(run_trials(cfg)).dump(), one);
    cfg.threads = 4;
    EXPECT_EQ(to_json(run_trials(cfg)).dump(), one);
    cfg.seed = 6;
    EXPECT_NE(to_json(run_trials(cfg)).dump(), one);
}

TEST(Trials, ConfigJsonRoundTrip) {
    const auto j = nlohmann::json::parse(R"({"family":"redundant-top","trials":10,"n":5,"k":2,
        "params":{"cluster_size":2,"cluster_corr_min":0.85}})");
    const auto cfg = trial_config_from_json(j);
    EXPECT_EQ(cfg.family, Family::redundant_top);
    EXPECT_EQ(cfg.trials, 10u);
    EXPECT_EQ(cfg.n, 5u);
    EXPECT_EQ(cfg.k, 2u);
    EXPECT_EQ(cfg.params.cluster_size, 2u);
    EXPECT_DOUBLE_EQ(cfg.params.cluster_corr_min, 0.85);
    EXPECT_DOUBLE_EQ(cfg.params.cluster_corr_max, 0.9);
    EXPECT_EQ(error_of([] { trial_config_from_json(nlohmann::json::parse(R"({"family":"nope"})")); }),
              ErrorKind::validation);
}
