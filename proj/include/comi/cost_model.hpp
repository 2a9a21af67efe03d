// Copyright (C) 2026 The comi authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "comi/error.hpp"
#include "comi/realloc.hpp"

// FLOP counting convention used throughout this header:
//   * one multiply-accumulate is 2 FLOPs, so a length-d dot product (and a
//     cosine over cached norms) costs 2d;
//   * each sort comparison and each attention-softmax exponential costs 1 FLOP;
//   * elementwise work (norms, residuals, activations, means, and the small
//     per-group and per-token softmaxes of the compression stage) is not counted;
//   * attention for a token covers the keys cached before it is appended.
// Counts are exact unsigned 64-bit integers; overflow raises a range error.

namespace comi::cost {

using Flops = std::uint64_t;

namespace detail {

inline Flops add(Flops a, Flops b) {
    Flops r = 0;
    require(!__builtin_add_overflow(a, b, &r), ErrorKind::range, "FLOP count overflows 64 bits");
    return r;
}

inline Flops mul(Flops a, Flops b) {
    Flops r = 0;
    require(!__builtin_mul_overflow(a, b, &r), ErrorKind::range, "FLOP count overflows 64 bits");
    return r;
}

inline Flops ceil_log2(Flops m) {
    Flops bits = 0;
    while ((Flops{1} << bits) < m) {
        ++bits;
    }
    return bits;
}

}  // namespace detail

struct ModelDims {
    Flops layers = 0;
    Flops d_model = 0;
    Flops d_ff = 0;
    Flops n_heads = 0;
    Flops vocab = 0;

    void validate() const {
        require(layers > 0 && d_model > 0 && d_ff > 0 && n_heads > 0 && vocab > 0, ErrorKind::validation,
                "model dims must all be positive");
        require(d_model % n_heads == 0, ErrorKind::validation, "d_model must be divisible by n_heads");
    }

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// LLaMA-2-7B shaped decoder.
inline constexpr ModelDims kDims7B{32, 4096, 11008, 32, 32000};
/// Tiny dims small enough to count by hand.
inline constexpr ModelDims kDimsToy{1, 4, 8, 2, 10};

inline ModelDims dims_preset(std::string_view name) {
    if (name == "7b") {
        return kDims7B;
    }
    if (name == "toy") {
        return kDimsToy;
    }
    fail(ErrorKind::validation, "unknown dims preset \"" + std::string(name) + "\"");
}

inline ModelDims dims_from_json(const nlohmann::json& j) {
    ModelDims d;
    try {
        d.layers = j.at("layers").get<Flops>();
        d.d_model = j.at("d_model").get<Flops>();
        d.d_ff = j.at("d_ff").get<Flops>();
        d.n_heads = j.at("n_heads").get<Flops>();
        d.vocab = j.at("vocab").get<Flops>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, std::string("bad dims document: ") + e.what());
    }
    d.validate();
    return d;
}

/**
 * One decoder layer processing one token against `kv_len` cached keys:
 * QKVO projections 8d^2, scores plus weighted values 4d*kv_len, one
 * exponential per key and head n_heads*kv_len, feed-forward 4d*d_ff.
 */
inline Flops layer_token_flops(const ModelDims& dims, Flops kv_len) {
    using namespace detail;
    const Flops d = dims.d_model;
    Flops f = mul(8, mul(d, d));
    f = add(f, mul(4, mul(d, kv_len)));
    f = add(f, mul(dims.n_heads, kv_len));
    f = add(f, mul(4, mul(d, dims.d_ff)));
    return f;
}

/// `layers` layers over `tokens` tokens processed causally from an empty cache.
inline Flops causal_block_flops(const ModelDims& dims, Flops layers, Flops tokens) {
    using namespace detail;
    if (tokens == 0) {
        return 0;
    }
    // sum over j = 1..tokens of layer_token_flops(j - 1)
    const Flops d = dims.d_model;
    const Flops fixed = add(mul(8, mul(d, d)), mul(4, mul(d, dims.d_ff)));
    const Flops kv_sum = (tokens % 2 == 0) ? mul(tokens / 2, tokens - 1) : mul(tokens, (tokens - 1) / 2);
    const Flops per_key = add(mul(4, d), dims.n_heads);
    return mul(layers, add(mul(tokens, fixed), mul(per_key, kv_sum)));
}

inline Flops vocab_projection_flops(const ModelDims& dims) {
    return detail::mul(2, detail::mul(dims.d_model, dims.vocab));
}

struct CompressionFlops {
    Flops group_realloc = 0;
    Flops pooling_merge = 0;
    Flops lsa_placeholder = 0;

    Flops total() const { return detail::add(detail::add(group_realloc, pooling_merge), lsa_placeholder); }
};

/**
 * Compression stage cost over the initial equal partition.
 *
 * group_realloc: relevance of every token 2d*L_org,
 * representative relevance and peer cosines 2d*m^2, apportionment sort m*ceil(log2 m).
 * pooling_merge: per group 2d*L_i^2 (relevance plus intra-group cosines) and
 * 2d*L_i for the weighted sum.
 * lsa_placeholder: one causal decoder layer over the m compressed tokens.
 * Query pooling is additions only, so the query length does not enter.
 */
inline CompressionFlops compression_flops(Flops context_len, [[maybe_unused]] Flops query_len, Flops rate,
                                          const ModelDims& dims, bool include_lsa = true) {
    using namespace detail;
    dims.validate();
    require(context_len >= 1, ErrorKind::empty_context, "context length must be >= 1");
    require(rate >= 1, ErrorKind::validation, "rate must be >= 1");

    CompressionConfig cfg;
    cfg.rate = rate;
    const GroupPartition part = initial_partition(context_len, cfg);
    const Flops m = part.groups();
    const Flops d = dims.d_model;

    CompressionFlops out;
    out.group_realloc = add(add(mul(2 * d, context_len), mul(2 * d, mul(m, m))), mul(m, ceil_log2(m)));
    for (Flops size : part.sizes) {
        out.pooling_merge = add(out.pooling_merge, add(mul(2 * d, mul(size, size)), mul(2 * d, size)));
    }
    if (include_lsa) {
        out.lsa_placeholder = causal_block_flops(dims, 1, m);
    }
    return out;
}

struct GenerationFlops {
    Flops prefill = 0;          ///< step 0: the L_c + L_q prompt tokens
    std::vector<Flops> decode;  ///< steps 1..L_a, one new token each

    Flops decode_total() const {
        Flops t = 0;
        for (Flops f : decode) {
            t = detail::add(t, f);
        }
        return t;
    }
    Flops total() const { return detail::add(prefill, decode_total()); }
};

/// Prefill over L_c + L_q tokens, then L_a single-token steps; step i sees L_c + L_q + i - 1 cached keys.
inline GenerationFlops generation_flops(Flops compressed_len, Flops query_len, Flops answer_len, const ModelDims& dims) {
    using namespace detail;
    dims.validate();
    const Flops prompt = add(compressed_len, query_len);
    GenerationFlops out;
    if (prompt > 0) {
        out.prefill = add(causal_block_flops(dims, dims.layers, prompt), vocab_projection_flops(dims));
    }
    out.decode.reserve(answer_len);
    for (Flops i = 1; i <= answer_len; ++i) {
        const Flops kv = prompt + i - 1;
        out.decode.push_back(add(mul(dims.layers, layer_token_flops(dims, kv)), vocab_projection_flops(dims)));
    }
    return out;
}

struct CostReport {
    Flops context_len = 0;
    Flops query_len = 0;
    Flops answer_len = 0;
    Flops rate = 0;
    Flops compressed_len = 0;
    ModelDims dims;
    CompressionFlops compression;
    GenerationFlops generation;
    GenerationFlops baseline;
    double speedup_ratio = 0.0;

    Flops total() const { return detail::add(compression.total(), generation.total()); }
};

inline CostReport end_to_end_report(Flops context_len, Flops query_len, Flops answer_len, Flops rate,
                                    const ModelDims& dims, bool include_lsa = true) {
    CostReport r;
    r.context_len = context_len;
    r.query_len = query_len;
    r.answer_len = answer_len;
    r.rate = rate;
    r.dims = dims;
    r.compression = compression_flops(context_len, query_len, rate, dims, include_lsa);
    r.compressed_len = compressed_length(context_len, rate);
    r.generation = generation_flops(r.compressed_len, query_len, answer_len, dims);
    r.baseline = generation_flops(context_len, query_len, answer_len, dims);
    r.speedup_ratio = static_cast<double>(r.baseline.total()) / static_cast<double>(r.total());
    return r;
}

inline nlohmann::ordered_json to_json(const CostReport& r) {
    using J = nlohmann::ordered_json;
    return J{{"convention",
              "1 MAC = 2 FLOPs; cosine = 2d over cached norms; sort comparison and attention softmax exp = 1; elementwise ops uncounted; attention over keys cached before the token"},
             {"inputs",
              J{{"context_len", r.context_len},
                {"query_len", r.query_len},
                {"answer_len", r.answer_len},
                {"rate", r.rate},
                {"compressed_len", r.compressed_len}}},
             {"dims",
              J{{"layers", r.dims.layers},
                {"d_model", r.dims.d_model},
                {"d_ff", r.dims.d_ff},
                {"n_heads", r.dims.n_heads},
                {"vocab", r.dims.vocab}}},
             {"flops_compression",
              J{{"group_realloc", r.compression.group_realloc},
                {"pooling_merge", r.compression.pooling_merge},
                {"lsa_placeholder", r.compression.lsa_placeholder},
                {"total", r.compression.total()}}},
             {"flops_generation",
              J{{"prefill", r.generation.prefill},
                {"decode_steps", r.generation.decode},
                {"decode_total", r.generation.decode_total()},
                {"total", r.generation.total()}}},
             {"flops_baseline",
              J{{"prefill", r.baseline.prefill},
                {"decode_total", r.baseline.decode_total()},
                {"total", r.baseline.total()}}},
             {"flops_total", r.total()},
             {"speedup_ratio", r.speedup_ratio}};
}

}  // namespace comi::cost
