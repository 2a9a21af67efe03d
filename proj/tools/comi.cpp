// Copyright (C) 2026 The comi authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Exit codes: 0 success, 1 I/O failure, 2 validation.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "comi/comi.hpp"
#include "manifest.hpp"

using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;

void check_positive(long long value, const char* flag) {
    comi::require(value >= 1, comi::ErrorKind::validation, std::string(flag) + " must be >= 1, got " + std::to_string(value));
}

void check_non_negative(long long value, const char* flag) {
    comi::require(value >= 0, comi::ErrorKind::validation, std::string(flag) + " must be >= 0, got " + std::to_string(value));
}

struct PipelineFlags {
    std::string context;
    std::string query;
    long long rate = 32;
    std::string scope = "representatives";
    long long min_group = 1;
};

comi::CompressionConfig resolve(const PipelineFlags& f, std::size_t threads) {
    check_positive(f.rate, "--rate");
    check_positive(f.min_group, "--min-group");
    comi::CompressionConfig cfg;
    cfg.rate = static_cast<std::size_t>(f.rate);
    cfg.min_group_size = static_cast<std::size_t>(f.min_group);
    cfg.redundancy_scope = comi::parse_scope(f.scope);
    cfg.threads = threads;
    return cfg;
}

comi::tools::RunManifest pipeline_manifest(const std::string& command, const PipelineFlags& f) {
    comi::tools::RunManifest manifest(command);
    manifest.flag("rate", f.rate);
    manifest.flag("scope", f.scope);
    manifest.flag("min_group", f.min_group);
    manifest.input(f.context);
    manifest.input(f.query);
    return manifest;
}

/// Reads scores from {"scores":[...]}, a bare number array, a GainRecord
/// array, or the {"groups":[...]} document written by `comi score`.
std::vector<double> read_scores(const std::string& path, const std::string& field) {
    const auto doc = comi::tools::read_json_file(path);
    try {
        const nlohmann::json* list = &doc;
        if (doc.is_object() && doc.contains("scores")) {
            list = &doc.at("scores");
        } else if (doc.is_object() && doc.contains("groups")) {
            list = &doc.at("groups");
        }
        comi::require(list->is_array(), comi::ErrorKind::validation, path + ": no score list found");
        std::vector<double> scores;
        for (const auto& item : *list) {
            scores.push_back(item.is_object() ? item.at(field).get<double>() : item.get<double>());
        }
        return scores;
    } catch (const nlohmann::json::exception& e) {
        comi::fail(comi::ErrorKind::validation, path + ": " + e.what());
    }
}

std::vector<int> read_labels(const std::string& path) {
    const auto doc = comi::tools::read_json_file(path);
    try {
        return doc.at("labels").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        comi::fail(comi::ErrorKind::validation, path + ": " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Marginal-information-gain context compression kernel and lab"};
    app.require_subcommand(1);
    app.set_version_flag("--version", comi::tools::kToolVersion);

    std::size_t threads = 1;
    app.add_option("--threads", threads, "Worker threads (output is identical for any value)")
        ->envname("COMI_THREADS")
        ->check(CLI::PositiveNumber);

    // compress
    PipelineFlags compress_flags;
    std::string compress_out;
    std::optional<std::string> trace_out;
    auto* compress = app.add_subcommand("compress", "Compress a context against a query");
    compress->fallthrough();
    compress->add_option("--context", compress_flags.context, "Context .cemb")->required();
    compress->add_option("--query", compress_flags.query, "Query .cemb")->required();
    compress->add_option("--rate", compress_flags.rate, "Compression rate")->required();
    compress->add_option("--scope", compress_flags.scope, "representatives|all_tokens");
    compress->add_option("--min-group", compress_flags.min_group, "Minimum group size");
    compress->add_option("--out", compress_out, "Compressed .cemb")->required();
    compress->add_option("--trace", trace_out, "Trace JSON");

    // score
    PipelineFlags score_flags;
    std::string score_out;
    auto* score = app.add_subcommand("score", "Per-token and per-group MIG records without merging");
    score->fallthrough();
    score->add_option("--context", score_flags.context, "Context .cemb")->required();
    score->add_option("--query", score_flags.query, "Query .cemb")->required();
    score->add_option("--rate", score_flags.rate, "Compression rate used to form groups");
    score->add_option("--scope", score_flags.scope, "representatives|all_tokens");
    score->add_option("--min-group", score_flags.min_group, "Minimum group size");
    score->add_option("--out", score_out, "Scores JSON")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "Diagnostic metrics");
    eval->require_subcommand(1);
    eval->fallthrough();
    std::optional<std::string> eval_manifest;
    eval->add_option("--manifest", eval_manifest, "Write a run manifest here");
    std::string auc_scores;
    std::string auc_labels;
    std::string auc_field = "gain";
    auto* eval_auc = eval->add_subcommand("auc", "AUC of scores against binary labels");
    eval_auc->fallthrough();
    eval_auc->add_option("--scores", auc_scores, "Scores JSON")->required();
    eval_auc->add_option("--labels", auc_labels, "Labels JSON")->required();
    eval_auc->add_option("--field", auc_field, "Record field when scores are GainRecords");
    std::string red_emb;
    std::optional<std::string> red_scores;
    std::optional<double> red_ratio;
    std::string red_field = "gain";
    auto* eval_red = eval->add_subcommand("redundancy", "Average pairwise cosine of embeddings");
    eval_red->fallthrough();
    eval_red->add_option("--emb", red_emb, "Embeddings .cemb")->required();
    auto* red_scores_opt = eval_red->add_option("--scores", red_scores, "Scores JSON for retention");
    auto* red_ratio_opt = eval_red->add_option("--ratio", red_ratio, "Retention ratio in (0, 1]");
    red_scores_opt->needs(red_ratio_opt);
    red_ratio_opt->needs(red_scores_opt);
    eval_red->add_option("--field", red_field, "Record field when scores are GainRecords");

    // lab
    std::string lab_config;
    std::optional<std::uint64_t> lab_seed;
    std::string lab_out;
    auto* lab = app.add_subcommand("lab", "Greedy MIG vs relevance under the Gaussian MI oracle");
    lab->fallthrough();
    lab->add_option("--config", lab_config, "Lab config JSON")->required();
    lab->add_option("--seed", lab_seed, "Seed")->required();
    lab->add_option("--out", lab_out, "Report JSON")->required();

    // cost
    long long cost_context = 0;
    long long cost_query = 0;
    long long cost_answer = 0;
    long long cost_rate = 32;
    std::string cost_dims = "7b";
    bool cost_no_lsa = false;
    std::optional<std::string> cost_manifest;
    auto* cost = app.add_subcommand("cost", "Analytic FLOPs report");
    cost->fallthrough();
    cost->add_option("--context-len", cost_context, "Original context length")->required();
    cost->add_option("--query-len", cost_query, "Query length")->required();
    cost->add_option("--answer-len", cost_answer, "Answer length")->required();
    cost->add_option("--rate", cost_rate, "Compression rate")->required();
    cost->add_option("--dims", cost_dims, "Preset (7b, toy) or dims JSON file");
    cost->add_flag("--no-lsa", cost_no_lsa, "Leave out the alignment-layer placeholder");
    cost->add_option("--manifest", cost_manifest, "Write a run manifest here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (compress->parsed()) {
            const auto cfg = resolve(compress_flags, threads);
            const auto context = comi::read_embeddings_file(compress_flags.context);
            const auto query = comi::read_embeddings_file(compress_flags.query);
            auto manifest = pipeline_manifest("compress", compress_flags);
            const auto result = comi::compress(context, query, cfg);
            comi::write_embeddings_file(result.tokens, compress_out);
            if (trace_out) {
                comi::tools::write_json_file(comi::compression_trace(result), *trace_out);
            }
            comi::tools::write_json_file(manifest.json(), comi::tools::manifest_path_for(compress_out));
        } else if (score->parsed()) {
            const auto cfg = resolve(score_flags, threads);
            const auto context = comi::read_embeddings_file(score_flags.context);
            const auto query = comi::read_embeddings_file(score_flags.query);
            comi::require(context.cols() == query.cols(), comi::ErrorKind::shape,
                          "context and query dimensions differ");
            auto manifest = pipeline_manifest("score", score_flags);
            const auto qbar = comi::pool_query(query);
            const auto realloc = comi::reallocate(context, qbar, cfg);
            const auto offsets = realloc.after.offsets();
            std::vector<std::vector<comi::GainRecord>> per_group(realloc.after.groups());
            comi::parallel_for(per_group.size(), threads, [&](std::size_t g) {
                per_group[g] = comi::intra_group_gains(comi::slice(context, offsets[g], realloc.after.sizes[g]), qbar);
            });
            Json tokens = Json::array();
            for (const auto& group : per_group) {
                for (const auto& rec : group) {
                    tokens.push_back(rec);
                }
            }
            Json doc{{"groups", realloc.gains},
                     {"tokens", tokens},
                     {"reallocation", comi::reallocation_trace(realloc)}};
            comi::tools::write_json_file(doc, score_out);
            comi::tools::write_json_file(manifest.json(), comi::tools::manifest_path_for(score_out));
        } else if (eval_auc->parsed()) {
            comi::tools::RunManifest manifest("eval auc");
            manifest.flag("field", auc_field);
            manifest.input(auc_scores);
            manifest.input(auc_labels);
            comi::LabeledScores ls{read_scores(auc_scores, auc_field), read_labels(auc_labels)};
            std::cout << Json{{"auc", comi::auc(ls)}}.dump() << '\n';
            if (eval_manifest) {
                comi::tools::write_json_file(manifest.json(), *eval_manifest);
            }
        } else if (eval_red->parsed()) {
            comi::tools::RunManifest manifest("eval redundancy");
            manifest.input(red_emb);
            auto emb = comi::read_embeddings_file(red_emb);
            if (red_scores) {
                manifest.input(*red_scores);
                manifest.flag("ratio", *red_ratio);
                manifest.flag("field", red_field);
                const auto scores = read_scores(*red_scores, red_field);
                comi::require(scores.size() == emb.rows(), comi::ErrorKind::shape,
                              std::to_string(scores.size()) + " scores for " + std::to_string(emb.rows()) + " rows");
                const auto keep = comi::retention_select(scores, *red_ratio);
                emb = comi::select_rows(emb, keep);
            }
            std::cout << Json{{"redundancy", comi::redundancy_score(emb)}, {"k", emb.rows()}}.dump() << '\n';
            if (eval_manifest) {
                comi::tools::write_json_file(manifest.json(), *eval_manifest);
            }
        } else if (lab->parsed()) {
            comi::tools::RunManifest manifest("lab");
            manifest.input(lab_config);
            manifest.seed(*lab_seed);
            auto cfg = comi::lab::trial_config_from_json(comi::tools::read_json_file(lab_config));
            cfg.seed = *lab_seed;
            cfg.threads = threads;
            const auto report = comi::lab::run_trials(cfg);
            Json doc = comi::lab::to_json(report);
            doc["manifest"] = manifest.json();
            comi::tools::write_json_file(doc, lab_out);
        } else if (cost->parsed()) {
            check_positive(cost_context, "--context-len");
            check_non_negative(cost_query, "--query-len");
            check_non_negative(cost_answer, "--answer-len");
            check_positive(cost_rate, "--rate");
            comi::tools::RunManifest manifest("cost");
            manifest.flag("context_len", cost_context);
            manifest.flag("query_len", cost_query);
            manifest.flag("answer_len", cost_answer);
            manifest.flag("rate", cost_rate);
            manifest.flag("dims", cost_dims);
            manifest.flag("lsa", !cost_no_lsa);
            comi::cost::ModelDims dims;
            // Bare names are presets; anything that looks like a path is read as a dims document.
            if (cost_dims.find_first_of("/.") == std::string::npos) {
                dims = comi::cost::dims_preset(cost_dims);
            } else {
                manifest.input(cost_dims);
                dims = comi::cost::dims_from_json(comi::tools::read_json_file(cost_dims));
            }
            const auto report = comi::cost::end_to_end_report(
                static_cast<std::uint64_t>(cost_context), static_cast<std::uint64_t>(cost_query),
                static_cast<std::uint64_t>(cost_answer), static_cast<std::uint64_t>(cost_rate), dims, !cost_no_lsa);
            std::cout << comi::cost::to_json(report).dump(2) << '\n';
            if (cost_manifest) {
                comi::tools::write_json_file(manifest.json(), *cost_manifest);
            }
        }
    } catch (const comi::Error& e) {
        std::cerr << "comi: " << e.what() << '\n';
        return e.kind() == comi::ErrorKind::io ? kExitIo : kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "comi: " << e.what() << '\n';
        return kExitIo;
    }
    return 0;
}
