// Copyright (C) 2026 The comi authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "comi/error.hpp"

namespace comi::tools {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());

    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    require(ctx && EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) == 1, ErrorKind::io, "sha256 init failed");
    std::array<char, 1 << 16> buffer{};
    while (in) {
        in.read(buffer.data(), buffer.size());
        if (in.gcount() > 0) {
            EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
        }
    }
    require(!in.bad(), ErrorKind::io, "failed reading " + path.string());
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &length);

    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    for (unsigned int i = 0; i < length; ++i) {
        hex.push_back(kHex[digest[i] >> 4]);
        hex.push_back(kHex[digest[i] & 0xf]);
    }
    return hex;
}

/// Record of one invocation: everything that determines the output bytes.
/// Worker count and output destinations are left out on purpose: neither
/// changes what is written.
class RunManifest {
public:
    explicit RunManifest(std::string command) {
        doc_["tool"] = "comi";
        doc_["version"] = kToolVersion;
        doc_["command"] = std::move(command);
        doc_["flags"] = nlohmann::ordered_json::object();
        doc_["inputs"] = nlohmann::ordered_json::array();
        doc_["seed"] = nullptr;
    }

    template <typename T>
    void flag(const std::string& name, const T& value) {
        doc_["flags"][name] = value;
    }

    void input(const std::filesystem::path& path) {
        doc_["inputs"].push_back(nlohmann::ordered_json{{"path", path.string()}, {"sha256", sha256_file(path)}});
    }

    void seed(std::uint64_t value) { doc_["seed"] = value; }

    const nlohmann::ordered_json& json() const { return doc_; }

private:
    nlohmann::ordered_json doc_;
};

inline void write_json_file(const nlohmann::ordered_json& doc, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    require(static_cast<bool>(out), ErrorKind::io, "failed writing " + path.string());
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::validation, path.string() + " is not valid JSON: " + e.what());
    }
}

inline std::filesystem::path manifest_path_for(const std::filesystem::path& out) {
    return std::filesystem::path(out.string() + ".manifest.json");
}

}  // namespace comi::tools
