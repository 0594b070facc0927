#pragma once

#include <openssl/evp.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vqg/errors.hpp"

namespace vqg {

// Incremental SHA-256. Used for content-addressed cache keys and model
// weight checksums; 256 bits so distinct contents collide only with
// cryptographic-hash probability.
class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
            throw Error("sha256: init failed");
        }
    }
    ~Sha256() {
        if (ctx_) EVP_MD_CTX_free(ctx_);
    }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, size_t len) {
        if (EVP_DigestUpdate(ctx_, data, len) != 1) throw Error("sha256: update failed");
    }
    void update(std::string_view s) { update(s.data(), s.size()); }

    // Length-prefixed update: makes concatenated fields unambiguous, so
    // ("ab","c") and ("a","bc") hash differently.
    void update_field(std::string_view s) {
        uint64_t n = s.size();
        unsigned char le[8];
        for (int i = 0; i < 8; ++i) le[i] = static_cast<unsigned char>((n >> (8 * i)) & 0xff);
        update(le, 8);
        update(s);
    }

    std::string hex_digest() {
        unsigned char out[EVP_MAX_MD_SIZE];
        unsigned int n = 0;
        if (EVP_DigestFinal_ex(ctx_, out, &n) != 1) throw Error("sha256: final failed");
        static const char* hexc = "0123456789abcdef";
        std::string hex;
        hex.reserve(2 * n);
        for (unsigned int i = 0; i < n; ++i) {
            hex.push_back(hexc[out[i] >> 4]);
            hex.push_back(hexc[out[i] & 0xf]);
        }
        return hex;
    }
};

inline std::string sha256_hex(std::string_view data) {
    Sha256 h;
    h.update(data);
    return h.hex_digest();
}

// Hash of an ordered field tuple, unambiguous under concatenation.
inline std::string sha256_fields(const std::vector<std::string_view>& fields) {
    Sha256 h;
    for (const auto& f : fields) h.update_field(f);
    return h.hex_digest();
}

} // namespace vqg
