#include "fairsched/util.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <openssl/evp.h>

#include "fairsched/errors.hpp"

namespace fairsched::util {

int worker_count() {
    if (const char* env = std::getenv("FAIRSCHED_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(int begin, int end, const std::function<void(int)>& body) {
    const int total = end - begin;
    if (total <= 0) return;
    const int workers = std::min(worker_count(), total);
    if (workers <= 1) {
        for (int i = begin; i < end; ++i) body(i);
        return;
    }
    std::atomic<int> next{begin};
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < end; i = next.fetch_add(1)) body(i);
        });
    }
    for (auto& t : threads) t.join();
}

namespace {

std::string sha256_hex(const unsigned char* data, std::size_t len) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data, len) != 1 || EVP_DigestFinal_ex(ctx, digest, &digest_len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw NumericError("sha256: digest computation failed");
    }
    EVP_MD_CTX_free(ctx);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out = "sha256:";
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

} // namespace

std::string sha256_bytes(const std::string& bytes) {
    return sha256_hex(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("sha256_file: cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_bytes(bytes);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace fairsched::util
