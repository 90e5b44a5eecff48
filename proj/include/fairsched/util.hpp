#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace fairsched::util {

/// Worker cap: FAIRSCHED_THREADS when set, otherwise hardware concurrency.
int worker_count();

/// Static-partition parallel loop over [begin, end). Results must be written
/// to index-addressed slots so the outcome is independent of thread count.
void parallel_for(int begin, int end, const std::function<void(int)>& body);

/// Hex SHA-256 of a file's bytes, prefixed "sha256:".
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(const std::string& bytes);

/// Shortest round-trip decimal form of a double (stable across runs).
std::string format_double(double v);

} // namespace fairsched::util
