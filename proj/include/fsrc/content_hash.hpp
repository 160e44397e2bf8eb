#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fsrc {

/// Lower-case hex SHA-256 digest of `data`.
std::string sha256_hex(std::string_view data);

/// 64-bit FNV-1a. Stable across platforms; used for token bucketing.
std::uint64_t fnv1a64(std::string_view data) noexcept;

}  // namespace fsrc
