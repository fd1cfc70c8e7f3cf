#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cutwalk {

// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

// 64-bit FNV-1a; used as the payload hash in run manifests.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

}  // namespace cutwalk
