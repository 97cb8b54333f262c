#pragma once

#include <string>
#include <string_view>

namespace sae {

// Hex-encoded SHA-256 digest. Used for context snapshot hashes, cache
// checksums and run ids.
std::string sha256_hex(std::string_view data);

}  // namespace sae
