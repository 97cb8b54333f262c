#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sae {

using TimestampMs = std::int64_t;

// Error taxonomy. Config/data problems are distinct so the CLI can map them
// to distinct exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config: " + what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error("data: " + what) {}
};

class MalformedRequest : public Error {
 public:
  explicit MalformedRequest(const std::string& what)
      : Error("malformed request: " + what) {}
};

// splitmix64: used to derive independent RNG streams from (seed, index)
// pairs. Keeping the mixer explicit makes replicate/candidate seeding
// reproducible across platforms.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x51a299a574f2cb31ULL));
}

}  // namespace sae
