#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vip {

// Error categories map to CLI exit codes: input/config problems exit 2,
// numeric failures exit 3.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContractError : std::logic_error {
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Fans a master seed out to named sub-streams so that e.g. changing the
// replay policy never perturbs data generation or weight init.
inline std::uint64_t sub_seed(std::uint64_t master, const std::string& role) {
  std::uint64_t h = 1469598103934665603ull ^ master;
  for (char c : role) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ull;
  }
  // splitmix finalizer
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return h;
}

}  // namespace vip
