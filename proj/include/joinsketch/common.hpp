// Shared aliases and the library-wide error type.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace joinsketch {

using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;
using u128 = unsigned __int128;

enum class ErrorKind {
  empty_relation,
  out_of_range,
  schema_mismatch,
  invalid_query,
  invalid_instance,
  overflow,
  io,
  unsupported,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

// 64-bit finalizer used for hashing and stream derivation. Bijective.
inline constexpr u64 mix64(u64 z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace joinsketch
