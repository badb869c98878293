#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace fincover {

// Deterministic structural hashing. No pointers, no addresses, no run-to-run
// variation; every label emitted by the type machinery is a pure function of
// the input structure.
using Hash = std::uint64_t;

inline Hash hash_combine(Hash seed, Hash v) {
  // splitmix64-style mixing of the incoming value before folding it in.
  v += 0x9e3779b97f4a7c15ULL;
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
  v ^= v >> 31;
  seed ^= v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
  return seed;
}

inline Hash hash_string(const std::string& s) {
  // FNV-1a, then one mixing round.
  Hash h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hash_combine(0x5f4a7c15ULL, h);
}

inline Hash hash_int(std::int64_t v) { return hash_combine(0x1234567fULL, static_cast<Hash>(v)); }

inline Hash hash_sequence(Hash tag, const std::vector<Hash>& xs) {
  Hash h = hash_combine(tag, static_cast<Hash>(xs.size()));
  for (Hash x : xs) h = hash_combine(h, x);
  return h;
}

// Order-insensitive: callers pass a copy; sorting makes the multiset canonical.
inline Hash hash_multiset(Hash tag, std::vector<Hash> xs) {
  std::sort(xs.begin(), xs.end());
  return hash_sequence(tag, xs);
}

inline std::string hash_hex(Hash h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

}  // namespace fincover
