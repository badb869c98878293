#pragma once

#include <algorithm>
#include <cctype>
#include <cstring>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fincover/errors.hpp"
#include "fincover/fins.hpp"

namespace fincover {

// Letters are nonzero signed generator indices: +(i+1) is generator i,
// -(i+1) its inverse. CLI rendering uses the alphabet x, y, z, a, b, ...
// with capitals for inverses (rank <= 26).
using Word = std::vector<int>;

inline constexpr const char* kWordAlphabet = "xyzabcdefghijklmnopqrstuvw";

struct CyclicWord {
  // Canonical representative: lexicographically least rotation.
  Word letters;

  int length() const { return static_cast<int>(letters.size()); }
  friend auto operator<=>(const CyclicWord&, const CyclicWord&) = default;
};

inline Word inverse_word(const Word& w) {
  Word out;
  out.reserve(w.size());
  for (auto it = w.rbegin(); it != w.rend(); ++it) out.push_back(-*it);
  return out;
}

inline Word free_reduce(const Word& w) {
  Word out;
  for (int g : w) {
    if (g == 0) throw Error(ErrorCode::ParseError, "zero letter in word");
    if (!out.empty() && out.back() == -g)
      out.pop_back();
    else
      out.push_back(g);
  }
  return out;
}

inline Word least_rotation(const Word& w) {
  const int n = static_cast<int>(w.size());
  if (n == 0) return w;
  int best = 0;
  for (int i = 1; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      int a = w[(i + j) % n], b = w[(best + j) % n];
      if (a != b) {
        if (a < b) best = i;
        break;
      }
    }
  }
  Word out(w.begin() + best, w.end());
  out.insert(out.end(), w.begin(), w.begin() + best);
  return out;
}

inline CyclicWord make_cyclic(const Word& w) { return CyclicWord{least_rotation(w)}; }

// Strips the conjugating prefix: returns (core, conjugator) with
// input = conjugator . core . conjugator^{-1} after free reduction.
inline std::pair<CyclicWord, Word> cyclic_reduce(const Word& raw) {
  Word w = free_reduce(raw);
  Word conj;
  size_t lo = 0, hi = w.size();
  while (hi - lo >= 2 && w[lo] == -w[hi - 1]) {
    conj.push_back(w[lo]);
    ++lo;
    --hi;
  }
  Word core(w.begin() + static_cast<long>(lo), w.begin() + static_cast<long>(hi));
  if (core.empty()) throw Error(ErrorCode::EmptyWord, "word is trivial after cyclic reduction");
  return {make_cyclic(core), conj};
}

inline bool is_cyclically_reduced(const Word& w) {
  if (w.empty()) return false;
  const int n = static_cast<int>(w.size());
  for (int i = 0; i < n; ++i) {
    if (w[i] == 0) return false;
    if (w[i] == -w[(i + 1) % n]) return false;
  }
  return true;
}

// Smallest period p dividing the length; returns (root, exponent).
inline std::pair<CyclicWord, int> primitive_root(const CyclicWord& w) {
  const int n = w.length();
  for (int p = 1; p <= n; ++p) {
    if (n % p != 0) continue;
    bool period = true;
    for (int i = 0; i + p < n && period; ++i)
      if (w.letters[i] != w.letters[i + p]) period = false;
    if (period) return {make_cyclic(Word(w.letters.begin(), w.letters.begin() + p)), n / p};
  }
  return {w, 1};
}

// Equal primitive roots up to rotation, or up to rotation of the inverse.
inline bool commensurable_words(const Word& a, const Word& b) {
  CyclicWord ra = primitive_root(cyclic_reduce(a).first).first;
  CyclicWord rb = primitive_root(cyclic_reduce(b).first).first;
  return ra == rb || ra == make_cyclic(inverse_word(rb.letters));
}

struct RigidityReport {
  bool sufficient = false;   // never claims "not rigid": the alternative is Unknown
  int witness_word = -1;     // index of a word whose line carries every triple
  int required = 0;          // 2r(2r-1)^2
  int best_found = 0;        // best coverage over the words
};

inline std::int64_t triple_key(int rank, int a, int b, int c) {
  auto enc = [&](int g) { return g > 0 ? g - 1 : rank - g - 1; };  // 0..2r-1
  return (static_cast<std::int64_t>(enc(a)) * 2 * rank + enc(b)) * 2 * rank + enc(c);
}

// Sufficient condition: some cyclic word's bi-infinite power contains every
// reduced word of length 3 as a subsegment (read in either direction).
inline RigidityReport rigidity_sufficient(int rank, const std::vector<Word>& words) {
  if (rank < 1) throw Error(ErrorCode::ParseError, "rank must be positive");
  RigidityReport rep;
  rep.required = 2 * rank * (2 * rank - 1) * (2 * rank - 1);
  for (size_t wi = 0; wi < words.size(); ++wi) {
    const Word& w = words[wi];
    if (w.empty()) throw Error(ErrorCode::EmptyWord, "empty word");
    if (!is_cyclically_reduced(w))
      throw Error(ErrorCode::ParseError, "word is not cyclically reduced");
    const int n = static_cast<int>(w.size());
    std::set<std::int64_t> seen;
    for (int i = 0; i < n; ++i) {
      int a = w[i % n], b = w[(i + 1) % n], c = w[(i + 2) % n];
      seen.insert(triple_key(rank, a, b, c));
      seen.insert(triple_key(rank, -c, -b, -a));  // the line read backwards
    }
    int found = static_cast<int>(seen.size());
    if (found > rep.best_found) rep.best_found = found;
    if (found == rep.required) {
      rep.sufficient = true;
      rep.witness_word = static_cast<int>(wi);
      return rep;
    }
  }
  return rep;
}

// Rose with `rank` petals; each word becomes a fin with a fresh colour per
// orientation. Words must be cyclically reduced and pairwise non-commensurable.
inline GraphWithFins pattern_to_fins(int rank, const std::vector<Word>& words) {
  if (rank < 1 || rank > 26) throw Error(ErrorCode::ParseError, "rank must be in 1..26");
  for (const Word& w : words) {
    if (free_reduce(w).empty()) throw Error(ErrorCode::EmptyWord, "empty word");
    if (!is_cyclically_reduced(w))
      throw Error(ErrorCode::ParseError, "word is not cyclically reduced");
    for (int g : w)
      if (g == 0 || g > rank || g < -rank)
        throw Error(ErrorCode::ParseError, "letter outside rank");
  }
  for (size_t i = 0; i < words.size(); ++i)
    for (size_t j = i + 1; j < words.size(); ++j)
      if (commensurable_words(words[i], words[j]))
        throw Error(ErrorCode::CommensurableWords,
                    "words " + std::to_string(i) + " and " + std::to_string(j) +
                        " span commensurable lines");
  std::vector<std::string> edges;
  for (int i = 0; i < rank; ++i) edges.push_back(std::string(1, kWordAlphabet[i]));
  Graph rose = make_graph({"v"}, std::move(edges), std::vector<int>(rank, 0),
                          std::vector<int>(rank, 0));
  std::vector<Fin> fins;
  for (const Word& w : words) {
    Fin f;
    for (int g : w) {
      f.id += (g > 0) ? kWordAlphabet[g - 1] : static_cast<char>(std::toupper(kWordAlphabet[-g - 1]));
      f.cycle.push_back(g > 0 ? 2 * (g - 1) : 2 * (-g - 1) + 1);
    }
    fins.push_back(std::move(f));
  }
  return build_graph_with_fins(std::move(rose), std::move(fins));
}

inline Word parse_letter_word(const std::string& s) {
  Word w;
  for (char ch : s) {
    const char* alpha = kWordAlphabet;
    bool inv = std::isupper(static_cast<unsigned char>(ch)) != 0;
    char low = inv ? static_cast<char>(std::tolower(static_cast<unsigned char>(ch))) : ch;
    const char* pos = std::strchr(alpha, low);
    if (!pos) throw Error(ErrorCode::ParseError, std::string("bad letter '") + ch + "'");
    int idx = static_cast<int>(pos - alpha) + 1;
    w.push_back(inv ? -idx : idx);
  }
  return w;
}

inline std::string render_letter_word(const Word& w) {
  std::string s;
  for (int g : w)
    s += (g > 0) ? kWordAlphabet[g - 1] : static_cast<char>(std::toupper(kWordAlphabet[-g - 1]));
  return s;
}

// Deterministic sampler: modular draws from a seeded mt19937_64, no
// distribution objects (their outputs are implementation defined).
inline Word random_reduced_word(int rank, int length, std::mt19937_64& rng) {
  Word w;
  w.reserve(static_cast<size_t>(length));
  while (static_cast<int>(w.size()) < length) {
    int pick = static_cast<int>(rng() % (2 * rank)) + 1;  // 1..2r
    int g = pick <= rank ? pick : rank - pick;            // +1..+r, -1..-r
    if (!w.empty() && w.back() == -g) continue;
    w.push_back(g);
  }
  // Fix the wrap-around seam so the word is cyclically reduced.
  while (w.size() >= 2 && w.front() == -w.back()) w.pop_back();
  while (static_cast<int>(w.size()) < length) {
    int pick = static_cast<int>(rng() % (2 * rank)) + 1;
    int g = pick <= rank ? pick : rank - pick;
    if (w.back() == -g || w.front() == -g) continue;
    w.push_back(g);
  }
  return w;
}

struct RigiditySample {
  int total = 0;
  int sufficient = 0;
};

inline RigiditySample rigidity_sample(int rank, int length, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RigiditySample s;
  s.total = count;
  for (int i = 0; i < count; ++i) {
    Word w = random_reduced_word(rank, length, rng);
    if (rigidity_sufficient(rank, {w}).sufficient) ++s.sufficient;
  }
  return s;
}

}  // namespace fincover
