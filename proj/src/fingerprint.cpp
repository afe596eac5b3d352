#include "graphdiff/fingerprint.hpp"

#include <algorithm>
#include <bit>
#include <string_view>

#include "graphdiff/error.hpp"
#include "graphdiff/smiles.hpp"

namespace graphdiff {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

struct Hasher {
  std::uint64_t h = kFnvOffset;
  void add(std::uint64_t x) {
    for (int k = 0; k < 8; ++k) {
      h ^= (x >> (8 * k)) & 0xffU;
      h *= kFnvPrime;
    }
  }
  void add(std::string_view s) {
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= kFnvPrime;
    }
    add(static_cast<std::uint64_t>(s.size()));
  }
};

}  // namespace

int Fingerprint::popcount() const {
  int n = 0;
  for (auto w : words) n += std::popcount(w);
  return n;
}

std::vector<std::uint64_t> circular_identifiers(const MolecularGraph &g, const AtomVocab &vocab,
                                                int radius) {
  const int n = g.num_atoms();
  auto adj = g.adjacency();
  std::vector<bool> in_ring = ring_atoms(g);
  std::vector<std::uint64_t> current(n), out;
  out.reserve(static_cast<std::size_t>(n) * (radius + 1));
  for (int i = 0; i < n; ++i) {
    Hasher h;
    h.add(vocab.symbol(g.atom(i)));
    h.add(static_cast<std::uint64_t>(adj[i].size()));
    bool aromatic = std::any_of(adj[i].begin(), adj[i].end(),
                                [](const auto &p) { return p.second == BondKind::kAromatic; });
    h.add(static_cast<std::uint64_t>(aromatic));
    h.add(static_cast<std::uint64_t>(in_ring[i]));
    current[i] = h.h;
    out.push_back(current[i]);
  }
  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next(n);
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<int, std::uint64_t>> env;
      for (auto [j, kind] : adj[i]) env.emplace_back(static_cast<int>(kind), current[j]);
      std::sort(env.begin(), env.end());
      Hasher h;
      h.add(static_cast<std::uint64_t>(r));
      h.add(current[i]);
      for (auto [kind, id] : env) {
        h.add(static_cast<std::uint64_t>(kind));
        h.add(id);
      }
      next[i] = h.h;
      out.push_back(next[i]);
    }
    current = std::move(next);
  }
  return out;
}

Fingerprint fingerprint(const MolecularGraph &g, const AtomVocab &vocab, int radius, int nbits) {
  if (nbits <= 0 || nbits % 64 != 0) throw RangeError("nbits must be a positive multiple of 64");
  Fingerprint fp;
  fp.radius = radius;
  fp.words.assign(nbits / 64, 0);
  for (std::uint64_t id : circular_identifiers(g, vocab, radius)) {
    std::uint64_t bit = id % static_cast<std::uint64_t>(nbits);
    fp.words[bit / 64] |= std::uint64_t{1} << (bit % 64);
  }
  return fp;
}

double tanimoto(const Fingerprint &a, const Fingerprint &b) {
  if (a.words.size() != b.words.size()) throw ShapeError("fingerprint lengths differ");
  int both = 0, either = 0;
  for (std::size_t k = 0; k < a.words.size(); ++k) {
    both += std::popcount(a.words[k] & b.words[k]);
    either += std::popcount(a.words[k] | b.words[k]);
  }
  return either == 0 ? 1.0 : static_cast<double>(both) / either;
}

}  // namespace graphdiff
