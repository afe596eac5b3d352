#pragma once

#include <cstdint>
#include <vector>

#include "graphdiff/molgraph.hpp"

namespace graphdiff {

struct Fingerprint {
  int radius = 2;
  std::vector<std::uint64_t> words;  // nbits / 64 words, bit k of word w = bit 64w+k
  int nbits() const { return static_cast<int>(words.size() * 64); }
  bool test(int bit) const { return (words[bit / 64] >> (bit % 64)) & 1U; }
  int popcount() const;
};

// Identifiers of the atom-centered circular environments of every atom for
// radius 0..radius (one identifier per atom and radius, duplicates kept).
// Identifiers depend only on element, degree, ring/aromatic flags and bond
// kinds, so they are invariant under atom relabeling.
std::vector<std::uint64_t> circular_identifiers(const MolecularGraph &g, const AtomVocab &vocab,
                                                int radius = 2);

// nbits must be a positive multiple of 64.
Fingerprint fingerprint(const MolecularGraph &g, const AtomVocab &vocab, int radius = 2,
                        int nbits = 2048);

// |a & b| / |a | b|, with 0/0 defined as 1.
double tanimoto(const Fingerprint &a, const Fingerprint &b);

}  // namespace graphdiff
