#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "graphdiff/molgraph.hpp"

namespace graphdiff {

// Parses the supported SMILES subset: organic-subset atoms, lowercase
// aromatic atoms, the "*" wildcard, bracket atoms carrying only an element
// and an optional hydrogen count, bonds - = # :, '.', ring closures (digits
// and %nn) and parenthesized branches. Charges, isotopes, stereo marks and
// atom classes are rejected with a positioned SyntaxError. Chemistry is not
// validated here.
//
// An unmarked bond between two aromatic atoms is aromatic when it lies on a
// ring of 5-7 atoms and single otherwise. Explicit ':' bonds must lie on
// such a ring, and every lowercase atom must end up with an aromatic bond.
MolecularGraph parse_smiles(std::string_view text, const AtomVocab &vocab);

// Canonical SMILES: identical for every relabeling of the same graph.
// Components are written separately and joined with '.' in sorted order.
std::string write_smiles(const MolecularGraph &g, const AtomVocab &vocab);

// Canonical atom order (rank per atom, 0 = first). Iterated neighborhood
// refinement from (element, degree, bond-order multiset) invariants; any
// remaining ties are resolved by trying each tied atom and keeping the
// choice that yields the smallest SMILES string.
std::vector<int> canonical_ranks(const MolecularGraph &g, const AtomVocab &vocab);

// Length of the shortest cycle through the bond (a, b), or 0 when the bond is
// a bridge.
int smallest_ring_through(const MolecularGraph &g, int a, int b);
// Per-atom flag: atom lies on at least one cycle.
std::vector<bool> ring_atoms(const MolecularGraph &g);

}  // namespace graphdiff
