#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "graphdiff/rng.hpp"

namespace graphdiff {

// Bond kinds. Index 0 is the "non-bond" edge type.
enum class BondKind : std::uint8_t { kNone = 0, kSingle, kDouble, kTriple, kAromatic };

struct BondVocab {
  static constexpr int kSize = 5;

  static constexpr std::string_view name(BondKind k) {
    constexpr std::string_view names[] = {"none", "single", "double", "triple",
                                          "aromatic"};
    return names[static_cast<int>(k)];
  }
  // Bond order in half units: aromatic contributes 1.5, i.e. 3 half units.
  static constexpr int half_order(BondKind k) {
    constexpr int orders[] = {0, 2, 4, 6, 3};
    return orders[static_cast<int>(k)];
  }
  static constexpr double order(BondKind k) { return half_order(k) / 2.0; }
  static constexpr BondKind kind(int index) { return static_cast<BondKind>(index); }
};

struct ElementInfo {
  std::string symbol;
  std::vector<int> valences;  // allowed total bond orders
  bool implicit_h = true;     // remaining valence may be filled by hydrogens
};

// Ordered atom-type basis. The polymer wildcard "*" is always present and
// PAD is always the last index.
class AtomVocab {
 public:
  static constexpr std::string_view kPad = "PAD";
  static constexpr std::string_view kWildcard = "*";

  // B C N O F P S Cl Br I * PAD
  static AtomVocab standard();
  // Keeps `symbols` in the standard order, then appends "*" and PAD.
  static AtomVocab from_symbols(std::span<const std::string> symbols);

  int size() const { return static_cast<int>(elements_.size()); }
  int pad() const { return size() - 1; }
  int wildcard() const { return wildcard_; }
  // -1 when absent.
  int index_of(std::string_view symbol) const;
  const std::string &symbol(int index) const { return elements_.at(index).symbol; }
  const ElementInfo &info(int index) const { return elements_.at(index); }
  std::vector<std::string> symbols() const;
  int max_valence(int index) const;

  bool operator==(const AtomVocab &other) const;

 private:
  std::vector<ElementInfo> elements_;
  int wildcard_ = -1;
};

struct Bond {
  int a = 0;
  int b = 0;
  BondKind kind = BondKind::kSingle;

  bool operator==(const Bond &) const = default;
};

// Heavy-atom graph. Atoms are AtomVocab indices (never PAD); bonds are kept
// sorted by (a, b) with a < b and at most one bond per pair.
class MolecularGraph {
 public:
  MolecularGraph() = default;

  int add_atom(int element);
  // Throws RangeError on self-loops, out-of-range indices, kind None, or an
  // existing bond between the pair.
  void add_bond(int i, int j, BondKind kind);
  void set_bond(int i, int j, BondKind kind);  // kNone removes

  int num_atoms() const { return static_cast<int>(atoms_.size()); }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }
  bool empty() const { return atoms_.empty(); }
  int atom(int i) const { return atoms_.at(i); }
  const std::vector<int> &atoms() const { return atoms_; }
  const std::vector<Bond> &bonds() const { return bonds_; }

  BondKind bond_between(int i, int j) const;
  std::vector<std::pair<int, BondKind>> neighbors(int i) const;
  std::vector<std::vector<std::pair<int, BondKind>>> adjacency() const;
  int degree(int i) const;
  // Sum of bond orders in half units.
  int half_valence(int i) const;

  // Component label per atom (labels 0..k-1 ordered by lowest atom index).
  std::vector<int> component_labels(int *count = nullptr) const;
  int num_components() const;
  bool connected() const { return num_components() <= 1; }
  // Subgraph induced by `keep` (atom order preserved).
  MolecularGraph induced(std::span<const int> keep) const;
  // Relabel: new index of old atom i is perm[i].
  MolecularGraph permuted(std::span<const int> perm) const;

  bool operator==(const MolecularGraph &) const = default;

 private:
  std::vector<int> atoms_;
  std::vector<Bond> bonds_;
};

struct AtomValence {
  int atom = 0;
  double total_order = 0.0;  // rounded to the nearest 0.5
  std::vector<int> allowed;
  int implicit_h = 0;  // hydrogens filling the gap to the matched valence
  bool ok = true;
};

struct ValidityReport {
  bool valid = true;  // every atom matched an allowed valence
  bool connected = true;
  int components = 0;
  std::vector<AtomValence> atoms;
};

// An atom with k aromatic bonds counts them as k singles plus one double, or
// k singles when that fails (pyrrole N, furan O). Elements with implicit
// hydrogens are valid when the total does not exceed some allowed valence;
// the wildcard must match an allowed valence exactly.
ValidityReport check_valence(const MolecularGraph &g, const AtomVocab &vocab);
bool is_valid(const MolecularGraph &g, const AtomVocab &vocab);

// Spare valence of atom i in half units (max allowed minus current), never
// negative.
int spare_half_valence(const MolecularGraph &g, const AtomVocab &vocab, int i);

// Joins k components with exactly k-1 single bonds. Each new bond links a
// uniformly chosen atom to a uniformly chosen atom of another component,
// restricted to atoms with spare valence whenever such a pair exists.
MolecularGraph connect_components(const MolecularGraph &g, const AtomVocab &vocab,
                                  Rng &rng);

// Component with the most atoms; ties by most bonds, then smallest canonical
// SMILES.
MolecularGraph largest_component(const MolecularGraph &g, const AtomVocab &vocab);

// Independent cycles (cyclomatic number): bonds - atoms + components.
int ring_count(const MolecularGraph &g);
// Fraction of non-carbon heavy atoms; the wildcard is not a heavy atom.
double hetero_fraction(const MolecularGraph &g, const AtomVocab &vocab);

}  // namespace graphdiff
