#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "graphdiff/dataset.hpp"
#include "graphdiff/molgraph.hpp"
#include "graphdiff/rng.hpp"
#include "graphdiff/smiles.hpp"
#include "graphdiff/tokens.hpp"

namespace testing {

using namespace graphdiff;

// Backtracking search for an element- and bond-kind-preserving bijection.
inline bool isomorphic(const MolecularGraph &a, const MolecularGraph &b) {
  const int n = a.num_atoms();
  if (n != b.num_atoms() || a.num_bonds() != b.num_bonds()) return false;
  auto sorted_atoms = [](const MolecularGraph &g) {
    auto v = g.atoms();
    std::sort(v.begin(), v.end());
    return v;
  };
  if (sorted_atoms(a) != sorted_atoms(b)) return false;
  std::vector<int> map(n, -1);
  std::vector<bool> used(n, false);
  std::function<bool(int)> go = [&](int i) {
    if (i == n) return true;
    for (int j = 0; j < n; ++j) {
      if (used[j] || a.atom(i) != b.atom(j) || a.degree(i) != b.degree(j)) continue;
      bool ok = true;
      for (int k = 0; k < i && ok; ++k) ok = a.bond_between(i, k) == b.bond_between(j, map[k]);
      if (!ok) continue;
      map[i] = j;
      used[j] = true;
      if (go(i + 1)) return true;
      used[j] = false;
    }
    map[i] = -1;
    return false;
  };
  return go(0);
}

inline std::vector<int> random_permutation(int n, Rng &rng) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  rng.shuffle(p.begin(), p.end());
  return p;
}

// Mixed corpus: grown chains and rings over several elements (wildcards
// included) plus aromatic scaffolds with grown substituents.
inline std::vector<MolecularGraph> random_corpus(int count, std::uint64_t seed, const AtomVocab &vocab) {
  static const std::vector<std::string> scaffolds = {"c1ccccc1", "c1ccncc1", "c1ccoc1", "c1ccsc1",
                                                     "c1ccc2ccccc2c1", "c1cc[nH]c1"};
  std::vector<MolecularGraph> out;
  for (int k = 0; k < count; ++k) {
    Rng rng(derive_seed(seed, k));
    if (k % 4 == 3) {
      MolecularGraph g = parse_smiles(scaffolds[rng.uniform_int(scaffolds.size())], vocab);
      const std::vector<std::string> subs = {"C", "N", "O", "F", "Cl", "*"};
      int extra = static_cast<int>(rng.uniform_int(4));
      for (int e = 0; e < extra; ++e) {
        std::vector<int> parents;
        for (int i = 0; i < g.num_atoms(); ++i) {
          if (spare_half_valence(g, vocab, i) >= 2 && g.atom(i) != vocab.wildcard()) parents.push_back(i);
        }
        if (parents.empty()) break;
        int p = parents[rng.uniform_int(parents.size())];
        int c = g.add_atom(vocab.index_of(subs[rng.uniform_int(subs.size())]));
        g.add_bond(p, c, BondKind::kSingle);
      }
      out.push_back(g);
    } else {
      ToySpec spec;
      spec.min_atoms = 1;
      spec.max_atoms = 12;
      spec.max_rings = 3;
      spec.element_pool = k % 2 ? std::vector<std::string>{"C", "N", "O", "S", "Cl"}
                                : std::vector<std::string>{"C", "O", "*", "F", "Br"};
      out.push_back(grow_molecule(vocab, spec, rng));
    }
  }
  return out;
}

// Random corrupted-looking tokens: any node type but PAD, any edge kind.
inline GraphTokens random_tokens(int n_real, int n_max, int f_v, Rng &rng) {
  GraphTokens x(n_max, f_v);
  for (int i = 0; i < n_max; ++i) x.set_node(i, i < n_real ? static_cast<int>(rng.uniform_int(f_v - 1)) : f_v - 1);
  for (int i = 0; i < n_max; ++i)
    for (int j = 0; j < n_max; ++j) x.set_edge(i, j, 0);
  for (int i = 0; i < n_real; ++i)
    for (int j = i + 1; j < n_real; ++j) x.set_edge(i, j, static_cast<int>(rng.uniform_int(5)));
  return x;
}

inline GraphTokens permute_tokens(const GraphTokens &x, const std::vector<int> &perm) {
  GraphTokens y(x.n_max(), x.f_v());
  const int n = static_cast<int>(perm.size());
  for (int i = 0; i < x.n_max(); ++i) y.set_node(i < n ? perm[i] : i, x.node(i));
  for (int i = 0; i < x.n_max(); ++i) {
    for (int j = 0; j < x.n_max(); ++j) {
      int pi = i < n ? perm[i] : i, pj = j < n ? perm[j] : j;
      y.set_edge(pi, pj, x.edge(i, j));
    }
  }
  return y;
}

}  // namespace testing
