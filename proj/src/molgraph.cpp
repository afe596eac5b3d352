#include "graphdiff/molgraph.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "graphdiff/error.hpp"
#include "graphdiff/smiles.hpp"

namespace graphdiff {

namespace {

const std::vector<ElementInfo> &standard_elements() {
  static const std::vector<ElementInfo> kElements = {
      {"B", {3}, true},     {"C", {4}, true},     {"N", {3}, true},
      {"O", {2}, true},     {"F", {1}, true},     {"P", {3, 5}, true},
      {"S", {2, 4, 6}, true}, {"Cl", {1}, true},  {"Br", {1}, true},
      {"I", {1}, true},     {"*", {1, 2}, false},
  };
  return kElements;
}

}  // namespace

AtomVocab AtomVocab::standard() {
  AtomVocab v;
  v.elements_ = standard_elements();
  v.elements_.push_back({std::string(kPad), {}, false});
  v.wildcard_ = v.index_of(kWildcard);
  return v;
}

AtomVocab AtomVocab::from_symbols(std::span<const std::string> symbols) {
  AtomVocab v;
  for (const auto &e : standard_elements()) {
    bool wanted = e.symbol == kWildcard ||
                  std::find(symbols.begin(), symbols.end(), e.symbol) != symbols.end();
    if (wanted) v.elements_.push_back(e);
  }
  for (const auto &s : symbols) {
    if (s == kPad) continue;
    if (v.index_of(s) < 0) throw RangeError("unsupported element symbol '" + s + "'");
  }
  v.elements_.push_back({std::string(kPad), {}, false});
  v.wildcard_ = v.index_of(kWildcard);
  return v;
}

int AtomVocab::index_of(std::string_view symbol) const {
  for (int i = 0; i < size(); ++i) {
    if (elements_[i].symbol == symbol) return i;
  }
  return -1;
}

std::vector<std::string> AtomVocab::symbols() const {
  std::vector<std::string> out;
  out.reserve(elements_.size());
  for (const auto &e : elements_) out.push_back(e.symbol);
  return out;
}

int AtomVocab::max_valence(int index) const {
  const auto &v = elements_.at(index).valences;
  return v.empty() ? 0 : *std::max_element(v.begin(), v.end());
}

bool AtomVocab::operator==(const AtomVocab &other) const {
  return symbols() == other.symbols();
}

int MolecularGraph::add_atom(int element) {
  atoms_.push_back(element);
  return num_atoms() - 1;
}

void MolecularGraph::add_bond(int i, int j, BondKind kind) {
  if (i == j) throw RangeError("self-loop bond");
  if (i < 0 || j < 0 || i >= num_atoms() || j >= num_atoms())
    throw RangeError("bond index out of range");
  if (kind == BondKind::kNone) throw RangeError("cannot add a 'none' bond");
  if (i > j) std::swap(i, j);
  Bond bond{i, j, kind};
  auto it = std::lower_bound(bonds_.begin(), bonds_.end(), bond, [](const Bond &x, const Bond &y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  if (it != bonds_.end() && it->a == i && it->b == j)
    throw RangeError("duplicate bond between atoms " + std::to_string(i) + " and " +
                     std::to_string(j));
  bonds_.insert(it, bond);
}

void MolecularGraph::set_bond(int i, int j, BondKind kind) {
  if (i > j) std::swap(i, j);
  auto it = std::find_if(bonds_.begin(), bonds_.end(),
                         [&](const Bond &b) { return b.a == i && b.b == j; });
  if (it != bonds_.end()) {
    if (kind == BondKind::kNone) {
      bonds_.erase(it);
    } else {
      it->kind = kind;
    }
    return;
  }
  if (kind != BondKind::kNone) add_bond(i, j, kind);
}

BondKind MolecularGraph::bond_between(int i, int j) const {
  if (i > j) std::swap(i, j);
  for (const auto &b : bonds_) {
    if (b.a == i && b.b == j) return b.kind;
  }
  return BondKind::kNone;
}

std::vector<std::pair<int, BondKind>> MolecularGraph::neighbors(int i) const {
  std::vector<std::pair<int, BondKind>> out;
  for (const auto &b : bonds_) {
    if (b.a == i) out.emplace_back(b.b, b.kind);
    if (b.b == i) out.emplace_back(b.a, b.kind);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<std::pair<int, BondKind>>> MolecularGraph::adjacency() const {
  std::vector<std::vector<std::pair<int, BondKind>>> adj(atoms_.size());
  for (const auto &b : bonds_) {
    adj[b.a].emplace_back(b.b, b.kind);
    adj[b.b].emplace_back(b.a, b.kind);
  }
  for (auto &row : adj) std::sort(row.begin(), row.end());
  return adj;
}

int MolecularGraph::degree(int i) const {
  int d = 0;
  for (const auto &b : bonds_) d += (b.a == i) + (b.b == i);
  return d;
}

int MolecularGraph::half_valence(int i) const {
  int total = 0;
  for (const auto &b : bonds_) {
    if (b.a == i || b.b == i) total += BondVocab::half_order(b.kind);
  }
  return total;
}

std::vector<int> MolecularGraph::component_labels(int *count) const {
  const int n = num_atoms();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto &b : bonds_) {
    int ra = find(b.a), rb = find(b.b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<int> label(n, -1), root_label(n, -1);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    int r = find(i);
    if (root_label[r] < 0) root_label[r] = k++;
    label[i] = root_label[r];
  }
  if (count) *count = k;
  return label;
}

int MolecularGraph::num_components() const {
  int k = 0;
  component_labels(&k);
  return k;
}

MolecularGraph MolecularGraph::induced(std::span<const int> keep) const {
  std::vector<int> remap(atoms_.size(), -1);
  MolecularGraph out;
  for (int old : keep) remap[old] = out.add_atom(atoms_.at(old));
  for (const auto &b : bonds_) {
    if (remap[b.a] >= 0 && remap[b.b] >= 0) out.add_bond(remap[b.a], remap[b.b], b.kind);
  }
  return out;
}

MolecularGraph MolecularGraph::permuted(std::span<const int> perm) const {
  if (perm.size() != atoms_.size()) throw RangeError("permutation size mismatch");
  MolecularGraph out;
  out.atoms_.resize(atoms_.size());
  for (std::size_t i = 0; i < atoms_.size(); ++i) out.atoms_[perm[i]] = atoms_[i];
  for (const auto &b : bonds_) out.add_bond(perm[b.a], perm[b.b], b.kind);
  return out;
}

ValidityReport check_valence(const MolecularGraph &g, const AtomVocab &vocab) {
  ValidityReport report;
  report.components = g.num_components();
  report.connected = report.components <= 1;
  std::vector<int> half(g.num_atoms(), 0), n_aromatic(g.num_atoms(), 0);
  for (const auto &b : g.bonds()) {
    half[b.a] += BondVocab::half_order(b.kind);
    half[b.b] += BondVocab::half_order(b.kind);
    if (b.kind == BondKind::kAromatic) ++n_aromatic[b.a], ++n_aromatic[b.b];
  }
  for (int i = 0; i < g.num_atoms(); ++i) {
    const ElementInfo &info = vocab.info(g.atom(i));
    AtomValence av;
    av.atom = i;
    av.total_order = half[i] / 2.0;
    av.allowed = info.valences;
    av.ok = false;
    // k aromatic bonds realize as k singles plus at most one double; try the
    // one-double total first.
    const int k = n_aromatic[i];
    const int fixed = (half[i] - 3 * k) / 2;
    std::vector<int> totals = k > 0 ? std::vector<int>{fixed + k + 1, fixed + k} : std::vector<int>{fixed};
    for (int total : totals) {
      if (info.implicit_h) {
        int best = -1;
        for (int v : info.valences) {
          if (v >= total && (best < 0 || v < best)) best = v;
        }
        if (best >= 0) {
          av.ok = true;
          av.implicit_h = best - total;
        }
      } else {
        av.ok = std::find(info.valences.begin(), info.valences.end(), total) != info.valences.end();
      }
      if (av.ok) break;
    }
    report.valid = report.valid && av.ok;
    report.atoms.push_back(std::move(av));
  }
  return report;
}

bool is_valid(const MolecularGraph &g, const AtomVocab &vocab) {
  return check_valence(g, vocab).valid;
}

int spare_half_valence(const MolecularGraph &g, const AtomVocab &vocab, int i) {
  return std::max(0, 2 * vocab.max_valence(g.atom(i)) - g.half_valence(i));
}

MolecularGraph connect_components(const MolecularGraph &g, const AtomVocab &vocab, Rng &rng) {
  MolecularGraph out = g;
  int k = 0;
  std::vector<int> label = out.component_labels(&k);
  for (int step = 1; step < k; ++step) {
    const int n = out.num_atoms();
    // candidate first atoms: those with spare valence and a spare partner in
    // another component
    std::vector<int> spare;
    for (int i = 0; i < n; ++i) {
      if (spare_half_valence(out, vocab, i) >= 2) spare.push_back(i);
    }
    std::vector<int> first;
    for (int i : spare) {
      bool has_partner = std::any_of(spare.begin(), spare.end(),
                                     [&](int j) { return label[j] != label[i]; });
      if (has_partner) first.push_back(i);
    }
    int a, b;
    if (!first.empty()) {
      a = first[rng.uniform_int(first.size())];
      std::vector<int> partners;
      for (int j : spare) {
        if (label[j] != label[a]) partners.push_back(j);
      }
      b = partners[rng.uniform_int(partners.size())];
    } else {
      a = static_cast<int>(rng.uniform_int(n));
      std::vector<int> partners;
      for (int j = 0; j < n; ++j) {
        if (label[j] != label[a]) partners.push_back(j);
      }
      b = partners[rng.uniform_int(partners.size())];
    }
    out.add_bond(a, b, BondKind::kSingle);
    const int from = std::max(label[a], label[b]);
    const int to = std::min(label[a], label[b]);
    for (int &l : label) {
      if (l == from) l = to;
    }
  }
  return out;
}

MolecularGraph largest_component(const MolecularGraph &g, const AtomVocab &vocab) {
  int k = 0;
  std::vector<int> label = g.component_labels(&k);
  if (k <= 1) return g;
  MolecularGraph best;
  std::string best_smiles;
  for (int c = 0; c < k; ++c) {
    std::vector<int> keep;
    for (int i = 0; i < g.num_atoms(); ++i) {
      if (label[i] == c) keep.push_back(i);
    }
    MolecularGraph part = g.induced(keep);
    if (best.empty()) {
      best = std::move(part);
      best_smiles = write_smiles(best, vocab);
      continue;
    }
    auto key = [](const MolecularGraph &m) { return std::pair(m.num_atoms(), m.num_bonds()); };
    if (key(part) > key(best)) {
      best = std::move(part);
      best_smiles = write_smiles(best, vocab);
    } else if (key(part) == key(best)) {
      std::string s = write_smiles(part, vocab);
      if (s < best_smiles) {
        best = std::move(part);
        best_smiles = std::move(s);
      }
    }
  }
  return best;
}

int ring_count(const MolecularGraph &g) {
  return g.num_bonds() - g.num_atoms() + g.num_components();
}

double hetero_fraction(const MolecularGraph &g, const AtomVocab &vocab) {
  int heavy = 0, hetero = 0;
  const int carbon = vocab.index_of("C");
  for (int a : g.atoms()) {
    if (a == vocab.wildcard() || a == vocab.pad()) continue;
    ++heavy;
    if (a != carbon) ++hetero;
  }
  return heavy == 0 ? 0.0 : static_cast<double>(hetero) / heavy;
}

}  // namespace graphdiff
