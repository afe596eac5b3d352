#include "graphdiff/smiles.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <tuple>

#include "graphdiff/error.hpp"

namespace graphdiff {

namespace {

bool aromatic_capable(std::string_view symbol) {
  return symbol == "B" || symbol == "C" || symbol == "N" || symbol == "O" || symbol == "P" ||
         symbol == "S";
}

std::string upper_first(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

struct PendingBond {
  BondKind kind;
  std::size_t pos;
};

struct ParsedBond {
  int a;
  int b;
  std::optional<BondKind> explicit_kind;
  std::size_t pos;
};

class Parser {
 public:
  Parser(std::string_view text, const AtomVocab &vocab) : text_(text), vocab_(vocab) {}

  MolecularGraph run() {
    std::size_t end = text_.size();
    for (std::size_t k = 0; k < text_.size(); ++k) {
      if (std::isspace(static_cast<unsigned char>(text_[k]))) {
        end = k;
        break;
      }
    }
    text_ = text_.substr(0, end);
    if (text_.empty()) throw SyntaxError(0, "empty SMILES");

    while (pos_ < text_.size()) step();

    if (!branches_.empty()) throw SyntaxError(text_.size(), "unclosed branch '('");
    if (!rings_.empty()) {
      throw SyntaxError(rings_.begin()->second.pos,
                        "unclosed ring bond " + std::to_string(rings_.begin()->first));
    }
    if (pending_) throw SyntaxError(pending_->pos, "bond symbol without a following atom");
    if (atom_elements_.empty()) throw SyntaxError(0, "no atoms");
    return finish();
  }

 private:
  void step() {
    const char ch = text_[pos_];
    switch (ch) {
      case '(':
        if (prev_ < 0) throw SyntaxError(pos_, "branch without a preceding atom");
        if (pending_) throw SyntaxError(pos_, "bond symbol before '('");
        branches_.push_back(prev_);
        ++pos_;
        return;
      case ')':
        if (branches_.empty()) throw SyntaxError(pos_, "unmatched ')'");
        if (pending_) throw SyntaxError(pos_, "bond symbol before ')'");
        if (prev_ == branches_.back() && text_[pos_ - 1] == '(')
          throw SyntaxError(pos_, "empty branch");
        prev_ = branches_.back();
        branches_.pop_back();
        ++pos_;
        return;
      case '-':
      case '=':
      case '#':
      case ':':
        set_pending(ch == '-'   ? BondKind::kSingle
                    : ch == '=' ? BondKind::kDouble
                    : ch == '#' ? BondKind::kTriple
                                : BondKind::kAromatic);
        ++pos_;
        return;
      case '/':
      case '\\':
        throw SyntaxError(pos_, "stereo bonds are not supported");
      case '$':
        throw SyntaxError(pos_, "quadruple bonds are not supported");
      case '.':
        if (pending_) throw SyntaxError(pos_, "bond symbol before '.'");
        if (prev_ < 0) throw SyntaxError(pos_, "'.' without a preceding atom");
        prev_ = -1;
        ++pos_;
        return;
      case '%': {
        if (pos_ + 2 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
            !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2])))
          throw SyntaxError(pos_, "'%' must be followed by two digits");
        int number = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
        ring_closure(number, pos_);
        pos_ += 3;
        return;
      }
      case '[':
        bracket_atom();
        return;
      default:
        break;
    }
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      ring_closure(ch - '0', pos_);
      ++pos_;
      return;
    }
    organic_atom();
  }

  void set_pending(BondKind kind) {
    if (pending_) throw SyntaxError(pos_, "consecutive bond symbols");
    if (prev_ < 0) throw SyntaxError(pos_, "bond symbol without a preceding atom");
    pending_ = PendingBond{kind, pos_};
  }

  void ring_closure(int number, std::size_t at) {
    if (prev_ < 0) throw SyntaxError(at, "ring bond without a preceding atom");
    auto it = rings_.find(number);
    if (it == rings_.end()) {
      rings_[number] = Opening{prev_, pending_ ? std::optional(pending_->kind) : std::nullopt,
                               pending_ ? pending_->pos : at};
      pending_.reset();
      return;
    }
    Opening open = it->second;
    rings_.erase(it);
    std::optional<BondKind> kind = open.kind;
    if (pending_) {
      if (kind && *kind != pending_->kind)
        throw SyntaxError(pending_->pos, "conflicting bond symbols on ring bond " +
                                             std::to_string(number));
      kind = pending_->kind;
    }
    std::size_t bond_pos = pending_ ? pending_->pos : open.pos;
    pending_.reset();
    if (open.atom == prev_) throw SyntaxError(at, "ring bond to the same atom");
    add_bond(open.atom, prev_, kind, bond_pos, at);
  }

  void add_bond(int a, int b, std::optional<BondKind> kind, std::size_t bond_pos,
                std::size_t at) {
    for (const auto &pb : bonds_) {
      if ((pb.a == a && pb.b == b) || (pb.a == b && pb.b == a))
        throw SyntaxError(at, "duplicate bond between the same two atoms");
    }
    bonds_.push_back(ParsedBond{a, b, kind, bond_pos});
  }

  void attach(int element, bool aromatic, std::size_t at) {
    int idx = static_cast<int>(atom_elements_.size());
    atom_elements_.push_back(element);
    atom_aromatic_.push_back(aromatic);
    atom_pos_.push_back(at);
    if (prev_ >= 0) {
      std::optional<BondKind> kind;
      std::size_t bpos = at;
      if (pending_) {
        kind = pending_->kind;
        bpos = pending_->pos;
      }
      pending_.reset();
      add_bond(prev_, idx, kind, bpos, at);
    } else if (pending_) {
      throw SyntaxError(pending_->pos, "bond symbol without a preceding atom");
    }
    prev_ = idx;
  }

  int lookup(std::string_view symbol, std::size_t at) const {
    int e = vocab_.index_of(symbol);
    if (e < 0 || e == vocab_.pad())
      throw SyntaxError(at, "element '" + std::string(symbol) + "' is not in the atom vocabulary");
    return e;
  }

  void organic_atom() {
    const std::size_t at = pos_;
    const char ch = text_[pos_];
    auto next_is = [&](char c) { return pos_ + 1 < text_.size() && text_[pos_ + 1] == c; };
    if (ch == 'C' && next_is('l')) {
      pos_ += 2;
      return attach(lookup("Cl", at), false, at);
    }
    if (ch == 'B' && next_is('r')) {
      pos_ += 2;
      return attach(lookup("Br", at), false, at);
    }
    static constexpr std::string_view kAliphatic = "BCNOFPSI";
    static constexpr std::string_view kAromatic = "bcnops";
    if (ch == '*') {
      ++pos_;
      return attach(lookup("*", at), false, at);
    }
    if (kAliphatic.find(ch) != std::string_view::npos) {
      ++pos_;
      return attach(lookup(std::string(1, ch), at), false, at);
    }
    if (kAromatic.find(ch) != std::string_view::npos) {
      ++pos_;
      return attach(lookup(upper_first(std::string(1, ch)), at), true, at);
    }
    throw SyntaxError(at, std::string("unexpected character '") + ch + "'");
  }

  void bracket_atom() {
    const std::size_t at = pos_;
    std::size_t k = pos_ + 1;
    auto peek = [&]() -> char { return k < text_.size() ? text_[k] : '\0'; };
    if (std::isdigit(static_cast<unsigned char>(peek())))
      throw SyntaxError(k, "isotopes are not supported");
    std::string symbol;
    bool aromatic = false;
    char c = peek();
    if (c == '*') {
      symbol = "*";
      ++k;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      symbol.push_back(c);
      ++k;
      if (std::islower(static_cast<unsigned char>(peek())) && peek() != 'h') {
        // two-letter symbols; only the ones in the vocabulary are accepted
        std::string two = symbol + peek();
        if (vocab_.index_of(two) >= 0 || two == "Cl" || two == "Br") {
          symbol = two;
          ++k;
        } else {
          throw SyntaxError(at + 1, "element '" + two + "' is not supported");
        }
      }
    } else if (std::islower(static_cast<unsigned char>(c))) {
      if (std::string_view("bcnops").find(c) == std::string_view::npos)
        throw SyntaxError(k, std::string("unsupported aromatic symbol '") + c + "'");
      symbol = upper_first(std::string(1, c));
      aromatic = true;
      ++k;
    } else {
      throw SyntaxError(k, "expected an element symbol in bracket atom");
    }
    int element = lookup(symbol, at + 1);
    if (peek() == '@') throw SyntaxError(k, "stereo centers are not supported");
    if (peek() == 'H') {
      ++k;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++k;
    }
    if (peek() == '+' || peek() == '-') throw SyntaxError(k, "charges are not supported");
    if (peek() == ':') throw SyntaxError(k, "atom classes are not supported");
    if (peek() != ']') {
      if (peek() == '\0') throw SyntaxError(k, "unclosed bracket atom");
      throw SyntaxError(k, std::string("unexpected character '") + peek() + "' in bracket atom");
    }
    pos_ = k + 1;
    attach(element, aromatic, at);
  }

  MolecularGraph finish() {
    MolecularGraph g;
    for (int e : atom_elements_) g.add_atom(e);
    std::vector<bool> tentative(bonds_.size(), false);
    for (std::size_t i = 0; i < bonds_.size(); ++i) {
      const auto &pb = bonds_[i];
      BondKind kind;
      if (pb.explicit_kind) {
        kind = *pb.explicit_kind;
      } else if (atom_aromatic_[pb.a] && atom_aromatic_[pb.b]) {
        kind = BondKind::kAromatic;
        tentative[i] = true;
      } else {
        kind = BondKind::kSingle;
      }
      g.add_bond(pb.a, pb.b, kind);
    }
    for (std::size_t i = 0; i < bonds_.size(); ++i) {
      const auto &pb = bonds_[i];
      if (g.bond_between(pb.a, pb.b) != BondKind::kAromatic) continue;
      int ring = smallest_ring_through(g, pb.a, pb.b);
      bool in_ring = ring >= 5 && ring <= 7;
      if (in_ring) continue;
      if (tentative[i]) {
        g.set_bond(pb.a, pb.b, BondKind::kSingle);
      } else {
        throw SyntaxError(pb.pos, "aromatic bond outside a ring of 5-7 atoms");
      }
    }
    for (int i = 0; i < g.num_atoms(); ++i) {
      if (!atom_aromatic_[i]) continue;
      bool has_aromatic = false;
      for (auto [j, kind] : g.neighbors(i)) has_aromatic |= kind == BondKind::kAromatic;
      if (!has_aromatic) throw SyntaxError(atom_pos_[i], "aromatic atom outside a ring of 5-7 atoms");
    }
    return g;
  }

  struct Opening {
    int atom;
    std::optional<BondKind> kind;
    std::size_t pos;
  };

  std::string_view text_;
  const AtomVocab &vocab_;
  std::size_t pos_ = 0;
  int prev_ = -1;
  std::optional<PendingBond> pending_;
  std::vector<int> branches_;
  std::map<int, Opening> rings_;
  std::vector<int> atom_elements_;
  std::vector<bool> atom_aromatic_;
  std::vector<std::size_t> atom_pos_;
  std::vector<ParsedBond> bonds_;
};

// ---------------------------------------------------------------------------
// canonical ranking

using Adjacency = std::vector<std::vector<std::pair<int, BondKind>>>;

// Dense ranks of `keys`: equal keys share a rank, ranks are 0..k-1.
template <typename Key>
std::vector<int> dense_ranks(const std::vector<Key> &keys, int *classes) {
  const int n = static_cast<int>(keys.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return keys[x] < keys[y]; });
  std::vector<int> rank(n, 0);
  int r = 0;
  for (int k = 0; k < n; ++k) {
    if (k > 0 && keys[order[k - 1]] < keys[order[k]]) ++r;
    rank[order[k]] = r;
  }
  *classes = n == 0 ? 0 : r + 1;
  return rank;
}

std::vector<int> refine(const Adjacency &adj, std::vector<int> rank) {
  int classes = 0;
  {
    std::vector<int> tmp = rank;
    rank = dense_ranks(tmp, &classes);
  }
  while (true) {
    using Key = std::pair<int, std::vector<std::pair<int, int>>>;
    std::vector<Key> keys(rank.size());
    for (std::size_t i = 0; i < rank.size(); ++i) {
      keys[i].first = rank[i];
      for (auto [j, kind] : adj[i]) keys[i].second.emplace_back(rank[j], static_cast<int>(kind));
      std::sort(keys[i].second.begin(), keys[i].second.end());
    }
    int next_classes = 0;
    std::vector<int> next = dense_ranks(keys, &next_classes);
    if (next_classes == classes) return next;
    rank = std::move(next);
    classes = next_classes;
  }
}

std::vector<int> initial_ranks(const MolecularGraph &g, const Adjacency &adj) {
  using Key = std::tuple<int, int, std::vector<int>>;
  std::vector<Key> keys(g.num_atoms());
  for (int i = 0; i < g.num_atoms(); ++i) {
    std::vector<int> orders;
    for (auto [j, kind] : adj[i]) orders.push_back(BondVocab::half_order(kind));
    std::sort(orders.begin(), orders.end());
    keys[i] = Key{g.atom(i), static_cast<int>(adj[i].size()), std::move(orders)};
  }
  int classes = 0;
  return dense_ranks(keys, &classes);
}

// Writes a connected graph given a total order of its atoms.
std::string emit_component(const MolecularGraph &g, const AtomVocab &vocab, const Adjacency &adj,
                           const std::vector<int> &rank) {
  const int n = g.num_atoms();
  if (n == 0) return {};
  std::vector<bool> lower(n, false);
  for (int i = 0; i < n; ++i) {
    if (!aromatic_capable(vocab.symbol(g.atom(i)))) continue;
    for (auto [j, kind] : adj[i]) lower[i] = lower[i] || kind == BondKind::kAromatic;
  }
  auto bond_symbol = [&](int u, int v, BondKind kind) -> std::string {
    const bool both_lower = lower[u] && lower[v];
    switch (kind) {
      case BondKind::kSingle:
        return both_lower ? "-" : "";
      case BondKind::kDouble:
        return "=";
      case BondKind::kTriple:
        return "#";
      case BondKind::kAromatic: {
        if (!both_lower) return ":";
        int ring = smallest_ring_through(g, u, v);
        return (ring >= 5 && ring <= 7) ? "" : ":";
      }
      default:
        return "";
    }
  };

  std::vector<std::vector<int>> sorted_nbrs(n);
  for (int i = 0; i < n; ++i) {
    for (auto [j, kind] : adj[i]) sorted_nbrs[i].push_back(j);
    std::sort(sorted_nbrs[i].begin(), sorted_nbrs[i].end(),
              [&](int x, int y) { return rank[x] < rank[y]; });
  }

  // pass 1: spanning tree and ring-closure bonds
  std::vector<int> order;
  std::vector<std::vector<int>> children(n);
  std::vector<std::vector<int>> ring_partners(n);
  std::vector<bool> visited(n, false);
  std::vector<int> parent(n, -1);
  int start = static_cast<int>(std::min_element(rank.begin(), rank.end()) - rank.begin());
  std::vector<std::pair<int, std::size_t>> stack;
  visited[start] = true;
  order.push_back(start);
  stack.emplace_back(start, 0);
  std::map<std::pair<int, int>, bool> ring_bond;
  while (!stack.empty()) {
    auto &[u, idx] = stack.back();
    if (idx >= sorted_nbrs[u].size()) {
      stack.pop_back();
      continue;
    }
    int v = sorted_nbrs[u][idx++];
    if (v == parent[u]) continue;
    if (!visited[v]) {
      visited[v] = true;
      parent[v] = u;
      children[u].push_back(v);
      order.push_back(v);
      stack.emplace_back(v, 0);
    } else {
      auto key = std::minmax(u, v);
      if (!ring_bond.count(key)) {
        ring_bond[key] = true;
        ring_partners[u].push_back(v);
        ring_partners[v].push_back(u);
      }
    }
  }

  std::vector<int> position(n, -1);
  for (std::size_t k = 0; k < order.size(); ++k) position[order[k]] = static_cast<int>(k);

  // pass 2: emission in preorder
  std::string out;
  std::map<std::pair<int, int>, int> open_digit;
  std::vector<bool> digit_used(100, false);
  auto digit_text = [](int d) {
    return d < 10 ? std::string(1, static_cast<char>('0' + d))
                  : "%" + std::to_string(d);
  };

  auto write_atom = [&](int u) {
    std::string sym = vocab.symbol(g.atom(u));
    if (lower[u]) sym[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(sym[0])));
    out += sym;
    std::vector<int> closing, opening;
    for (int v : ring_partners[u]) (position[v] < position[u] ? closing : opening).push_back(v);
    auto by_rank = [&](int x, int y) { return rank[x] < rank[y]; };
    std::sort(opening.begin(), opening.end(), by_rank);
    std::sort(closing.begin(), closing.end(), [&](int x, int y) {
      return open_digit[std::minmax(x, u)] < open_digit[std::minmax(y, u)];
    });
    std::vector<int> freed;
    for (int v : closing) {
      int d = open_digit[std::minmax(u, v)];
      out += digit_text(d);
      freed.push_back(d);
    }
    for (int v : opening) {
      int d = 1;
      while (digit_used[d]) ++d;
      digit_used[d] = true;
      open_digit[std::minmax(u, v)] = d;
      out += bond_symbol(u, v, g.bond_between(u, v));
      out += digit_text(d);
    }
    for (int d : freed) digit_used[d] = false;
  };

  // recursive emission (molecules are small)
  std::function<void(int)> emit = [&](int u) {
    write_atom(u);
    const auto &ch = children[u];
    for (std::size_t k = 0; k < ch.size(); ++k) {
      int v = ch[k];
      std::string b = bond_symbol(u, v, g.bond_between(u, v));
      if (k + 1 < ch.size()) {
        out += "(";
        out += b;
        emit(v);
        out += ")";
      } else {
        out += b;
        emit(v);
      }
    }
  };
  emit(start);
  return out;
}

class Canonicalizer {
 public:
  Canonicalizer(const MolecularGraph &g, const AtomVocab &vocab)
      : g_(g), vocab_(vocab), adj_(g.adjacency()) {}

  std::vector<int> run() {
    std::vector<int> ranks = refine(adj_, initial_ranks(g_, adj_));
    search(ranks);
    return best_ranks_;
  }

  const std::string &best_string() const { return best_; }

 private:
  void search(const std::vector<int> &ranks) {
    const int n = static_cast<int>(ranks.size());
    std::vector<int> count(n, 0);
    for (int r : ranks) ++count[r];
    int tied = -1;
    for (int r = 0; r < n; ++r) {
      if (count[r] > 1) {
        tied = r;
        break;
      }
    }
    if (tied < 0) {
      ++leaves_;
      std::string s = emit_component(g_, vocab_, adj_, ranks);
      if (best_ranks_.empty() || s < best_) {
        best_ = std::move(s);
        best_ranks_ = ranks;
      }
      return;
    }
    for (int c = 0; c < n; ++c) {
      if (ranks[c] != tied) continue;
      std::vector<int> split(n);
      for (int i = 0; i < n; ++i) split[i] = 2 * ranks[i] + ((ranks[i] == tied && i != c) ? 1 : 0);
      search(refine(adj_, split));
      // bounded search: past the budget keep the first complete branch
      if (leaves_ >= kLeafBudget && !best_ranks_.empty()) return;
    }
  }

  static constexpr int kLeafBudget = 20000;
  const MolecularGraph &g_;
  const AtomVocab &vocab_;
  Adjacency adj_;
  int leaves_ = 0;
  std::string best_;
  std::vector<int> best_ranks_;
};

}  // namespace

MolecularGraph parse_smiles(std::string_view text, const AtomVocab &vocab) {
  return Parser(text, vocab).run();
}

int smallest_ring_through(const MolecularGraph &g, int a, int b) {
  const int n = g.num_atoms();
  auto adj = g.adjacency();
  std::vector<int> dist(n, -1);
  std::queue<int> q;
  dist[a] = 0;
  q.push(a);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (auto [v, kind] : adj[u]) {
      if ((u == a && v == b) || (u == b && v == a)) continue;
      if (dist[v] >= 0) continue;
      dist[v] = dist[u] + 1;
      if (v == b) return dist[v] + 1;
      q.push(v);
    }
  }
  return 0;
}

std::vector<bool> ring_atoms(const MolecularGraph &g) {
  std::vector<bool> out(g.num_atoms(), false);
  for (const auto &bond : g.bonds()) {
    if (smallest_ring_through(g, bond.a, bond.b) > 0) out[bond.a] = out[bond.b] = true;
  }
  return out;
}

std::vector<int> canonical_ranks(const MolecularGraph &g, const AtomVocab &vocab) {
  int k = 0;
  std::vector<int> label = g.component_labels(&k);
  if (k <= 1) return Canonicalizer(g, vocab).run();
  // rank components by their canonical strings, then atoms within each
  std::vector<std::pair<std::string, std::vector<int>>> parts;
  for (int c = 0; c < k; ++c) {
    std::vector<int> keep;
    for (int i = 0; i < g.num_atoms(); ++i) {
      if (label[i] == c) keep.push_back(i);
    }
    MolecularGraph sub = g.induced(keep);
    Canonicalizer canon(sub, vocab);
    std::vector<int> sub_rank = canon.run();
    std::vector<int> ordered(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) ordered[sub_rank[i]] = keep[i];
    parts.emplace_back(canon.best_string(), std::move(ordered));
  }
  std::stable_sort(parts.begin(), parts.end(),
                   [](const auto &x, const auto &y) { return x.first < y.first; });
  std::vector<int> rank(g.num_atoms());
  int next = 0;
  for (const auto &p : parts) {
    for (int atom : p.second) rank[atom] = next++;
  }
  return rank;
}

std::string write_smiles(const MolecularGraph &g, const AtomVocab &vocab) {
  int k = 0;
  std::vector<int> label = g.component_labels(&k);
  std::vector<std::string> parts;
  for (int c = 0; c < k; ++c) {
    std::vector<int> keep;
    for (int i = 0; i < g.num_atoms(); ++i) {
      if (label[i] == c) keep.push_back(i);
    }
    MolecularGraph sub = k == 1 ? g : g.induced(keep);
    Canonicalizer canon(sub, vocab);
    canon.run();
    parts.push_back(canon.best_string());
  }
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += '.';
    out += parts[i];
  }
  return out;
}

}  // namespace graphdiff
