#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "graphdiff/dataset.hpp"
#include "graphdiff/rng.hpp"
#include "graphdiff/tokens.hpp"

namespace graphdiff {

using Matrix = std::vector<std::vector<double>>;

// Cosine schedule. abar[t] = cos(0.5*pi*(t/T + s)/(1 + s))^2 for t = 0..T with
// abar[T] clamped to 0. The chain starts from clean data, so the cumulative
// retention used by corruption and posteriors is cumulative(0) = 1 and
// cumulative(t) = abar[t] for t >= 1; single steps alpha[t] are ratios of
// consecutive cumulative values, which makes chained steps compose exactly to
// the jump at abar[t].
struct NoiseSchedule {
  int T = 0;
  double s_offset = 0.008;
  std::vector<double> abar;   // size T + 1
  std::vector<double> alpha;  // size T + 1, alpha[0] = 1

  double cumulative(int t) const { return t == 0 ? 1.0 : abar.at(t); }
};

NoiseSchedule cosine_schedule(int T, double s_offset = 0.008);

struct Marginals {
  std::vector<double> m_v;  // F_V, PAD = 0
  std::vector<double> m_e;  // F_E
  Matrix m_ev;              // F_E x F_V: endpoint types given the pair kind
  Matrix m_ve;              // F_V x F_E: pair kinds given an endpoint type

  int f_v() const { return static_cast<int>(m_v.size()); }
  int f_e() const { return static_cast<int>(m_e.size()); }
};

// Counts over the training split. Every unordered atom pair of a molecule
// counts once toward m_e (non-bonded pairs as "none"), and both of its
// endpoint types count toward the pair kind's m_ev row. m_ve is the
// transpose of the same co-occurrence counts normalized per atom type, i.e.
// pair kinds given an endpoint type. Rows without any count fall back to m_v
// (m_ev) or m_e (m_ve, for atom types absent from the data); the PAD row of
// m_ve is a point mass on "none". Throws EmptyDataset when the training split
// is empty.
Marginals estimate_marginals(const Dataset &d);
Marginals estimate_marginals(const std::vector<MolecularGraph> &graphs, const AtomVocab &vocab);

enum class CouplingMode { kSelfPreserving, kLiteral };
std::string to_string(CouplingMode m);
CouplingMode coupling_from_string(const std::string &s);

struct TransitionBlocks {
  Matrix q_v;   // F_V x F_V
  Matrix q_e;   // F_E x F_E
  Matrix q_ev;  // F_E x F_V
  Matrix q_ve;  // F_V x F_E
  double abar = 1.0;
  CouplingMode mode = CouplingMode::kSelfPreserving;
};

// Q_V = a I + (1-a) 1 m_v', Q_E likewise. Cross blocks: (1-a) times the
// co-occurrence rows (self-preserving, rows sum to 1-a), or additionally
// a times the rectangular identity (literal).
TransitionBlocks build_blocks(const Marginals &m, double abar,
                              CouplingMode mode = CouplingMode::kSelfPreserving);

// One corruption draw. Per real atom i the node law is proportional to
//   Q_V[x_i] + lambda * mean_j Q_EV[e_ij]      (j over the other real atoms)
// and per real pair i<j the edge law to
//   Q_E[e_ij] + lambda * (Q_VE[x_i] + Q_VE[x_j]) / 2.
// In literal mode Q_E[e_ij] is replaced by the mean of Q_E over every edge
// slot in rows i and j. Real atoms never become PAD; diagonal and PAD slots
// stay "none". Throws ShapeError when the tokens and blocks disagree.
GraphTokens forward_sample(const GraphTokens &x, const TransitionBlocks &blocks, double lambda,
                           Rng &rng);
// x^0 -> x^t with blocks at cumulative(t).
GraphTokens forward_jump_sample(const GraphTokens &x0, const TransitionBlocks &blocks, double lambda,
                                Rng &rng);
// x^{t-1} -> x^t with blocks at alpha[t].
GraphTokens forward_step_sample(const GraphTokens &x_prev, const TransitionBlocks &blocks,
                                double lambda, Rng &rng);

enum class TokenKind { kNode, kEdge };

// q(x^{t-1} = z | x^t, x^0) proportional to Q^t[z, x_t] * Qbar^{t-1}[x0, z]
// with the diagonal (marginal) blocks. A zero normalizer (x_t unreachable from
// x0) yields a point mass at x_t. `normalizer` receives the unnormalized
// total, which is zero exactly when x0 cannot reach x_t.
std::vector<double> posterior(int x_t, int x0, int t, const NoiseSchedule &sched,
                              const Marginals &m, TokenKind kind, double *normalizer = nullptr);
// All rows at once: result[x0] = posterior(x_t, x0, ...).
Matrix posterior_table(int x_t, int t, const NoiseSchedule &sched, const Marginals &m,
                       TokenKind kind);

// Node types iid from m_v for the first n_atoms rows, edges iid from m_e on
// real pairs. Throws RangeError unless 1 <= n_atoms <= n_max.
GraphTokens stationary_sample(const Marginals &m, int n_atoms, int n_max, Rng &rng);

// Empirical node/edge histograms over real atoms and real pairs.
struct TokenHistogram {
  std::vector<double> nodes;
  std::vector<double> edges;
};
TokenHistogram token_histogram(const std::vector<GraphTokens> &samples, int f_v);
double total_variation(const std::vector<double> &p, const std::vector<double> &q);

nlohmann::json to_json(const NoiseSchedule &s);
nlohmann::json to_json(const Marginals &m, const AtomVocab &vocab);
Marginals marginals_from_json(const nlohmann::json &j);
nlohmann::json marginals_to_json(const Marginals &m);

}  // namespace graphdiff
