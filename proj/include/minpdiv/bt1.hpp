// bt1.hpp
//
// Classification of p-kernels: modules over a residue field with
// ker F = im V and ker V = im F.  Every such module over an algebraically
// closed field is a direct sum of cyclic word modules M(w), one basis
// vector per letter of a cyclic word w over {f, v}:
//
//   position i carries 'v'  <=>  F z_i = z_{i+1}   (an F-edge forward)
//   position i carries 'f'  <=>  V z_{i+1} = z_i   (a V-edge backward)
//
// and all other F/V values on basis vectors are zero.  Words are stored in
// canonical form (lexicographically least rotation, 'f' < 'v'); only
// aperiodic words give indecomposables.
//
// Provides: word modules and their canonical level-ell lifts, BT1
// validation, the decomposition of a module into cyclic words (certified by
// an explicit isomorphism, extending the field when the decomposition is
// not realizable over the base), minimality, the a-number, and the Newton
// polygon dictionary word -> slopes.

#pragma once

#include <minpdiv/dmodule.hpp>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace minpdiv {

// ---------------------------------------------------------------------------
// Cyclic words
// ---------------------------------------------------------------------------

inline bool is_word(const std::string& w) {
  if (w.empty()) return false;
  for (char c : w)
    if (c != 'f' && c != 'v') return false;
  return true;
}

// Lexicographically least rotation.
inline std::string canonical_rotation(const std::string& w) {
  MINPDIV_CHECK(is_word(w), "canonical_rotation: bad word");
  std::string best = w;
  std::string cur = w;
  for (size_t i = 1; i < w.size(); ++i) {
    std::rotate(cur.begin(), cur.begin() + 1, cur.end());
    if (cur < best) best = cur;
  }
  return best;
}

inline bool is_aperiodic(const std::string& w) {
  const size_t L = w.size();
  for (size_t d = 1; d < L; ++d) {
    if (L % d != 0) continue;
    bool period = true;
    for (size_t i = 0; i < L && period; ++i) period = (w[i] == w[i % d]);
    if (period) return false;
  }
  return true;
}

// All aperiodic canonical words of the given length, lexicographically.
inline std::vector<std::string> aperiodic_words(int length) {
  std::vector<std::string> out;
  MINPDIV_CHECK(length >= 1 && length <= 24, "aperiodic_words: length");
  for (u64 mask = 0; mask < (u64(1) << length); ++mask) {
    std::string w(length, 'f');
    for (int i = 0; i < length; ++i)
      if ((mask >> i) & 1) w[i] = 'v';
    if (!is_aperiodic(w)) continue;
    if (canonical_rotation(w) != w) continue;
    out.push_back(w);
  }
  return out;
}

// The word of the p-kernel of H_{m,n}, by walking the basis cycle: from
// index j, an F-edge leads to j+n when j < m (letter v), otherwise the
// V-edge into j comes from j-m (letter f).  Result is canonical.
inline std::string minimal_word(int m, int n) {
  if (m < 0 || n < 0 || m + n == 0 || std::gcd(m, n) != 1)
    input_error("minimal_word: need coprime m, n");
  const int h = m + n;
  std::string w;
  int j = 0;
  for (int step = 0; step < h; ++step) {
    if (j < m) {
      w += 'v';
      j += n;
    } else {
      w += 'f';
      j -= m;
    }
  }
  MINPDIV_CHECK(j == 0, "minimal_word: walk did not close");
  return canonical_rotation(w);
}

// ---------------------------------------------------------------------------
// Word modules and lifts
// ---------------------------------------------------------------------------

// M(w) over a residue field (level-1 ring).
inline DieudonneModule word_module(const Ring& rg, const std::string& w) {
  MINPDIV_CHECK(rg->ell == 1, "word_module: level-1 ring required");
  if (!is_word(w)) input_error("word_module: bad word");
  const int L = (int)w.size();
  DieudonneModule M;
  M.ring = rg;
  M.rank = L;
  M.Fmat = GRMatrix(rg, L, L);
  M.Vmat = GRMatrix(rg, L, L);
  for (int i = 0; i < L; ++i) {
    int j = (i + 1) % L;
    if (w[i] == 'v')
      M.Fmat.at(j, i) = GRElement::one(rg);
    else
      M.Vmat.at(i, j) = GRElement::one(rg);
  }
  return M;
}

// The canonical level-ell lift of M(w): the missing edges become p-edges.
//   w_i = v:  F z_i = z_{i+1},    V z_{i+1} = p z_i
//   w_i = f:  F z_i = p z_{i+1},  V z_{i+1} = z_i
// FV = VF = p holds exactly, and the reduction mod p is word_module(w).
inline DieudonneModule word_lift(const Ring& rg, const std::string& w) {
  if (!is_word(w)) input_error("word_lift: bad word");
  const int L = (int)w.size();
  DieudonneModule M;
  M.ring = rg;
  M.rank = L;
  M.Fmat = GRMatrix(rg, L, L);
  M.Vmat = GRMatrix(rg, L, L);
  for (int i = 0; i < L; ++i) {
    int j = (i + 1) % L;
    bool isv = (w[i] == 'v');
    M.Fmat.at(j, i) = GRElement::from_int(rg, isv ? 1 : rg->p);
    M.Vmat.at(i, j) = GRElement::from_int(rg, isv ? rg->p : 1);
  }
  return M;
}

// Direct sum of word modules for a word multiset, over a level-1 ring.
inline DieudonneModule word_sum_module(const Ring& rg,
                                       const std::vector<std::string>& words) {
  MINPDIV_CHECK(!words.empty(), "word_sum_module: no words");
  DieudonneModule M = word_module(rg, words[0]);
  for (size_t i = 1; i < words.size(); ++i)
    M = direct_sum(M, word_module(rg, words[i]));
  return M;
}

// ---------------------------------------------------------------------------
// BT1 validation and basic invariants
// ---------------------------------------------------------------------------

// ker F = im V and ker V = im F over the residue field.  Equivalent to:
// FV = VF = 0 and rank F + rank V = rank of the module.
inline bool validate_bt1(const DieudonneModule& M, std::string* why = nullptr) {
  if (M.ring->ell != 1) {
    if (why) *why = "not a level-1 module";
    return false;
  }
  GRMatrix z(M.ring, M.rank, M.rank);
  if (!(mat_mul(M.Fmat, mat_sigma(M.Vmat, 1)) == z)) {
    if (why) *why = "F o V != 0";
    return false;
  }
  if (!(mat_mul(M.Vmat, mat_sigma(M.Fmat, -1)) == z)) {
    if (why) *why = "V o F != 0";
    return false;
  }
  int rf = smith_normal_form(M.Fmat).rank_unit;
  int rv = smith_normal_form(M.Vmat).rank_unit;
  if (rf + rv != M.rank) {
    if (why)
      *why = "rank F + rank V = " + std::to_string(rf) + " + " +
             std::to_string(rv) + " != " + std::to_string(M.rank);
    return false;
  }
  return true;
}

// Flattened F_p matrix of x -> Fmat * sigma^t(x).
inline ZplMatrix flatten_semilinear(const GRMatrix& A, long long twist) {
  const Ring& rg = A.ring;
  const int r = rg->r;
  const u64 m = rg->pell;
  ZplMatrix out(rg->p, rg->ell, A.rows * r, A.cols * r);
  std::vector<u64> sig = sigma_matrix(rg, twist);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) {
      if (A.at(i, j).is_zero()) continue;
      std::vector<u64> blk = colmat_mul(mult_matrix(A.at(i, j)), sig, r, m);
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b)
          out.at(i * r + b, j * r + a) =
              (out.at(i * r + b, j * r + a) + blk[(size_t)a * r + b]) % m;
    }
  return out;
}

// dim(ker F intersect ker V) over the residue field.
inline int a_number(const DieudonneModule& M) {
  DieudonneModule K = (M.ring->ell == 1) ? M : pkernel(M);
  ZplMatrix f = flatten_semilinear(K.Fmat, 1);
  ZplMatrix v = flatten_semilinear(K.Vmat, -1);
  ZplMatrix stacked(K.ring->p, 1, f.rows + v.rows, f.cols);
  for (int i = 0; i < f.rows; ++i)
    for (int j = 0; j < f.cols; ++j) stacked.at(i, j) = f.at(i, j);
  for (int i = 0; i < v.rows; ++i)
    for (int j = 0; j < v.cols; ++j) stacked.at(f.rows + i, j) = v.at(i, j);
  ZplSolveResult s = zpl_solve(stacked, std::vector<u64>(stacked.rows, 0));
  MINPDIV_CHECK(s.solvable, "a_number: homogeneous system");
  int nullity = (int)s.kernel.size();
  MINPDIV_CHECK(nullity % K.ring->r == 0, "a_number: not field-dimensional");
  return nullity / K.ring->r;
}

// ---------------------------------------------------------------------------
// Word-side rank combinatorics (used to prune decomposition candidates)
// ---------------------------------------------------------------------------

namespace detail {

// Lengths of maximal cyclic runs of the given letter.
inline std::vector<int> cyclic_runs(const std::string& w, char letter) {
  const int L = (int)w.size();
  bool all = true;
  for (char c : w) all = all && (c == letter);
  if (all) return {L};  // one full cycle
  // rotate so w starts right after a non-letter position
  int start = 0;
  while (w[start] == letter) ++start;
  std::vector<int> runs;
  int cur = 0;
  for (int k = 1; k <= L; ++k) {
    char c = w[(start + k) % L];
    if (c == letter)
      ++cur;
    else {
      if (cur) runs.push_back(cur);
      cur = 0;
    }
  }
  if (cur) runs.push_back(cur);
  return runs;
}

// rank of F^a on M(w): windows of a consecutive v's (cyclically); a pure-v
// word has bijective F.
inline int word_rank_power(const std::string& w, char letter, int a) {
  const int L = (int)w.size();
  bool all = true;
  for (char c : w) all = all && (c == letter);
  if (all) return L;
  int total = 0;
  for (int run : cyclic_runs(w, letter)) total += std::max(run - a + 1, 0);
  return total;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Kraft decomposition
// ---------------------------------------------------------------------------

struct KraftOptions {
  u64 seed = 1;
  u64 samples = 20000;       // per-candidate randomized iso budget
  int max_extension = 12;    // give up past [field : base] > this
};

struct KraftDecomposition {
  std::vector<std::string> words;  // canonical, sorted
  Ring field;                      // field of the certificate
  int extension_degree = 1;        // [field : input field]
  DieudonneModule input;           // the input, over `field`
  DieudonneModule standard;        // word_sum_module(field, words)
  GRMatrix iso;                    // invertible: input -> standard
};

namespace detail {

// All multisets of aperiodic canonical words with total length `total`,
// enumerated deterministically (word pool ordered by length then lex,
// multisets nondecreasing in pool index).
inline void enumerate_word_multisets(
    int total, const std::vector<std::string>& pool, size_t from,
    std::vector<std::string>& cur,
    const std::function<bool(const std::vector<std::string>&)>& visit,
    bool& stop) {
  if (stop) return;
  if (total == 0) {
    if (visit(cur)) stop = true;
    return;
  }
  for (size_t i = from; i < pool.size(); ++i) {
    if ((int)pool[i].size() > total) continue;
    cur.push_back(pool[i]);
    enumerate_word_multisets(total - (int)pool[i].size(), pool, i, cur, visit,
                             stop);
    cur.pop_back();
    if (stop) return;
  }
}

}  // namespace detail

// Decompose a BT1 module into cyclic words with a certified isomorphism.
// Sound: a certificate identifies the module with the word sum over the
// stated field, and distinct word multisets give non-isomorphic sums, so
// the first certified candidate is the decomposition.  The field is
// extended (degree 2, then 3, then 2, ...) when no candidate certifies
// over the current field.
inline KraftDecomposition kraft_decompose(const DieudonneModule& M_in,
                                          const KraftOptions& opts = {}) {
  DieudonneModule M = (M_in.ring->ell == 1) ? M_in : pkernel(M_in);
  std::string why;
  if (!validate_bt1(M, &why))
    input_error("kraft_decompose: not a BT1 module: " + why);
  const int h = M.rank;

  // Rank data of the input.
  DieudonneModule K = M;
  std::vector<int> rankF(h + 1), rankV(h + 1);
  for (int a = 1; a <= h; ++a) {
    rankF[a] = smith_normal_form(semilinear_power(K.F(), a).mat).rank_unit;
    rankV[a] = smith_normal_form(semilinear_power(K.V(), a).mat).rank_unit;
  }

  // Candidate pool and pruned candidate list (field-independent).
  std::vector<std::string> pool;
  for (int L = 1; L <= h; ++L)
    for (const auto& w : aperiodic_words(L)) pool.push_back(w);
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });

  std::vector<std::vector<std::string>> candidates;
  {
    std::vector<std::string> cur;
    bool stop = false;
    detail::enumerate_word_multisets(
        h, pool, 0, cur,
        [&](const std::vector<std::string>& ws) {
          for (int a = 1; a <= h; ++a) {
            int rf = 0, rv = 0;
            for (const auto& w : ws) {
              rf += detail::word_rank_power(w, 'v', a);
              rv += detail::word_rank_power(w, 'f', a);
            }
            if (rf != rankF[a] || rv != rankV[a]) return false;
          }
          candidates.push_back(ws);
          return false;  // keep enumerating
        },
        stop);
  }
  if (candidates.empty())
    throw std::runtime_error(
        "kraft_decompose: no word multiset matches the rank profile");

  // Try to certify candidates, extending the field as needed.
  Ring field = M.ring;
  DieudonneModule Mf = M;
  int ext = 1;
  std::vector<int> ladder{2, 3, 2};  // cumulative: r, 2r, 6r, 12r
  size_t rung = 0;
  for (;;) {
    for (const auto& ws : candidates) {
      DieudonneModule N = word_sum_module(field, ws);
      IsoResult res = are_isomorphic(
          Mf, N, {.seed = opts.seed, .samples = opts.samples});
      if (res.verdict == IsoVerdict::certificate) {
        KraftDecomposition out;
        out.words = ws;
        std::sort(out.words.begin(), out.words.end());
        out.field = field;
        out.extension_degree = ext;
        out.input = Mf;
        // N was assembled in enumeration order; permute its summands so
        // that `standard` and `iso` follow the sorted word order exactly.
        std::vector<size_t> order(ws.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return ws[a] < ws[b]; });
        std::vector<int> off_old(ws.size() + 1, 0);
        for (size_t i = 0; i < ws.size(); ++i)
          off_old[i + 1] = off_old[i] + (int)ws[i].size();
        GRMatrix P(field, N.rank, N.rank);
        int pos = 0;
        for (size_t k = 0; k < order.size(); ++k) {
          int len = (int)ws[order[k]].size();
          for (int t = 0; t < len; ++t)
            P.at(pos + t, off_old[order[k]] + t) = GRElement::one(field);
          pos += len;
        }
        out.standard = word_sum_module(field, out.words);
        out.iso = mat_mul(P, *res.g);
        return out;
      }
    }
    if (rung >= ladder.size() || ext * ladder[rung] > opts.max_extension)
      throw std::runtime_error(
          "kraft_decompose: no candidate certified within the field "
          "extension budget (degree " +
          std::to_string(ext) + ")");
    int d = ladder[rung++];
    ext *= d;
    Ring bigger = gr_make(field->p, 1, field->r * d, field->max_degree);
    RingEmbedding emb = embed_ring(field, bigger);
    Mf = base_extend(Mf, emb);
    field = bigger;
  }
}

// ---------------------------------------------------------------------------
// Minimality and the Newton polygon dictionary
// ---------------------------------------------------------------------------

// The polygon attached to a word multiset: a word of length h_i with n_i
// letters f contributes slope n_i / h_i with multiplicity h_i, i.e. the
// part (m, n) = ((h_i - n_i)/g, n_i/g) with multiplicity g = gcd.
inline NewtonPolygon np_from_words(const std::vector<std::string>& words) {
  std::vector<NewtonPart> parts;
  for (const auto& w : words) {
    int hi = (int)w.size();
    int ni = (int)std::count(w.begin(), w.end(), 'f');
    parts.push_back({hi - ni, ni, 1});
  }
  return np_make(std::move(parts));
}

// The polygon the p-kernel "remembers": decompose and apply the dictionary.
inline NewtonPolygon np_prime(const DieudonneModule& M,
                              const KraftOptions& opts = {}) {
  return np_from_words(kraft_decompose(M, opts).words);
}

struct MinimalityResult {
  bool minimal = false;
  NewtonPolygon beta;          // defined when minimal
  KraftDecomposition decomp;
  std::string why_not;
};

// A BT1 module is minimal iff every word in its decomposition is the word
// of some H_{m,n}[p] with m, n coprime.
inline MinimalityResult is_minimal(const DieudonneModule& M,
                                   const KraftOptions& opts = {}) {
  MinimalityResult out;
  out.decomp = kraft_decompose(M, opts);
  std::vector<NewtonPart> parts;
  for (const auto& w : out.decomp.words) {
    int ni = (int)std::count(w.begin(), w.end(), 'f');
    int mi = (int)w.size() - ni;
    if (std::gcd(mi, ni) != 1) {
      out.why_not = "word " + w + " has gcd(#v, #f) = " +
                    std::to_string(std::gcd(mi, ni));
      return out;
    }
    if (w != minimal_word(mi, ni)) {
      out.why_not = "word " + w + " is not the minimal word " +
                    minimal_word(mi, ni) + " of slope " + std::to_string(ni) +
                    "/" + std::to_string(mi + ni);
      return out;
    }
    parts.push_back({mi, ni, 1});
  }
  out.minimal = true;
  out.beta = np_make(std::move(parts));
  return out;
}

}  // namespace minpdiv
