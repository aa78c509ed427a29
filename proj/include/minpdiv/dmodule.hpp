// dmodule.hpp
//
// Finite-level Dieudonne modules: free modules over GR(p^ell, r) of finite
// rank with a sigma-linear operator F and a sigma^{-1}-linear operator V
// satisfying FV = VF = p.  A module is stored by the matrices of F and V:
//   F(x) = Fmat * sigma(x),   V(x) = Vmat * sigma^{-1}(x)
// acting on coordinate columns, sigma applied entrywise.
//
// Provides the standard isosimple modules H_{m,n}, their direct sums H(beta)
// indexed by a Newton polygon (with the block layout recorded as a
// "marking"), duality, base extension, p-kernels, unipotent deformations
// that fix the p-kernel, the valuation attached to a marking, and an
// isomorphism test that produces an explicit invertible certificate or a
// sound refutation.

#pragma once

#include <minpdiv/arith.hpp>
#include <minpdiv/newton.hpp>

#include <climits>
#include <optional>
#include <string>
#include <vector>

namespace minpdiv {

// ---------------------------------------------------------------------------
// Semilinear maps
// ---------------------------------------------------------------------------

// A sigma^twist-semilinear endomorphism: x -> mat * sigma^twist(x).
struct SemilinearMap {
  GRMatrix mat;
  long long twist = 0;

  std::vector<GRElement> apply(const std::vector<GRElement>& x) const {
    std::vector<GRElement> y(x.size(), GRElement::zero(mat.ring));
    for (size_t i = 0; i < x.size(); ++i) y[i] = sigma_pow(x[i], twist);
    return mat_apply(mat, y);
  }
};

// Composition a after b.
inline SemilinearMap compose(const SemilinearMap& a, const SemilinearMap& b) {
  return SemilinearMap{mat_mul(a.mat, mat_sigma(b.mat, a.twist)),
                       a.twist + b.twist};
}

// k-fold composition of a with itself (k >= 0).
inline SemilinearMap semilinear_power(const SemilinearMap& a, int k) {
  SemilinearMap acc{GRMatrix::identity(a.mat.ring, a.mat.rows), 0};
  for (int i = 0; i < k; ++i) acc = compose(acc, a);
  return acc;
}

// ---------------------------------------------------------------------------
// DieudonneModule
// ---------------------------------------------------------------------------

struct DieudonneModule {
  Ring ring;
  int rank = 0;
  GRMatrix Fmat, Vmat;

  SemilinearMap F() const { return {Fmat, 1}; }
  SemilinearMap V() const { return {Vmat, -1}; }
};

// FV = VF = p, both directions (p is a zero divisor, so neither implies
// the other).
inline bool module_valid(const DieudonneModule& M, std::string* why = nullptr) {
  GRMatrix pI = mat_scale_int(M.ring->p, GRMatrix::identity(M.ring, M.rank));
  if (!(mat_mul(M.Fmat, mat_sigma(M.Vmat, 1)) == pI)) {
    if (why) *why = "F o V != p";
    return false;
  }
  if (!(mat_mul(M.Vmat, mat_sigma(M.Fmat, -1)) == pI)) {
    if (why) *why = "V o F != p";
    return false;
  }
  return true;
}

inline void require_valid(const DieudonneModule& M) {
  std::string why;
  MINPDIV_CHECK(module_valid(M, &why), "module invalid: " + why);
}

// The standard isosimple module H_{m,n}: rank h = m+n, F shifts the basis
// by n, V shifts by m, each wrapping with a factor p.
inline DieudonneModule build_hmn(const Ring& rg, int m, int n) {
  if (m < 0 || n < 0 || m + n == 0) input_error("build_hmn: need m,n >= 0, m+n > 0");
  if (std::gcd(m, n) != 1) input_error("build_hmn: m and n must be coprime");
  const int h = m + n;
  DieudonneModule M;
  M.ring = rg;
  M.rank = h;
  M.Fmat = GRMatrix(rg, h, h);
  M.Vmat = GRMatrix(rg, h, h);
  for (int i = 0; i < h; ++i) {
    u64 fc = (i + n >= h) ? rg->p : 1;
    u64 vc = (i + m >= h) ? rg->p : 1;
    M.Fmat.at((i + n) % h, i) = GRElement::from_int(rg, fc);
    M.Vmat.at((i + m) % h, i) = GRElement::from_int(rg, vc);
  }
  return M;
}

// The uniformizer of End(H_{m,n}): the basis shift by one, wrapping with a
// factor p.  As matrices, P^h = p, P^n = Fmat, P^m = Vmat.  As a semilinear
// map its twist t must satisfy n t = 1 and m t = -1 mod r; this is solvable
// exactly when r | h t for t = n^{-1} mod r (always when r | h or r = 1).
inline SemilinearMap pi_action(const Ring& rg, int m, int n) {
  if (std::gcd(m, n) != 1 || m + n == 0) input_error("pi_action: bad (m, n)");
  const int h = m + n;
  const int r = rg->r;
  // twist = n^{-1} mod r, if consistent
  long long t = -1;
  for (long long c = 0; c < r; ++c) {
    if ((n % r * c) % r == 1 % r && ((m % r * c) % r + 1) % r == 0) {
      t = c;
      break;
    }
  }
  if (t < 0)
    input_error("pi_action: no semilinear twist over this ring (need r | h*t)");
  GRMatrix P(rg, h, h);
  for (int i = 0; i < h; ++i)
    P.at((i + 1) % h, i) =
        GRElement::from_int(rg, (i + 1 >= h) ? rg->p : 1);
  return SemilinearMap{P, t};
}

// ---------------------------------------------------------------------------
// Marked modules: block layout for H(beta)
// ---------------------------------------------------------------------------

// A marked module is a module together with a block structure: block b is a
// copy of H_{m_b, n_b} occupying coordinates [offset_b, offset_b + h_b).
// The marking asserts that the standard coordinates ARE the marked basis;
// every constructor and transformation below preserves that normal form.
struct MarkedModule {
  DieudonneModule mod;
  std::vector<std::pair<int, int>> blocks;  // (m_b, n_b) per copy

  int block_offset(int b) const {
    int off = 0;
    for (int i = 0; i < b; ++i) off += blocks[i].first + blocks[i].second;
    return off;
  }
  int block_height(int b) const {
    return blocks[b].first + blocks[b].second;
  }
  int T() const {
    long long t = 1;
    for (const auto& [m, n] : blocks) t = std::lcm(t, (long long)(m + n));
    return (int)t;
  }
  NewtonPolygon polygon() const {
    std::vector<NewtonPart> parts;
    for (const auto& [m, n] : blocks) parts.push_back({m, n, 1});
    return np_make(parts);
  }
};

// H(beta) = direct sum of H_{m,n} over the parts of beta (with multiplicity),
// in increasing slope order.
inline MarkedModule build_hbeta(const Ring& rg, const NewtonPolygon& beta) {
  MarkedModule out;
  int total = beta.height();
  if (total == 0) input_error("build_hbeta: empty polygon");
  out.mod.ring = rg;
  out.mod.rank = total;
  out.mod.Fmat = GRMatrix(rg, total, total);
  out.mod.Vmat = GRMatrix(rg, total, total);
  int off = 0;
  for (const auto& part : beta.parts) {
    for (int copy = 0; copy < part.mult; ++copy) {
      DieudonneModule blk = build_hmn(rg, part.m, part.n);
      for (int i = 0; i < blk.rank; ++i)
        for (int j = 0; j < blk.rank; ++j) {
          out.mod.Fmat.at(off + i, off + j) = blk.Fmat.at(i, j);
          out.mod.Vmat.at(off + i, off + j) = blk.Vmat.at(i, j);
        }
      out.blocks.push_back({part.m, part.n});
      off += blk.rank;
    }
  }
  return out;
}

inline DieudonneModule direct_sum(const DieudonneModule& A,
                                  const DieudonneModule& B) {
  MINPDIV_CHECK(same_ring(A.ring, B.ring), "direct_sum: ring mismatch");
  DieudonneModule M;
  M.ring = A.ring;
  M.rank = A.rank + B.rank;
  M.Fmat = GRMatrix(M.ring, M.rank, M.rank);
  M.Vmat = GRMatrix(M.ring, M.rank, M.rank);
  for (int i = 0; i < A.rank; ++i)
    for (int j = 0; j < A.rank; ++j) {
      M.Fmat.at(i, j) = A.Fmat.at(i, j);
      M.Vmat.at(i, j) = A.Vmat.at(i, j);
    }
  for (int i = 0; i < B.rank; ++i)
    for (int j = 0; j < B.rank; ++j) {
      M.Fmat.at(A.rank + i, A.rank + j) = B.Fmat.at(i, j);
      M.Vmat.at(A.rank + i, A.rank + j) = B.Vmat.at(i, j);
    }
  return M;
}

// ---------------------------------------------------------------------------
// Functors: base extension, level change, duality, p-kernel
// ---------------------------------------------------------------------------

inline DieudonneModule base_extend(const DieudonneModule& M,
                                   const RingEmbedding& emb) {
  MINPDIV_CHECK(same_ring(M.ring, emb.src), "base_extend: wrong source");
  return DieudonneModule{emb.dst, M.rank, emb.apply(M.Fmat),
                         emb.apply(M.Vmat)};
}

inline MarkedModule base_extend(const MarkedModule& M,
                                const RingEmbedding& emb) {
  return MarkedModule{base_extend(M.mod, emb), M.blocks};
}

// Reduce to a lower level (or the residue field via level 1).
inline DieudonneModule module_to_ring(const DieudonneModule& M,
                                      const Ring& target) {
  return DieudonneModule{target, M.rank, mat_to_ring(M.Fmat, target),
                         mat_to_ring(M.Vmat, target)};
}

// The p-kernel M[p] = M/pM with the induced F and V over the residue field.
inline DieudonneModule pkernel(const DieudonneModule& M) {
  return module_to_ring(M, residue_ring(M.ring));
}

// Dual module on the dual basis: Fd = sigma(Vmat)^T, Vd = sigma^{-1}(Fmat)^T
// (from <F* phi, x> = sigma<phi, V x> and <V* phi, x> = sigma^{-1}<phi, F x>).
inline DieudonneModule dualize(const DieudonneModule& M) {
  return DieudonneModule{M.ring, M.rank, mat_transpose(mat_sigma(M.Vmat, 1)),
                         mat_transpose(mat_sigma(M.Fmat, -1))};
}

// Marked duality.  On the dual basis the operators of a standard block
// H_{m,n} run the index cycle downward (the adjoint of the shift-up), so
// reversing the index order within each block makes it standard H_{n,m};
// slope order also reverses across blocks, so blocks are permuted back into
// increasing slope order.  Both reversals are involutions, so the double
// marked dual is the identity.
inline MarkedModule dualize_marked(const MarkedModule& M) {
  DieudonneModule D = dualize(M.mod);
  const int nblocks = (int)M.blocks.size();
  std::vector<int> perm(M.mod.rank);  // perm[new coord] = old coord
  {
    int noff = 0;
    for (int nb = 0; nb < nblocks; ++nb) {
      int ob = nblocks - 1 - nb;
      int ooff = M.block_offset(ob);
      int h = M.block_height(ob);
      for (int i = 0; i < h; ++i) perm[noff + i] = ooff + (h - 1 - i);
      noff += h;
    }
  }
  MarkedModule out;
  out.mod.ring = M.mod.ring;
  out.mod.rank = M.mod.rank;
  out.mod.Fmat = GRMatrix(M.mod.ring, M.mod.rank, M.mod.rank);
  out.mod.Vmat = GRMatrix(M.mod.ring, M.mod.rank, M.mod.rank);
  for (int i = 0; i < M.mod.rank; ++i)
    for (int j = 0; j < M.mod.rank; ++j) {
      out.mod.Fmat.at(i, j) = D.Fmat.at(perm[i], perm[j]);
      out.mod.Vmat.at(i, j) = D.Vmat.at(perm[i], perm[j]);
    }
  for (int nb = 0; nb < nblocks; ++nb) {
    auto [m, n] = M.blocks[nblocks - 1 - nb];
    out.blocks.push_back({n, m});
  }
  return out;
}

// Unipotent deformation: F' = F o (1 + pU), V' = (1 + pU)^{-1} o V.  This
// preserves FV = VF = p exactly and leaves the p-kernel unchanged; it need
// not preserve the isomorphism class.
inline DieudonneModule deform(const DieudonneModule& M, const GRMatrix& U) {
  MINPDIV_CHECK(U.rows == M.rank && U.cols == M.rank, "deform: shape");
  GRMatrix G = mat_add(GRMatrix::identity(M.ring, M.rank),
                       mat_scale_int(M.ring->p, U));
  GRMatrix Ginv = mat_inverse(G);
  return DieudonneModule{M.ring, M.rank, mat_mul(M.Fmat, mat_sigma(G, 1)),
                         mat_mul(Ginv, M.Vmat)};
}

// ---------------------------------------------------------------------------
// The valuation attached to a marking
// ---------------------------------------------------------------------------

constexpr long long VAL_INF = LLONG_MAX;

// v(B) in units of 1/T: v = a + min{ i/h_b : coordinate (b, i) of p^{-a} B
// is a unit }, where a is the largest k with B in p^k M.  v(0) = infinity.
inline long long val_scaled(const MarkedModule& M,
                            const std::vector<GRElement>& B, int T) {
  MINPDIV_CHECK((int)B.size() == M.mod.rank, "val_scaled: shape");
  const int ell = M.mod.ring->ell;
  int a = ell;
  for (const auto& c : B) a = std::min(a, gr_val(c));
  if (a >= ell) return VAL_INF;
  long long best = VAL_INF;
  int off = 0;
  for (size_t b = 0; b < M.blocks.size(); ++b) {
    int h = M.blocks[b].first + M.blocks[b].second;
    MINPDIV_CHECK(T % h == 0, "val_scaled: T not divisible by block height");
    for (int i = 0; i < h; ++i) {
      if (gr_val(B[off + i]) == a)
        best = std::min(best, (long long)i * (T / h));
    }
    off += h;
  }
  MINPDIV_CHECK(best != VAL_INF, "val_scaled: internal");
  return (long long)a * T + best;
}

// ---------------------------------------------------------------------------
// Flattening semilinear conditions to Z/p^ell
// ---------------------------------------------------------------------------

// Multiplication-by-c as an r x r matrix over Z/p^ell acting on coefficient
// vectors, stored column-major like RingDescriptor::frob.
inline std::vector<u64> mult_matrix(const GRElement& c) {
  const Ring& rg = c.ring;
  const int r = rg->r;
  std::vector<u64> mat((size_t)r * r, 0);
  for (int i = 0; i < r; ++i) {
    std::vector<u64> ei(r, 0);
    ei[i] = 1;
    GRElement img = gr_mul(c, GRElement(rg, ei));
    for (int j = 0; j < r; ++j) mat[(size_t)i * r + j] = img.c[j];
  }
  return mat;
}

// Column-major r x r product A * B over Z/m.
inline std::vector<u64> colmat_mul(const std::vector<u64>& A,
                                   const std::vector<u64>& B, int r, u64 m) {
  std::vector<u64> C((size_t)r * r, 0);
  for (int i = 0; i < r; ++i)
    for (int s = 0; s < r; ++s) {
      u64 bsi = B[(size_t)i * r + s];
      if (bsi == 0) continue;
      for (int j = 0; j < r; ++j)
        C[(size_t)i * r + j] =
            (C[(size_t)i * r + j] + bsi * A[(size_t)s * r + j]) % m;
    }
  return C;
}

// sigma^k as a column-major r x r matrix.
inline std::vector<u64> sigma_matrix(const Ring& rg, long long k) {
  const int r = rg->r;
  long long e = ((k % r) + r) % r;
  std::vector<u64> mat((size_t)r * r, 0);
  for (int i = 0; i < r; ++i) mat[(size_t)i * r + i] = 1;
  for (long long t = 0; t < e; ++t) mat = colmat_mul(rg->frob, mat, r, rg->pell);
  return mat;
}

// The homomorphism conditions  g F1 = F2 sigma(g),  g V1 = V2 sigma^{-1}(g)
// as one Z/p^ell-linear system in the h2 x h1 unknown matrix g (flattened
// entrywise to coefficient vectors).  Returns the (2*h2*h1*r) x (h2*h1*r)
// system matrix; the unknown layout is slot ((a*h1 + b)*r + t) for entry
// g[a][b] coefficient t.
inline ZplMatrix hom_system(const DieudonneModule& M1,
                            const DieudonneModule& M2) {
  MINPDIV_CHECK(same_ring(M1.ring, M2.ring), "hom_system: ring mismatch");
  const Ring& rg = M1.ring;
  const int r = rg->r;
  const u64 m = rg->pell;
  const int h1 = M1.rank, h2 = M2.rank;
  const int nunk = h2 * h1 * r;
  ZplMatrix A(rg->p, rg->ell, 2 * nunk, nunk);
  std::vector<u64> sig = sigma_matrix(rg, 1);
  std::vector<u64> sig_inv = sigma_matrix(rg, -1);

  auto add_block = [&](int row_base, int col_base,
                       const std::vector<u64>& blk, bool negate) {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        u64 v = blk[(size_t)i * r + j] % m;
        if (negate) v = (m - v) % m;
        A.at(row_base + j, col_base + i) =
            (A.at(row_base + j, col_base + i) + v) % m;
      }
  };

  // Condition F, equations indexed (a, b): sum_k g[a][k] F1[k][b]
  //   - sum_k F2[a][k] sigma(g[k][b]) = 0.
  for (int a = 0; a < h2; ++a)
    for (int b = 0; b < h1; ++b) {
      int row = ((a * h1 + b)) * r;
      for (int k = 0; k < h1; ++k) {
        const GRElement& f1 = M1.Fmat.at(k, b);
        if (!f1.is_zero())
          add_block(row, (a * h1 + k) * r, mult_matrix(f1), false);
      }
      for (int k = 0; k < h2; ++k) {
        const GRElement& f2 = M2.Fmat.at(a, k);
        if (!f2.is_zero())
          add_block(row, (k * h1 + b) * r,
                    colmat_mul(mult_matrix(f2), sig, r, m), true);
      }
    }
  // Condition V, shifted by nunk rows.
  for (int a = 0; a < h2; ++a)
    for (int b = 0; b < h1; ++b) {
      int row = nunk + (a * h1 + b) * r;
      for (int k = 0; k < h1; ++k) {
        const GRElement& v1 = M1.Vmat.at(k, b);
        if (!v1.is_zero())
          add_block(row, (a * h1 + k) * r, mult_matrix(v1), false);
      }
      for (int k = 0; k < h2; ++k) {
        const GRElement& v2 = M2.Vmat.at(a, k);
        if (!v2.is_zero())
          add_block(row, (k * h1 + b) * r,
                    colmat_mul(mult_matrix(v2), sig_inv, r, m), true);
      }
    }
  return A;
}

// Unflatten a solution vector into an h2 x h1 matrix over the ring.
inline GRMatrix unflatten(const Ring& rg, const std::vector<u64>& flat,
                          int h2, int h1) {
  GRMatrix g(rg, h2, h1);
  const int r = rg->r;
  for (int a = 0; a < h2; ++a)
    for (int b = 0; b < h1; ++b) {
      std::vector<u64> c(r);
      for (int t = 0; t < r; ++t) c[t] = flat[(size_t)(a * h1 + b) * r + t];
      g.at(a, b) = GRElement(rg, std::move(c));
    }
  return g;
}

// A generating set (over Z/p^ell) of Hom(M1, M2).
inline std::vector<GRMatrix> hom_generators(const DieudonneModule& M1,
                                            const DieudonneModule& M2) {
  ZplMatrix A = hom_system(M1, M2);
  std::vector<u64> zero(A.rows, 0);
  ZplSolveResult s = zpl_solve(A, zero);
  MINPDIV_CHECK(s.solvable, "hom_generators: homogeneous system unsolvable");
  std::vector<GRMatrix> gens;
  for (const auto& k : s.kernel)
    gens.push_back(unflatten(M1.ring, k, M2.rank, M1.rank));
  return gens;
}

// Is g a homomorphism M1 -> M2?  (Exact matrix identities.)
inline bool is_hom(const DieudonneModule& M1, const DieudonneModule& M2,
                   const GRMatrix& g) {
  return mat_mul(g, M1.Fmat) == mat_mul(M2.Fmat, mat_sigma(g, 1)) &&
         mat_mul(g, M1.Vmat) == mat_mul(M2.Vmat, mat_sigma(g, -1));
}

// ---------------------------------------------------------------------------
// Isomorphism testing
// ---------------------------------------------------------------------------

enum class IsoVerdict { certificate, not_isomorphic, inconclusive };

struct IsoResult {
  IsoVerdict verdict = IsoVerdict::inconclusive;
  std::optional<GRMatrix> g;  // invertible hom when verdict == certificate
  std::string detail;
};

struct IsoOptions {
  u64 seed = 1;
  u64 samples = 10000;      // randomized budget when the span is too large
  u64 exhaustive_limit = 1 << 16;  // scan when p^dim <= this
};

namespace detail {

// Mod-p rank profile invariants: Smith exponent multisets of F and V at
// full level, ranks of the powers of F and V mod p, and the kernel
// dimension of the stacked (F, V) mod p.  Equal for isomorphic modules.
inline std::vector<int> iso_invariants(const DieudonneModule& M) {
  std::vector<int> out;
  SmithResult sf = smith_normal_form(M.Fmat);
  SmithResult sv = smith_normal_form(M.Vmat);
  out.insert(out.end(), sf.exponents.begin(), sf.exponents.end());
  out.insert(out.end(), sv.exponents.begin(), sv.exponents.end());
  DieudonneModule K = pkernel(M);
  for (int k = 1; k <= M.rank; ++k) {
    out.push_back(smith_normal_form(semilinear_power(K.F(), k).mat).rank_unit);
    out.push_back(smith_normal_form(semilinear_power(K.V(), k).mat).rank_unit);
  }
  return out;
}

// Gaussian elimination over F_p on flattened vectors, tracking the
// expression of each basis row in terms of the original generators.
struct FpSpan {
  u64 p = 0;
  int width = 0;
  std::vector<std::vector<u64>> basis;   // reduced rows
  std::vector<std::vector<u64>> expr;    // basis[i] = sum expr[i][j] * gen[j]
  std::vector<int> lead;                 // pivot column of basis[i]

  void add(const std::vector<u64>& row_in, int gen_index, int ngens) {
    std::vector<u64> row = row_in;
    std::vector<u64> ex(ngens, 0);
    ex[gen_index] = 1;
    for (size_t i = 0; i < basis.size(); ++i) {
      u64 c = row[lead[i]] % p;
      if (c == 0) continue;
      for (int j = 0; j < width; ++j)
        row[j] = (row[j] + (p - c) * basis[i][j]) % p;
      for (int j = 0; j < ngens; ++j)
        ex[j] = (ex[j] + (p - c) * expr[i][j]) % p;
    }
    int piv = -1;
    for (int j = 0; j < width; ++j)
      if (row[j] % p != 0) {
        piv = j;
        break;
      }
    if (piv < 0) return;
    // normalize pivot to 1
    u64 inv = 1, c = row[piv] % p;
    {
      u64 acc = 1, sq = c, e = p - 2;
      while (e) {
        if (e & 1) acc = acc * sq % p;
        sq = sq * sq % p;
        e >>= 1;
      }
      inv = acc;
    }
    for (int j = 0; j < width; ++j) row[j] = row[j] * inv % p;
    for (int j = 0; j < (int)ex.size(); ++j) ex[j] = ex[j] * inv % p;
    basis.push_back(std::move(row));
    expr.push_back(std::move(ex));
    lead.push_back(piv);
  }
};

inline bool modp_invertible(const GRMatrix& gbar) {
  // gbar over an ell=1 ring; invertible iff full unit rank.
  return smith_normal_form(gbar).rank_unit == gbar.rows;
}

}  // namespace detail

// Decide whether M1 and M2 are isomorphic.  Certificates are exact: an
// invertible g with g F1 = F2 sigma(g) and g V1 = V2 sigma^{-1}(g).
// "not_isomorphic" is sound: it is only reported when the full mod-p hom
// span has been scanned without finding an invertible element (or a rank
// invariant separates the modules).  Otherwise "inconclusive".
inline IsoResult are_isomorphic(const DieudonneModule& M1,
                                const DieudonneModule& M2,
                                const IsoOptions& opts = {}) {
  IsoResult out;
  if (!same_ring(M1.ring, M2.ring)) input_error("are_isomorphic: ring mismatch");
  if (M1.rank != M2.rank) {
    out.verdict = IsoVerdict::not_isomorphic;
    out.detail = "rank differs";
    return out;
  }
  if (detail::iso_invariants(M1) != detail::iso_invariants(M2)) {
    out.verdict = IsoVerdict::not_isomorphic;
    out.detail = "rank invariants differ";
    return out;
  }

  const Ring& rg = M1.ring;
  Ring res = residue_ring(rg);
  std::vector<GRMatrix> gens = hom_generators(M1, M2);
  const int h = M1.rank;
  const int width = h * h * rg->r;

  // Reduce generators mod p and build an F_p-basis of the span.
  detail::FpSpan span;
  span.p = rg->p;
  span.width = width;
  std::vector<GRMatrix> gens_res;
  for (size_t i = 0; i < gens.size(); ++i) {
    GRMatrix gb = mat_to_ring(gens[i], res);
    gens_res.push_back(gb);
    std::vector<u64> flat(width);
    for (int a = 0; a < h; ++a)
      for (int b = 0; b < h; ++b)
        for (int t = 0; t < rg->r; ++t)
          flat[(size_t)(a * h + b) * rg->r + t] = gb.at(a, b).c[t];
    span.add(flat, (int)i, (int)gens.size());
  }
  const int dim = (int)span.basis.size();
  if (dim == 0) {
    out.verdict = IsoVerdict::not_isomorphic;
    out.detail = "hom space is zero mod p";
    return out;
  }

  auto lift_and_check = [&](const std::vector<u64>& coords) -> std::optional<GRMatrix> {
    // coords over F_p w.r.t. span.basis; combine expressions into original
    // generator coefficients and lift as an integer combination.
    std::vector<u64> gen_coef(gens.size(), 0);
    for (int i = 0; i < dim; ++i) {
      if (coords[i] == 0) continue;
      for (size_t j = 0; j < gens.size(); ++j)
        gen_coef[j] = (gen_coef[j] + coords[i] * span.expr[i][j]) % rg->p;
    }
    GRMatrix g(rg, h, h);
    for (size_t j = 0; j < gens.size(); ++j) {
      if (gen_coef[j] == 0) continue;
      g = mat_add(g, mat_scale_int(gen_coef[j], gens[j]));
    }
    GRMatrix gbar = mat_to_ring(g, res);
    if (!detail::modp_invertible(gbar)) return std::nullopt;
    MINPDIV_CHECK(is_hom(M1, M2, g), "lifted certificate is not a hom");
    MINPDIV_CHECK(mat_is_invertible(g), "mod-p invertible but not invertible");
    return g;
  };

  // Exhaustive projective scan when feasible.
  bool exhaustive = true;
  {
    u64 count = 1;
    for (int i = 0; i < dim; ++i) {
      count *= rg->p;
      if (count > opts.exhaustive_limit) {
        exhaustive = false;
        break;
      }
    }
  }
  if (exhaustive) {
    // Scan c with first nonzero coordinate = 1 (invertibility is
    // scale-invariant).
    for (int first = 0; first < dim; ++first) {
      std::vector<u64> c(dim, 0);
      c[first] = 1;
      // enumerate all values of coordinates after `first`
      for (;;) {
        if (auto g = lift_and_check(c)) {
          out.verdict = IsoVerdict::certificate;
          out.g = *g;
          out.detail = "exhaustive scan";
          return out;
        }
        int i = first + 1;
        while (i < dim && ++c[i] == rg->p) c[i++] = 0;
        if (i == dim) break;
      }
    }
    out.verdict = IsoVerdict::not_isomorphic;
    out.detail = "exhaustive scan found no invertible hom";
    return out;
  }

  // Randomized sampling.
  u64 state = opts.seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull;
  auto next = [&]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
  };
  for (u64 t = 0; t < opts.samples; ++t) {
    std::vector<u64> c(dim);
    bool nonzero = false;
    for (int i = 0; i < dim; ++i) {
      c[i] = next() % rg->p;
      nonzero = nonzero || c[i];
    }
    if (!nonzero) continue;
    if (auto g = lift_and_check(c)) {
      out.verdict = IsoVerdict::certificate;
      out.g = *g;
      out.detail = "randomized sample " + std::to_string(t);
      return out;
    }
  }
  out.verdict = IsoVerdict::inconclusive;
  out.detail = "sampling budget exhausted (span dimension " +
               std::to_string(dim) + ")";
  return out;
}

// Convenience: random unipotent deformation with entries drawn from the
// given generator state.
inline DieudonneModule random_deformation(const DieudonneModule& M, u64 seed) {
  u64 state = seed;
  auto next = [&]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
  };
  (void)next();
  GRMatrix U(M.ring, M.rank, M.rank);
  for (auto& e : U.e) {
    std::vector<u64> c(M.ring->r);
    for (int i = 0; i < M.ring->r; ++i) c[i] = next() % M.ring->pell;
    e = GRElement(M.ring, std::move(c));
  }
  return deform(M, U);
}

}  // namespace minpdiv
