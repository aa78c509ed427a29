// arith.hpp
//
// Exact arithmetic over Galois rings GR(p^ell, r) = W_ell(F_{p^r}), the
// truncated Witt vectors of a finite field, realized as (Z/p^ell)[x]/(f)
// for a monic degree-r modulus f whose root is a Teichmuller element
// (a root of X^{p^r} - X).  With such a modulus the Frobenius lift is
// exact: sigma(x) = x^p, sigma^r = id, and sigma(a) = a^p mod p.
//
// Also provides: matrices over GR, Smith normal form over the chain rings
// Z/p^ell and GR(p^ell, r) with exact unimodular transforms, linear solving
// with kernel bases, ring embeddings GR(p^ell, r) -> GR(p^ell, r*d) as
// explicit value-carried maps, and an Artin-Schreier solver x^q - x = y
// over residue fields that extends the field when necessary.
//
// All values are immutable after construction; every element and matrix
// carries a shared pointer to its ring descriptor.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace minpdiv {

using u64 = std::uint64_t;

// Internal invariant check, always on.  Failures indicate a bug or a
// violated mathematical precondition, never user input.
#define MINPDIV_CHECK(cond, msg)                                            \
  do {                                                                      \
    if (!(cond)) throw std::logic_error(std::string("invariant: ") + msg); \
  } while (0)

// User-facing precondition failure.
[[noreturn]] inline void input_error(const std::string& msg) {
  throw std::invalid_argument(msg);
}

inline u64 ipow(u64 b, u64 e) {
  u64 r = 1;
  while (e) {
    if (e & 1) r *= b;
    b *= b;
    e >>= 1;
  }
  return r;
}

inline bool is_prime_u64(u64 n) {
  if (n < 2) return false;
  for (u64 d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

// p-adic valuation of a mod p^ell; returns ell for a == 0.
inline int padic_val(u64 a, u64 p, int ell) {
  if (a == 0) return ell;
  int v = 0;
  while (a % p == 0) {
    a /= p;
    ++v;
  }
  return v < ell ? v : ell;
}

struct RingDescriptor;
using Ring = std::shared_ptr<const RingDescriptor>;

namespace detail {

// Plain polynomial arithmetic over Z/m with a monic modulus, used to
// bootstrap ring descriptors before GRElement exists.  Polynomials are
// little-endian coefficient vectors.
inline std::vector<u64> poly_trim(std::vector<u64> a) {
  while (!a.empty() && a.back() == 0) a.pop_back();
  return a;
}

inline std::vector<u64> poly_mulmod(const std::vector<u64>& a,
                                    const std::vector<u64>& b,
                                    const std::vector<u64>& f, u64 m) {
  // f monic of degree r, a and b of degree < r.
  const size_t r = f.size() - 1;
  std::vector<u64> prod(2 * r, 0);
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0) continue;
    for (size_t j = 0; j < b.size(); ++j) {
      prod[i + j] = (prod[i + j] + a[i] * b[j]) % m;
    }
  }
  for (size_t k = 2 * r; k-- > r;) {
    u64 c = prod[k];
    if (c == 0) continue;
    prod[k] = 0;
    for (size_t i = 0; i < r; ++i) {
      u64 sub = (c * f[i]) % m;
      prod[k - r + i] = (prod[k - r + i] + m - sub) % m;
    }
  }
  prod.resize(r);
  return prod;
}

inline std::vector<u64> poly_powmod_ppow(std::vector<u64> base, u64 p,
                                         int k, const std::vector<u64>& f,
                                         u64 m) {
  // base^(p^k) mod f, by k successive p-th powers.
  for (int i = 0; i < k; ++i) {
    std::vector<u64> acc{1};
    std::vector<u64> sq = base;
    u64 e = p;
    while (e) {
      if (e & 1) acc = poly_mulmod(acc, sq, f, m);
      sq = poly_mulmod(sq, sq, f, m);
      e >>= 1;
    }
    base = acc;
  }
  return base;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// RingDescriptor
// ---------------------------------------------------------------------------

struct RingDescriptor {
  u64 p = 0;           // residue characteristic
  int ell = 0;         // Witt truncation level, modulus p^ell
  int r = 0;           // residue degree: residue field F_{p^r}
  u64 pell = 0;        // p^ell
  int max_degree = 0;  // hard cap on residue degrees reachable by extension

  // Monic modulus of degree r over Z/p^ell, little-endian, including the
  // leading 1.  Its root x is Teichmuller: x^{p^r} = x exactly.
  std::vector<u64> modulus;

  // Column-major r x r matrices over Z/p^ell for sigma and sigma^{-1} in the
  // power basis 1, x, ..., x^{r-1}.
  std::vector<u64> frob;
  std::vector<u64> frob_inv;

  // x^k mod f for k in [0, 2r-1), so products reduce by table lookup.
  std::vector<std::vector<u64>> xpow;

  u64 card_residue() const { return ipow(p, (u64)r); }

  bool same_as(const RingDescriptor& o) const {
    return p == o.p && ell == o.ell && r == o.r && modulus == o.modulus;
  }
};

inline bool same_ring(const Ring& a, const Ring& b) {
  return a == b || (a && b && a->same_as(*b));
}

namespace detail {

// gcd over F_p of raw little-endian polynomials, monic result.
inline std::vector<u64> poly_gcd_fp(std::vector<u64> a, std::vector<u64> b,
                                    u64 p) {
  auto fp_inv = [&](u64 u) {
    u64 acc = 1, sq = u % p, e = p - 2;
    while (e) {
      if (e & 1) acc = acc * sq % p;
      sq = sq * sq % p;
      e >>= 1;
    }
    return acc;
  };
  a = poly_trim(std::move(a));
  b = poly_trim(std::move(b));
  while (!b.empty()) {
    // a mod b
    u64 li = fp_inv(b.back());
    while (a.size() >= b.size()) {
      u64 q = a.back() * li % p;
      size_t off = a.size() - b.size();
      for (size_t i = 0; i < b.size(); ++i)
        a[off + i] = (a[off + i] + p - q * b[i] % p) % p;
      a = poly_trim(std::move(a));
      if (a.empty()) break;
    }
    std::swap(a, b);
  }
  if (!a.empty()) {
    u64 li = fp_inv(a.back());
    for (auto& c : a) c = c * li % p;
  }
  return a;
}

// Lexicographically least monic irreducible of degree r over F_p, comparing
// coefficient tuples (c_0, ..., c_{r-1}).
inline std::vector<u64> least_irreducible(u64 p, int r) {
  if (r == 1) return {0, 1};  // x itself: GR(p^ell,1) = Z/p^ell
  std::vector<u64> c(r, 0);
  auto is_irreducible = [&](const std::vector<u64>& coeffs) {
    std::vector<u64> f = coeffs;
    f.push_back(1);
    // Rabin: f | x^(p^r) - x, and gcd(x^(p^(r/q)) - x, f) = 1 for every
    // prime q | r.
    std::vector<u64> xp = poly_powmod_ppow({0, 1}, p, r, f, p);
    if (poly_trim(xp) != std::vector<u64>{0, 1}) return false;
    for (int q = 2; q <= r; ++q) {
      if (r % q != 0 || !is_prime_u64((u64)q)) continue;
      std::vector<u64> xq = poly_powmod_ppow({0, 1}, p, r / q, f, p);
      // xq - x
      if (xq.size() < 2) xq.resize(2, 0);
      xq[1] = (xq[1] + p - 1) % p;
      std::vector<u64> g = poly_gcd_fp(xq, f, p);
      if (g.size() != 1) return false;
    }
    return true;
  };
  for (;;) {
    if (is_irreducible(c)) return c;
    int i = 0;
    while (i < r && ++c[i] == p) c[i++] = 0;
    MINPDIV_CHECK(i < r, "no irreducible polynomial found");
  }
}

}  // namespace detail

// Construct GR(p^ell, r).  The modulus is deterministic: the Hensel lift of
// the lexicographically least irreducible of degree r over F_p, adjusted so
// that its root is a Teichmuller element.
inline Ring gr_make(u64 p, int ell, int r, int max_degree = 64) {
  if (!is_prime_u64(p)) input_error("gr_make: p must be prime");
  if (ell < 1) input_error("gr_make: level must be >= 1");
  if (r < 1) input_error("gr_make: residue degree must be >= 1");
  if (r > max_degree) input_error("gr_make: residue degree exceeds maximum");
  // Keep p^ell and products of two coefficients inside 64 bits.
  if (ell > 20 || ipow(p, (u64)ell) > (u64(1) << 31))
    input_error("gr_make: p^ell too large");

  auto d = std::make_shared<RingDescriptor>();
  d->p = p;
  d->ell = ell;
  d->r = r;
  d->pell = ipow(p, (u64)ell);
  d->max_degree = max_degree;

  const u64 m = d->pell;

  if (r == 1) {
    d->modulus = {0, 1};
    d->frob = {1};
    d->frob_inv = {1};
    d->xpow = {{1}};
    return d;
  }

  // Naive lift of the least irreducible, then replace by the minimal
  // polynomial of the Teichmuller lift of its root.
  std::vector<u64> f0 = detail::least_irreducible(p, r);
  f0.push_back(1);

  // omega := Teichmuller lift of x in (Z/p^ell)[x]/(f0): iterate y -> y^{p^r}
  // until fixed (ell-1 steps suffice; iterate ell for safety).
  std::vector<u64> omega{0, 1};
  for (int it = 0; it < ell; ++it)
    omega = detail::poly_powmod_ppow(omega, p, r, f0, m);
  MINPDIV_CHECK(detail::poly_powmod_ppow(omega, p, r, f0, m) == omega,
                "Teichmuller iteration did not stabilize");

  // f := prod_{i<r} (X - omega^{p^i}), expanded over (Z/p^ell)[x]/(f0).
  // Coefficients must be constants of the ambient ring.
  std::vector<std::vector<u64>> fcoef{{1 % m}};  // f = 1, poly in X
  std::vector<u64> conj = omega;
  for (int i = 0; i < r; ++i) {
    std::vector<std::vector<u64>> next(fcoef.size() + 1,
                                       std::vector<u64>{});
    for (size_t k = 0; k < fcoef.size(); ++k) {
      // X * fcoef[k]
      if (next[k + 1].empty()) next[k + 1] = std::vector<u64>(r, 0);
      for (size_t t = 0; t < fcoef[k].size(); ++t)
        next[k + 1][t] = (next[k + 1][t] + fcoef[k][t]) % m;
      // - conj * fcoef[k]
      std::vector<u64> prod = detail::poly_mulmod(fcoef[k], conj, f0, m);
      if (next[k].empty()) next[k] = std::vector<u64>(r, 0);
      for (size_t t = 0; t < prod.size(); ++t)
        next[k][t] = (next[k][t] + m - prod[t]) % m;
    }
    fcoef = std::move(next);
    conj = detail::poly_powmod_ppow(conj, p, 1, f0, m);
  }
  MINPDIV_CHECK(conj == omega, "conjugate orbit did not close");

  d->modulus.resize(r + 1);
  for (int k = 0; k <= r; ++k) {
    std::vector<u64> c = detail::poly_trim(fcoef[k]);
    MINPDIV_CHECK(c.size() <= 1, "Teichmuller modulus coefficient not scalar");
    d->modulus[k] = c.empty() ? 0 : c[0];
  }
  MINPDIV_CHECK(d->modulus[r] == 1, "Teichmuller modulus not monic");

  const std::vector<u64>& f = d->modulus;

  // Verify f | X^{p^r} - X over Z/p^ell: equivalently x^{p^r} = x in the ring.
  std::vector<u64> chk = detail::poly_powmod_ppow({0, 1}, p, r, f, m);
  MINPDIV_CHECK((detail::poly_trim(chk) == std::vector<u64>{0, 1}),
                "modulus root is not Teichmuller");

  // Power table x^k mod f for k < 2r-1.
  d->xpow.resize(2 * r - 1);
  std::vector<u64> cur{1};
  for (int k = 0; k < 2 * r - 1; ++k) {
    std::vector<u64> padded = cur;
    padded.resize(r, 0);
    d->xpow[k] = padded;
    cur = detail::poly_mulmod(cur, {0, 1}, f, m);
  }

  // sigma matrix: column i = (x^p)^i mod f; sigma^{-1}: column i = (x^{p^{r-1}})^i.
  auto build_pow_matrix = [&](int k) {
    std::vector<u64> gen = detail::poly_powmod_ppow({0, 1}, p, k, f, m);
    std::vector<u64> mat((size_t)r * r, 0);
    std::vector<u64> col{1};
    for (int i = 0; i < r; ++i) {
      std::vector<u64> padded = col;
      padded.resize(r, 0);
      for (int j = 0; j < r; ++j) mat[(size_t)i * r + j] = padded[j];
      col = detail::poly_mulmod(col, gen, f, m);
    }
    return mat;
  };
  d->frob = build_pow_matrix(1);
  d->frob_inv = build_pow_matrix(r - 1);

  return d;
}

// ---------------------------------------------------------------------------
// GRElement
// ---------------------------------------------------------------------------

struct GRElement {
  Ring ring;
  std::vector<u64> c;  // r coefficients in [0, p^ell), little-endian

  GRElement() = default;
  GRElement(Ring rg, std::vector<u64> coeffs)
      : ring(std::move(rg)), c(std::move(coeffs)) {
    MINPDIV_CHECK((int)c.size() == ring->r, "coefficient count != r");
  }

  static GRElement zero(const Ring& rg) {
    return GRElement(rg, std::vector<u64>(rg->r, 0));
  }
  static GRElement one(const Ring& rg) {
    std::vector<u64> v(rg->r, 0);
    v[0] = 1 % rg->pell;
    return GRElement(rg, v);
  }
  static GRElement from_int(const Ring& rg, u64 n) {
    std::vector<u64> v(rg->r, 0);
    v[0] = n % rg->pell;
    return GRElement(rg, v);
  }
  // The class of x, the distinguished Teichmuller generator.
  static GRElement gen(const Ring& rg) {
    std::vector<u64> v(rg->r, 0);
    if (rg->r == 1)
      v[0] = 0;
    else
      v[1] = 1;
    return GRElement(rg, v);
  }

  bool is_zero() const {
    return std::all_of(c.begin(), c.end(), [](u64 a) { return a == 0; });
  }
  bool operator==(const GRElement& o) const {
    return same_ring(ring, o.ring) && c == o.c;
  }
};

inline GRElement gr_add(const GRElement& a, const GRElement& b) {
  MINPDIV_CHECK(same_ring(a.ring, b.ring), "ring mismatch in add");
  std::vector<u64> v(a.c.size());
  const u64 m = a.ring->pell;
  for (size_t i = 0; i < v.size(); ++i) v[i] = (a.c[i] + b.c[i]) % m;
  return GRElement(a.ring, std::move(v));
}

inline GRElement gr_sub(const GRElement& a, const GRElement& b) {
  MINPDIV_CHECK(same_ring(a.ring, b.ring), "ring mismatch in sub");
  std::vector<u64> v(a.c.size());
  const u64 m = a.ring->pell;
  for (size_t i = 0; i < v.size(); ++i) v[i] = (a.c[i] + m - b.c[i]) % m;
  return GRElement(a.ring, std::move(v));
}

inline GRElement gr_neg(const GRElement& a) {
  return gr_sub(GRElement::zero(a.ring), a);
}

inline GRElement gr_mul(const GRElement& a, const GRElement& b) {
  MINPDIV_CHECK(same_ring(a.ring, b.ring), "ring mismatch in mul");
  const RingDescriptor& R = *a.ring;
  const u64 m = R.pell;
  const int r = R.r;
  if (r == 1) {
    return GRElement(a.ring, {(a.c[0] * b.c[0]) % m});
  }
  // Convolve, then fold tails through the x^k table.  Coefficients are
  // < 2^31 so r-term dot products fit in u64 with periodic reduction.
  std::vector<u64> prod(2 * r - 1, 0);
  for (int i = 0; i < r; ++i) {
    if (a.c[i] == 0) continue;
    for (int j = 0; j < r; ++j) {
      prod[i + j] = (prod[i + j] + a.c[i] * b.c[j]) % m;
    }
  }
  std::vector<u64> v(r, 0);
  for (int k = 0; k < 2 * r - 1; ++k) {
    if (prod[k] == 0) continue;
    const std::vector<u64>& xk = R.xpow[k];
    for (int j = 0; j < r; ++j) v[j] = (v[j] + prod[k] * xk[j]) % m;
  }
  return GRElement(a.ring, std::move(v));
}

inline GRElement gr_smul(u64 s, const GRElement& a) {
  std::vector<u64> v(a.c.size());
  const u64 m = a.ring->pell;
  s %= m;
  for (size_t i = 0; i < v.size(); ++i) v[i] = (a.c[i] * s) % m;
  return GRElement(a.ring, std::move(v));
}

// p-adic valuation: min over coefficients; ell for the zero element.
inline int gr_val(const GRElement& a) {
  const RingDescriptor& R = *a.ring;
  int v = R.ell;
  for (u64 x : a.c) v = std::min(v, padic_val(x, R.p, R.ell));
  return v;
}

inline bool gr_is_unit(const GRElement& a) { return gr_val(a) == 0; }

// Representative division by p^k: each coefficient, as the canonical
// representative in [0, p^ell), is divided exactly.  Requires gr_val >= k.
// The result is one preimage; any two differ by p^{ell-k}-torsion.
inline GRElement gr_div_ppow(const GRElement& a, int k) {
  const RingDescriptor& R = *a.ring;
  MINPDIV_CHECK(k >= 0 && gr_val(a) >= k, "inexact division by p^k");
  u64 pk = ipow(R.p, (u64)k);
  std::vector<u64> v(a.c.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = a.c[i] / pk;
  return GRElement(a.ring, std::move(v));
}

// Apply an r x r column-major Z/p^ell matrix to the coefficient vector.
inline GRElement gr_apply_coeff_matrix(const std::vector<u64>& mat,
                                       const GRElement& a) {
  const RingDescriptor& R = *a.ring;
  const int r = R.r;
  const u64 m = R.pell;
  std::vector<u64> v(r, 0);
  for (int i = 0; i < r; ++i) {
    if (a.c[i] == 0) continue;
    for (int j = 0; j < r; ++j)
      v[j] = (v[j] + a.c[i] * mat[(size_t)i * r + j]) % m;
  }
  return GRElement(a.ring, std::move(v));
}

// Frobenius sigma: the unique automorphism with sigma(a) = a^p mod p.
// Exact because the modulus root is Teichmuller.
inline GRElement frobenius(const GRElement& a) {
  if (a.ring->r == 1) return a;
  return gr_apply_coeff_matrix(a.ring->frob, a);
}

inline GRElement frobenius_inverse(const GRElement& a) {
  if (a.ring->r == 1) return a;
  return gr_apply_coeff_matrix(a.ring->frob_inv, a);
}

// sigma^k for any integer k (k may be negative).
inline GRElement sigma_pow(const GRElement& a, long long k) {
  const int r = a.ring->r;
  long long e = ((k % r) + r) % r;
  GRElement v = a;
  for (long long i = 0; i < e; ++i) v = frobenius(v);
  return v;
}

inline GRElement gr_pow(const GRElement& a, u64 e) {
  GRElement acc = GRElement::one(a.ring);
  GRElement sq = a;
  while (e) {
    if (e & 1) acc = gr_mul(acc, sq);
    sq = gr_mul(sq, sq);
    e >>= 1;
  }
  return acc;
}

// a^(p^k) by k successive p-th powers (exponent p^k may exceed 64 bits).
inline GRElement gr_pow_ppow(const GRElement& a, int k) {
  GRElement v = a;
  for (int i = 0; i < k; ++i) v = gr_pow(v, a.ring->p);
  return v;
}

// Inverse of a unit: inverse mod p by Fermat in the residue field, then
// Hensel doubling z -> z(2 - az) up to level ell.
inline GRElement gr_inv(const GRElement& a) {
  if (!gr_is_unit(a)) input_error("gr_inv: not a unit");
  const RingDescriptor& R = *a.ring;
  // Residue field has p^r elements; u^{-1} = u^{p^r - 2} mod p.  Compute at
  // full level and correct by Hensel; the initial value only needs to be an
  // inverse mod p.
  GRElement z = GRElement::one(a.ring);
  {
    // a^(p^r - 2) via p-ary: p^r - 2 = (p^r - 1) - 1; do it in u64 if it
    // fits, else square-and-multiply over the p-ary digits.
    // r*log2(p) <= 31 always holds here only for small rings; handle the
    // general case with a digit loop.
    int r = R.r;
    u64 p = R.p;
    // exponent p^r - 2 in base p: digits d_i with sum d_i p^i.
    std::vector<u64> digits(r, p - 1);
    if (r >= 1) {
      // subtract 1: (p^r - 1) - 1
      int i = 0;
      while (true) {
        if (digits[i] > 0) {
          digits[i] -= 1;
          break;
        }
        digits[i] = p - 1;
        ++i;
      }
    }
    // Horner over digits from most significant.
    GRElement acc = GRElement::one(a.ring);
    for (int i = r - 1; i >= 0; --i) {
      acc = gr_pow(acc, p);
      if (digits[i]) acc = gr_mul(acc, gr_pow(a, digits[i]));
    }
    z = acc;
  }
  // Hensel: z <- z(2 - a z) until exact.
  for (int it = 0; it < R.ell + 1; ++it) {
    GRElement az = gr_mul(a, z);
    GRElement corr = gr_sub(gr_smul(2, GRElement::one(a.ring)), az);
    z = gr_mul(z, corr);
  }
  MINPDIV_CHECK(gr_mul(a, z) == GRElement::one(a.ring), "inverse failed");
  return z;
}

// Exact division b / a where val(b) >= val(a): b = q * a with
// q = (b / p^v) * unit_inverse, v = val(a).
inline GRElement gr_div_exact(const GRElement& b, const GRElement& a) {
  int v = gr_val(a);
  MINPDIV_CHECK(gr_val(b) >= v, "gr_div_exact: valuation too small");
  MINPDIV_CHECK(v < a.ring->ell, "gr_div_exact: division by zero");
  GRElement unit = gr_div_ppow(a, v);
  GRElement q = gr_mul(gr_div_ppow(b, v), gr_inv(unit));
  return q;
}

// ---------------------------------------------------------------------------
// Residue field and level change
// ---------------------------------------------------------------------------

// The residue field F_{p^r} as GR(p^1, r), sharing the modulus mod p.
inline Ring residue_ring(const Ring& rg) {
  if (rg->ell == 1) return rg;
  auto d = std::make_shared<RingDescriptor>();
  d->p = rg->p;
  d->ell = 1;
  d->r = rg->r;
  d->pell = rg->p;
  d->max_degree = rg->max_degree;
  d->modulus.resize(rg->modulus.size());
  for (size_t i = 0; i < rg->modulus.size(); ++i)
    d->modulus[i] = rg->modulus[i] % rg->p;
  d->frob.resize(rg->frob.size());
  for (size_t i = 0; i < rg->frob.size(); ++i) d->frob[i] = rg->frob[i] % rg->p;
  d->frob_inv.resize(rg->frob_inv.size());
  for (size_t i = 0; i < rg->frob_inv.size(); ++i)
    d->frob_inv[i] = rg->frob_inv[i] % rg->p;
  d->xpow = rg->xpow;
  for (auto& row : d->xpow)
    for (auto& v : row) v %= rg->p;
  return d;
}

// Reduce to level ell2 <= ell (same residue degree, same modulus mod p^ell2).
inline Ring truncate_ring(const Ring& rg, int ell2) {
  MINPDIV_CHECK(ell2 >= 1 && ell2 <= rg->ell, "truncate_ring: bad level");
  if (ell2 == rg->ell) return rg;
  auto d = std::make_shared<RingDescriptor>();
  d->p = rg->p;
  d->ell = ell2;
  d->r = rg->r;
  d->pell = ipow(rg->p, (u64)ell2);
  d->max_degree = rg->max_degree;
  u64 m = d->pell;
  d->modulus.resize(rg->modulus.size());
  for (size_t i = 0; i < rg->modulus.size(); ++i)
    d->modulus[i] = rg->modulus[i] % m;
  d->frob.resize(rg->frob.size());
  for (size_t i = 0; i < rg->frob.size(); ++i) d->frob[i] = rg->frob[i] % m;
  d->frob_inv.resize(rg->frob_inv.size());
  for (size_t i = 0; i < rg->frob_inv.size(); ++i)
    d->frob_inv[i] = rg->frob_inv[i] % m;
  d->xpow = rg->xpow;
  for (auto& row : d->xpow)
    for (auto& v : row) v %= m;
  return d;
}

inline GRElement gr_to_ring(const GRElement& a, const Ring& target) {
  // Same (p, r, modulus-compatible) ring at a lower or equal level, or the
  // identical ring.
  MINPDIV_CHECK(a.ring->p == target->p && a.ring->r == target->r,
                "gr_to_ring: incompatible rings");
  std::vector<u64> v(a.c.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = a.c[i] % target->pell;
  return GRElement(target, std::move(v));
}

inline GRElement gr_reduce_mod_p(const GRElement& a, const Ring& res) {
  return gr_to_ring(a, res);
}

// Lift from a lower level by reinterpreting representatives.
inline GRElement gr_lift(const GRElement& a, const Ring& target) {
  MINPDIV_CHECK(a.ring->p == target->p && a.ring->r == target->r &&
                    a.ring->ell <= target->ell,
                "gr_lift: incompatible rings");
  return GRElement(target, a.c);
}

// ---------------------------------------------------------------------------
// GRMatrix
// ---------------------------------------------------------------------------

struct GRMatrix {
  Ring ring;
  int rows = 0, cols = 0;
  std::vector<GRElement> e;  // row-major

  GRMatrix() = default;
  GRMatrix(Ring rg, int rr, int cc)
      : ring(std::move(rg)), rows(rr), cols(cc) {
    e.assign((size_t)rows * cols, GRElement::zero(ring));
  }

  GRElement& at(int i, int j) { return e[(size_t)i * cols + j]; }
  const GRElement& at(int i, int j) const { return e[(size_t)i * cols + j]; }

  static GRMatrix identity(const Ring& rg, int n) {
    GRMatrix m(rg, n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = GRElement::one(rg);
    return m;
  }

  bool operator==(const GRMatrix& o) const {
    if (rows != o.rows || cols != o.cols) return false;
    for (size_t i = 0; i < e.size(); ++i)
      if (!(e[i] == o.e[i])) return false;
    return true;
  }
};

inline GRMatrix mat_mul(const GRMatrix& a, const GRMatrix& b) {
  MINPDIV_CHECK(a.cols == b.rows, "mat_mul: shape mismatch");
  GRMatrix c(a.ring, a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      const GRElement& aik = a.at(i, k);
      if (aik.is_zero()) continue;
      for (int j = 0; j < b.cols; ++j) {
        if (b.at(k, j).is_zero()) continue;
        c.at(i, j) = gr_add(c.at(i, j), gr_mul(aik, b.at(k, j)));
      }
    }
  return c;
}

inline GRMatrix mat_add(const GRMatrix& a, const GRMatrix& b) {
  MINPDIV_CHECK(a.rows == b.rows && a.cols == b.cols, "mat_add: shape");
  GRMatrix c(a.ring, a.rows, a.cols);
  for (size_t i = 0; i < c.e.size(); ++i) c.e[i] = gr_add(a.e[i], b.e[i]);
  return c;
}

inline GRMatrix mat_sub(const GRMatrix& a, const GRMatrix& b) {
  MINPDIV_CHECK(a.rows == b.rows && a.cols == b.cols, "mat_sub: shape");
  GRMatrix c(a.ring, a.rows, a.cols);
  for (size_t i = 0; i < c.e.size(); ++i) c.e[i] = gr_sub(a.e[i], b.e[i]);
  return c;
}

inline GRMatrix mat_smul(const GRElement& s, const GRMatrix& a) {
  GRMatrix c(a.ring, a.rows, a.cols);
  for (size_t i = 0; i < c.e.size(); ++i) c.e[i] = gr_mul(s, a.e[i]);
  return c;
}

inline GRMatrix mat_scale_int(u64 s, const GRMatrix& a) {
  GRMatrix c(a.ring, a.rows, a.cols);
  for (size_t i = 0; i < c.e.size(); ++i) c.e[i] = gr_smul(s, a.e[i]);
  return c;
}

inline GRMatrix mat_sigma(const GRMatrix& a, long long k = 1) {
  GRMatrix c(a.ring, a.rows, a.cols);
  for (size_t i = 0; i < c.e.size(); ++i) c.e[i] = sigma_pow(a.e[i], k);
  return c;
}

inline GRMatrix mat_transpose(const GRMatrix& a) {
  GRMatrix c(a.ring, a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) c.at(j, i) = a.at(i, j);
  return c;
}

inline GRMatrix mat_to_ring(const GRMatrix& a, const Ring& target) {
  GRMatrix c(target, a.rows, a.cols);
  for (size_t i = 0; i < a.e.size(); ++i) c.e[i] = gr_to_ring(a.e[i], target);
  return c;
}

inline std::vector<GRElement> mat_apply(const GRMatrix& a,
                                        const std::vector<GRElement>& x) {
  MINPDIV_CHECK((int)x.size() == a.cols, "mat_apply: shape");
  std::vector<GRElement> y(a.rows, GRElement::zero(a.ring));
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) {
      if (a.at(i, j).is_zero() || x[j].is_zero()) continue;
      y[i] = gr_add(y[i], gr_mul(a.at(i, j), x[j]));
    }
  return y;
}

// ---------------------------------------------------------------------------
// Smith normal form over the chain ring GR(p^ell, r)
// ---------------------------------------------------------------------------
//
// Every nonzero entry is unit * p^v; the pivot of minimal valuation (ties
// resolved row-major) clears its row and column by exact division.  The
// result D = U * A * Vt has p-power diagonal with nondecreasing exponents;
// U and Vt are invertible over the ring.

struct SmithResult {
  GRMatrix U, D, Vt;
  std::vector<int> exponents;  // exponents of the diagonal; ell encodes 0
  int rank_unit = 0;           // number of unit diagonal entries
};

inline SmithResult smith_normal_form(const GRMatrix& A) {
  const Ring& rg = A.ring;
  const int ell = rg->ell;
  SmithResult res;
  res.U = GRMatrix::identity(rg, A.rows);
  res.Vt = GRMatrix::identity(rg, A.cols);
  res.D = A;
  GRMatrix& U = res.U;
  GRMatrix& D = res.D;
  GRMatrix& Vt = res.Vt;

  const int n = std::min(A.rows, A.cols);
  for (int k = 0; k < n; ++k) {
    // Pivot: minimal valuation in the trailing block, row-major ties.
    int pi = -1, pj = -1, pv = ell;
    for (int i = k; i < D.rows; ++i)
      for (int j = k; j < D.cols; ++j) {
        int v = gr_val(D.at(i, j));
        if (v < pv) {
          pv = v;
          pi = i;
          pj = j;
        }
      }
    if (pi < 0) {
      for (int t = k; t < n; ++t) res.exponents.push_back(ell);
      break;
    }
    // Swap into place.
    if (pi != k)
      for (int j = 0; j < D.cols; ++j) std::swap(D.at(k, j), D.at(pi, j));
    if (pi != k)
      for (int j = 0; j < U.cols; ++j) std::swap(U.at(k, j), U.at(pi, j));
    if (pj != k)
      for (int i = 0; i < D.rows; ++i) std::swap(D.at(i, k), D.at(i, pj));
    if (pj != k)
      for (int i = 0; i < Vt.rows; ++i) std::swap(Vt.at(i, k), Vt.at(i, pj));

    // Normalize pivot to p^pv: scale row k by the unit inverse.
    GRElement unit = gr_div_ppow(D.at(k, k), pv);
    GRElement uinv = gr_inv(unit);
    for (int j = 0; j < D.cols; ++j) D.at(k, j) = gr_mul(uinv, D.at(k, j));
    for (int j = 0; j < U.cols; ++j) U.at(k, j) = gr_mul(uinv, U.at(k, j));

    // Clear column k below/above, then row k.
    for (int i = 0; i < D.rows; ++i) {
      if (i == k || D.at(i, k).is_zero()) continue;
      GRElement q = gr_div_exact(D.at(i, k), D.at(k, k));
      for (int j = 0; j < D.cols; ++j)
        D.at(i, j) = gr_sub(D.at(i, j), gr_mul(q, D.at(k, j)));
      for (int j = 0; j < U.cols; ++j)
        U.at(i, j) = gr_sub(U.at(i, j), gr_mul(q, U.at(k, j)));
    }
    for (int j = 0; j < D.cols; ++j) {
      if (j == k || D.at(k, j).is_zero()) continue;
      GRElement q = gr_div_exact(D.at(k, j), D.at(k, k));
      for (int i = 0; i < D.rows; ++i)
        D.at(i, j) = gr_sub(D.at(i, j), gr_mul(q, D.at(i, k)));
      for (int i = 0; i < Vt.rows; ++i)
        Vt.at(i, j) = gr_sub(Vt.at(i, j), gr_mul(q, Vt.at(i, k)));
    }
    res.exponents.push_back(pv);
  }
  res.exponents.resize(n, ell);
  for (int v : res.exponents)
    if (v == 0) ++res.rank_unit;
  // Exponent chain is nondecreasing by minimal-pivot choice.
  for (size_t i = 1; i < res.exponents.size(); ++i)
    MINPDIV_CHECK(res.exponents[i - 1] <= res.exponents[i],
                  "smith: exponents not sorted");
  return res;
}

// Determinant via Smith exponents and the transforms' unit determinants is
// overkill; for unit testing we use recursive expansion on small matrices.
inline GRElement mat_det(const GRMatrix& A) {
  MINPDIV_CHECK(A.rows == A.cols, "det: square only");
  const int n = A.rows;
  if (n == 0) return GRElement::one(A.ring);
  if (n == 1) return A.at(0, 0);
  GRElement acc = GRElement::zero(A.ring);
  // Laplace along the first row; fine for ranks used here (n <= 16).
  for (int j = 0; j < n; ++j) {
    if (A.at(0, j).is_zero()) continue;
    GRMatrix sub(A.ring, n - 1, n - 1);
    for (int i = 1; i < n; ++i) {
      int cc = 0;
      for (int k = 0; k < n; ++k) {
        if (k == j) continue;
        sub.at(i - 1, cc++) = A.at(i, k);
      }
    }
    GRElement term = gr_mul(A.at(0, j), mat_det(sub));
    acc = (j % 2 == 0) ? gr_add(acc, term) : gr_sub(acc, term);
  }
  return acc;
}

inline bool mat_is_invertible(const GRMatrix& A) {
  if (A.rows != A.cols) return false;
  SmithResult s = smith_normal_form(A);
  return s.rank_unit == A.rows;
}

// Inverse of an invertible matrix via Smith: A = U^{-1} D Vt^{-1} with D = I.
inline GRMatrix mat_inverse(const GRMatrix& A) {
  MINPDIV_CHECK(A.rows == A.cols, "inverse: square only");
  SmithResult s = smith_normal_form(A);
  MINPDIV_CHECK(s.rank_unit == A.rows, "inverse: matrix not invertible");
  // U A Vt = I  =>  A^{-1} = Vt U.
  return mat_mul(s.Vt, s.U);
}

// Solve A x = b over the chain ring.  Returns a particular solution and a
// generating set of the kernel (as columns), or nullopt if unsolvable.
struct LinearSolution {
  std::vector<GRElement> particular;
  std::vector<std::vector<GRElement>> kernel;  // generators of ker A
};

inline std::optional<LinearSolution> solve_linear(
    const GRMatrix& A, const std::vector<GRElement>& b) {
  MINPDIV_CHECK((int)b.size() == A.rows, "solve_linear: shape");
  const Ring& rg = A.ring;
  const int ell = rg->ell;
  SmithResult s = smith_normal_form(A);
  // A = U^{-1} D Vt^{-1}; A x = b <=> D y = U b with x = Vt y.
  std::vector<GRElement> c = mat_apply(s.U, b);
  const int n = std::min(A.rows, A.cols);
  std::vector<GRElement> y(A.cols, GRElement::zero(rg));
  LinearSolution sol;
  for (int i = 0; i < A.rows; ++i) {
    int e = (i < n) ? s.exponents[i] : ell;
    if (e >= ell) {
      if (!c[i].is_zero()) return std::nullopt;
    } else {
      if (gr_val(c[i]) < e) return std::nullopt;
      if (i < A.cols) y[i] = gr_div_ppow(c[i], e);
    }
  }
  sol.particular = mat_apply(s.Vt, y);
  // Kernel: for diagonal exponent e in (0, ell): p^{ell-e} * column; for
  // zero diagonal or extra columns: the full column.
  for (int j = 0; j < A.cols; ++j) {
    int e = (j < n) ? s.exponents[j] : ell;
    if (e == 0) continue;
    u64 scale = (e >= ell) ? 1 : ipow(rg->p, (u64)(ell - e));
    std::vector<GRElement> gen(A.cols, GRElement::zero(rg));
    for (int i = 0; i < A.cols; ++i)
      gen[i] = gr_smul(scale, s.Vt.at(i, j));
    bool nz = false;
    for (auto& g : gen) nz = nz || !g.is_zero();
    if (nz) sol.kernel.push_back(std::move(gen));
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Lean matrices over Z/p^ell for flattened semilinear systems
// ---------------------------------------------------------------------------

struct ZplMatrix {
  u64 p = 0;
  int ell = 0;
  u64 m = 0;  // p^ell
  int rows = 0, cols = 0;
  std::vector<u64> e;  // row-major

  ZplMatrix() = default;
  ZplMatrix(u64 pp, int ll, int rr, int cc)
      : p(pp), ell(ll), m(ipow(pp, (u64)ll)), rows(rr), cols(cc),
        e((size_t)rr * cc, 0) {}

  u64& at(int i, int j) { return e[(size_t)i * cols + j]; }
  u64 at(int i, int j) const { return e[(size_t)i * cols + j]; }
};

// Kernel of a Z/p^ell matrix via row-reduction Smith (transforms on the
// column side only, since we only need the kernel and solvability).
struct ZplSolveResult {
  bool solvable = false;
  std::vector<u64> particular;          // size cols
  std::vector<std::vector<u64>> kernel; // generators, each size cols
};

inline ZplSolveResult zpl_solve(ZplMatrix A, std::vector<u64> b) {
  const u64 p = A.p, m = A.m;
  const int ell = A.ell;
  MINPDIV_CHECK((int)b.size() == A.rows, "zpl_solve: shape");
  // Column transform accumulator.
  std::vector<std::vector<u64>> Vt(A.cols, std::vector<u64>(A.cols, 0));
  for (int i = 0; i < A.cols; ++i) Vt[i][i] = 1;

  auto val = [&](u64 x) { return padic_val(x, p, ell); };
  auto inv_unit = [&](u64 u) {
    // unit inverse mod p^ell by extended power: u^{-1} mod p, Hensel lift
    u64 z = 1;
    {
      u64 up = u % p;
      // Fermat in F_p
      u64 acc = 1, sq = up, e2 = p - 2;
      while (e2) {
        if (e2 & 1) acc = acc * sq % p;
        sq = sq * sq % p;
        e2 >>= 1;
      }
      z = acc;
    }
    for (int it = 0; it < ell; ++it) {
      u64 t = (2 + m - (u * z) % m) % m;
      z = z * t % m;
    }
    MINPDIV_CHECK(u * z % m == 1, "zpl unit inverse failed");
    return z;
  };

  std::vector<int> diag_exp;
  const int n = std::min(A.rows, A.cols);
  for (int k = 0; k < n; ++k) {
    int pi = -1, pj = -1, pv = ell;
    for (int i = k; i < A.rows; ++i)
      for (int j = k; j < A.cols; ++j) {
        u64 x = A.at(i, j);
        if (x == 0) continue;
        int v = val(x);
        if (v < pv) {
          pv = v;
          pi = i;
          pj = j;
          if (pv == 0) break;
        }
      }
    if (pi < 0) break;
    if (pi != k) {
      for (int j = 0; j < A.cols; ++j) std::swap(A.at(k, j), A.at(pi, j));
      std::swap(b[k], b[pi]);
    }
    if (pj != k) {
      for (int i = 0; i < A.rows; ++i) std::swap(A.at(i, k), A.at(i, pj));
      std::swap(Vt[k], Vt[pj]);  // Vt stored column-per-entry: Vt[j] = col j
    }
    u64 pk = ipow(p, (u64)pv);
    u64 unit = A.at(k, k) / pk;
    u64 ui = inv_unit(unit);
    for (int j = 0; j < A.cols; ++j) A.at(k, j) = A.at(k, j) * ui % m;
    b[k] = b[k] * ui % m;
    for (int i = 0; i < A.rows; ++i) {
      if (i == k || A.at(i, k) == 0) continue;
      u64 q = (A.at(i, k) / pk) % m;
      for (int j = 0; j < A.cols; ++j)
        A.at(i, j) = (A.at(i, j) + (m - (q * A.at(k, j)) % m)) % m;
      b[i] = (b[i] + (m - (q * b[k]) % m)) % m;
    }
    for (int j = 0; j < A.cols; ++j) {
      if (j == k || A.at(k, j) == 0) continue;
      u64 q = (A.at(k, j) / pk) % m;
      for (int i = 0; i < A.rows; ++i)
        A.at(i, j) = (A.at(i, j) + (m - (q * A.at(i, k)) % m)) % m;
      for (int i = 0; i < A.cols; ++i)
        Vt[j][i] = (Vt[j][i] + (m - (q * Vt[k][i]) % m)) % m;
    }
    diag_exp.push_back(pv);
  }

  ZplSolveResult out;
  const int rank = (int)diag_exp.size();
  std::vector<u64> y(A.cols, 0);
  for (int i = 0; i < A.rows; ++i) {
    if (i < rank) {
      u64 pe = ipow(p, (u64)diag_exp[i]);
      if (b[i] % pe != 0) return out;
      if (i < A.cols) y[i] = b[i] / pe;
    } else {
      if (b[i] != 0) return out;
    }
  }
  out.solvable = true;
  out.particular.assign(A.cols, 0);
  for (int j = 0; j < A.cols; ++j)
    for (int i = 0; i < A.cols; ++i)
      out.particular[i] = (out.particular[i] + y[j] * Vt[j][i]) % m;
  for (int j = 0; j < A.cols; ++j) {
    int e2 = (j < rank) ? diag_exp[j] : ell;
    if (e2 == 0) continue;
    u64 scale = (e2 >= ell) ? 1 : ipow(p, (u64)(ell - e2));
    std::vector<u64> gen(A.cols, 0);
    bool nz = false;
    for (int i = 0; i < A.cols; ++i) {
      gen[i] = Vt[j][i] * scale % m;
      nz = nz || gen[i] != 0;
    }
    if (nz) out.kernel.push_back(std::move(gen));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ring embeddings
// ---------------------------------------------------------------------------

// Polynomial utilities over a residue field given as Ring with ell == 1.
namespace fieldpoly {

using Poly = std::vector<GRElement>;  // little-endian, over an ell=1 ring

inline Poly trim(Poly a) {
  while (!a.empty() && a.back().is_zero()) a.pop_back();
  return a;
}

inline int deg(const Poly& a) { return (int)a.size() - 1; }

inline Poly mul(const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) return {};
  const Ring& rg = a[0].ring;
  Poly c(a.size() + b.size() - 1, GRElement::zero(rg));
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j)
      c[i + j] = gr_add(c[i + j], gr_mul(a[i], b[j]));
  return trim(c);
}

inline Poly mod(Poly a, const Poly& f) {
  MINPDIV_CHECK(!f.empty(), "poly mod by zero");
  const Ring& rg = f[0].ring;
  GRElement lead_inv = gr_inv(f.back());
  while ((int)a.size() >= (int)f.size()) {
    GRElement q = gr_mul(a.back(), lead_inv);
    size_t off = a.size() - f.size();
    for (size_t i = 0; i < f.size(); ++i)
      a[off + i] = gr_sub(a[off + i], gr_mul(q, f[i]));
    a = trim(a);
    if (a.empty()) break;
  }
  (void)rg;
  return a;
}

inline Poly mulmod(const Poly& a, const Poly& b, const Poly& f) {
  return mod(mul(a, b), f);
}

inline Poly gcd(Poly a, Poly b) {
  a = trim(a);
  b = trim(b);
  while (!b.empty()) {
    Poly r = mod(a, b);
    a = b;
    b = r;
  }
  if (!a.empty()) {
    GRElement li = gr_inv(a.back());
    for (auto& c : a) c = gr_mul(li, c);
  }
  return a;
}

// base^(p^k) mod f by repeated p-th powers.
inline Poly powmod_ppow(Poly base, int k, const Poly& f) {
  const Ring& rg = f[0].ring;
  u64 p = rg->p;
  for (int t = 0; t < k; ++t) {
    Poly acc{GRElement::one(rg)};
    Poly sq = base;
    u64 e = p;
    while (e) {
      if (e & 1) acc = mulmod(acc, sq, f);
      sq = mulmod(sq, sq, f);
      e >>= 1;
    }
    base = acc;
  }
  return base;
}

// base^e mod f for a multi-limb exponent (little-endian bits packed in u64).
inline Poly powmod_bits(const Poly& base, const std::vector<u64>& ebits,
                        const Poly& f) {
  const Ring& rg = f[0].ring;
  Poly acc{GRElement::one(rg)};
  Poly sq = base;
  int top = (int)ebits.size() * 64 - 1;
  while (top >= 0 && !((ebits[top / 64] >> (top % 64)) & 1)) --top;
  for (int i = 0; i <= top; ++i) {
    if ((ebits[i / 64] >> (i % 64)) & 1) acc = mulmod(acc, sq, f);
    sq = mulmod(sq, sq, f);
  }
  return acc;
}

// (p^R - 1) / 2 as bit limbs (p odd).
inline std::vector<u64> half_group_order_bits(u64 p, int R) {
  // Compute p^R - 1 in base 2^32 limbs then halve.
  std::vector<u64> limbs{1};  // arbitrary precision little-endian base 2^64
  auto mul_small = [&](u64 s) {
    unsigned __int128 carry = 0;
    for (auto& L : limbs) {
      unsigned __int128 t = (unsigned __int128)L * s + carry;
      L = (u64)t;
      carry = t >> 64;
    }
    if (carry) limbs.push_back((u64)carry);
  };
  for (int i = 0; i < R; ++i) mul_small(p);
  // subtract 1
  for (auto& L : limbs) {
    if (L != 0) {
      L -= 1;
      break;
    }
    L = ~u64(0);
  }
  // halve
  u64 carry = 0;
  for (int i = (int)limbs.size() - 1; i >= 0; --i) {
    u64 nc = limbs[i] & 1;
    limbs[i] = (limbs[i] >> 1) | (carry << 63);
    carry = nc;
  }
  return limbs;
}

// One root of f (which splits completely) over its coefficient field,
// deterministic given the seed of the internal generator.
inline GRElement find_root(const Poly& f_in) {
  const Ring& rg = f_in[0].ring;
  MINPDIV_CHECK(rg->ell == 1, "find_root: field only");
  Poly f = trim(f_in);
  MINPDIV_CHECK(deg(f) >= 1, "find_root: constant polynomial");
  // Make monic.
  {
    GRElement li = gr_inv(f.back());
    for (auto& c : f) c = gr_mul(li, c);
  }
  u64 state = 0x9e3779b97f4a7c15ull;  // fixed: reproducible roots
  auto next_rand_elt = [&]() {
    std::vector<u64> v(rg->r);
    for (int i = 0; i < rg->r; ++i) {
      state = state * 6364136223846793005ull + 1442695040888963407ull;
      v[i] = (state >> 33) % rg->p;
    }
    return GRElement(rg, std::move(v));
  };
  std::vector<Poly> stack{f};
  std::vector<GRElement> roots;
  int guard = 0;
  while (!stack.empty()) {
    MINPDIV_CHECK(++guard < 100000, "find_root: did not converge");
    Poly g = stack.back();
    stack.pop_back();
    if (deg(g) == 1) {
      // root = -c0 / c1
      GRElement root = gr_neg(gr_mul(g[0], gr_inv(g[1])));
      roots.push_back(root);
      continue;
    }
    if (deg(g) == 0) continue;
    Poly splitter;
    if (rg->p == 2) {
      // Trace splitting: T(c x) = sum (c x)^(2^i), i < r.
      GRElement cc = next_rand_elt();
      Poly cx{GRElement::zero(rg), cc};
      Poly acc = mod(cx, g);
      Poly term = acc;
      for (int i = 1; i < rg->r; ++i) {
        term = mulmod(term, term, g);
        // add
        if (term.size() > acc.size()) acc.resize(term.size(), GRElement::zero(rg));
        for (size_t t = 0; t < term.size(); ++t) acc[t] = gr_add(acc[t], term[t]);
        acc = trim(acc);
        if (acc.empty()) acc = {};
      }
      splitter = acc;
    } else {
      // (x + a)^((q-1)/2) - 1
      GRElement a = next_rand_elt();
      Poly xa{a, GRElement::one(rg)};
      std::vector<u64> ebits = half_group_order_bits(rg->p, rg->r);
      Poly w = powmod_bits(mod(xa, g), ebits, g);
      if (w.empty()) w = {GRElement::zero(rg)};
      w[0] = gr_sub(w[0], GRElement::one(rg));
      splitter = trim(w);
    }
    Poly d = splitter.empty() ? Poly{} : gcd(g, splitter);
    if (d.empty() || deg(d) == 0 || deg(d) == deg(g)) {
      stack.push_back(g);  // retry with fresh randomness
      continue;
    }
    // split
    Poly q = g;
    {
      // q = g / d by long division
      Poly rem = g;
      Poly quo;
      GRElement li = gr_inv(d.back());
      quo.assign(deg(g) - deg(d) + 1, GRElement::zero(rg));
      while ((int)rem.size() >= (int)d.size() && !trim(rem).empty()) {
        rem = trim(rem);
        if ((int)rem.size() < (int)d.size()) break;
        GRElement qq = gr_mul(rem.back(), li);
        size_t off = rem.size() - d.size();
        quo[off] = qq;
        for (size_t i = 0; i < d.size(); ++i)
          rem[off + i] = gr_sub(rem[off + i], gr_mul(qq, d[i]));
      }
      q = trim(quo);
    }
    stack.push_back(d);
    stack.push_back(q);
  }
  MINPDIV_CHECK(!roots.empty(), "find_root: no roots");
  // Deterministic pick: lexicographically least coefficient vector.
  GRElement best = roots[0];
  for (const GRElement& r2 : roots)
    if (r2.c < best.c) best = r2;
  return best;
}

}  // namespace fieldpoly

// Explicit embedding GR(p^ell, r) -> GR(p^ell, r') with r | r'.  Carries the
// image of the Teichmuller generator; application is Horner evaluation.
struct RingEmbedding {
  Ring src, dst;
  GRElement gen_image;

  GRElement apply(const GRElement& a) const {
    MINPDIV_CHECK(same_ring(a.ring, src), "embedding: wrong source ring");
    GRElement acc = GRElement::zero(dst);
    for (int i = src->r - 1; i >= 0; --i) {
      acc = gr_mul(acc, gen_image);
      acc = gr_add(acc, GRElement::from_int(dst, a.c[i]));
    }
    return acc;
  }

  GRMatrix apply(const GRMatrix& A) const {
    GRMatrix B(dst, A.rows, A.cols);
    for (size_t i = 0; i < A.e.size(); ++i) B.e[i] = apply(A.e[i]);
    return B;
  }
};

// Identity embedding for uniform plumbing.
inline RingEmbedding identity_embedding(const Ring& rg) {
  return RingEmbedding{rg, rg, GRElement::gen(rg)};
}

// Level truncation at the same residue degree, in embedding shape
// (coefficientwise reduction; the generator maps to the generator).  The
// destination modulus must be the source modulus reduced mod p^ell'.
inline RingEmbedding truncation_embedding(const Ring& src, const Ring& dst) {
  bool ok = src->p == dst->p && src->r == dst->r && dst->ell <= src->ell &&
            src->modulus.size() == dst->modulus.size();
  if (ok)
    for (size_t i = 0; i < src->modulus.size(); ++i)
      ok = ok && src->modulus[i] % dst->pell == dst->modulus[i];
  MINPDIV_CHECK(ok, "truncation_embedding: not a level truncation");
  return RingEmbedding{src, dst, GRElement::gen(dst)};
}

// outer after inner.  Residue extensions of degree > 1 are not canonical
// (a modulus has several roots), so composite moves across stages must be
// composed from the embeddings actually used, never recomputed pairwise.
inline RingEmbedding compose_embeddings(const RingEmbedding& outer,
                                        const RingEmbedding& inner) {
  MINPDIV_CHECK(same_ring(outer.src, inner.dst),
                "compose_embeddings: interface rings differ");
  return RingEmbedding{inner.src, outer.dst, outer.apply(inner.gen_image)};
}

inline RingEmbedding embed_ring(const Ring& src, const Ring& dst) {
  MINPDIV_CHECK(src->p == dst->p && src->ell == dst->ell,
                "embed_ring: p or level mismatch");
  MINPDIV_CHECK(dst->r % src->r == 0, "embed_ring: degree not a multiple");
  if (src->r == dst->r && src->modulus == dst->modulus)
    return identity_embedding(src);
  if (src->r == 1) {
    // Z/p^ell includes via constants.
    RingEmbedding e{src, dst, GRElement::zero(dst)};
    return e;
  }
  // Root of the source residue modulus in the destination residue field,
  // then its Teichmuller lift in the destination ring.
  Ring res = residue_ring(dst);
  fieldpoly::Poly fbar(src->modulus.size(), GRElement::zero(res));
  for (size_t i = 0; i < src->modulus.size(); ++i)
    fbar[i] = GRElement::from_int(res, src->modulus[i] % src->p);
  GRElement root_bar = fieldpoly::find_root(fbar);
  GRElement z = gr_lift(root_bar, dst);
  for (int it = 0; it < dst->ell; ++it) z = gr_pow_ppow(z, dst->r);
  // z is Teichmuller and reduces to a root of fbar, hence f(z) = 0 exactly.
  GRElement acc = GRElement::zero(dst);
  for (int i = src->r; i >= 0; --i) {
    acc = gr_mul(acc, z);
    acc = gr_add(acc, GRElement::from_int(dst, src->modulus[i]));
  }
  MINPDIV_CHECK(acc.is_zero(), "embed_ring: modulus root failed to lift");
  RingEmbedding e{src, dst, z};
  // Frobenius compatibility on the generator (automatic for Teichmuller
  // images; asserted as a cheap safeguard).
  MINPDIV_CHECK(frobenius(z) == gr_pow(z, src->p),
                "embed_ring: Frobenius incompatibility");
  return e;
}

// ---------------------------------------------------------------------------
// Artin-Schreier solving over residue fields
// ---------------------------------------------------------------------------

// Solve x^q - x = y (q = p^n) in the residue field F_{p^R} of y's ring,
// extending the field when needed.  The extension degree divides q.  The
// result carries the (possibly extended) field and the embedding used.
struct ASResult {
  GRElement x;        // solution, over `field`
  Ring field;         // ell = 1 ring containing the solution
  bool extended = false;
  int degree_factor = 1;              // [new field : old field]
  std::optional<RingEmbedding> emb;   // old -> new when extended
};

// The F_p-linear map x -> x^(p^nred) - x on F_{p^R}, solved coordinatewise;
// nred may be reduced mod R since sigma^R = id.
inline std::optional<GRElement> as_try_field(const GRElement& y, int n) {
  const Ring& rg = y.ring;
  const int R = rg->r;
  const u64 p = rg->p;
  int nred = n % R;
  // Build the R x R matrix over F_p of sigma^nred - id acting on coords.
  ZplMatrix A(p, 1, R, R);
  for (int i = 0; i < R; ++i) {
    std::vector<u64> v(R, 0);
    v[i] = 1;
    GRElement ei(rg, v);
    GRElement im = sigma_pow(ei, nred);
    for (int j = 0; j < R; ++j) {
      u64 entry = im.c[j] % p;
      if (i == j) entry = (entry + p - 1) % p;
      A.at(j, i) = entry;
    }
  }
  std::vector<u64> b(R);
  for (int j = 0; j < R; ++j) b[j] = y.c[j] % p;
  ZplSolveResult s = zpl_solve(A, b);
  if (!s.solvable) return std::nullopt;
  GRElement x(rg, s.particular);
  return x;
}

inline ASResult artin_schreier_solve(const GRElement& y, u64 q) {
  const Ring& rg = y.ring;
  MINPDIV_CHECK(rg->ell == 1, "artin_schreier_solve: residue field only");
  const u64 p = rg->p;
  // q must be a power of p.
  u64 qq = q;
  int n = 0;
  while (qq > 1) {
    MINPDIV_CHECK(qq % p == 0, "artin_schreier_solve: q not a power of p");
    qq /= p;
    ++n;
  }
  MINPDIV_CHECK(n >= 1, "artin_schreier_solve: q must be > 1");

  // Try the current field, then p-power extensions of degree dividing q.
  if (auto x = as_try_field(y, n)) {
    ASResult res;
    res.x = *x;
    res.field = rg;
    return res;
  }
  int d = 1;
  for (int step = 1; step <= n; ++step) {
    d *= (int)p;
    long long newr = (long long)rg->r * d;
    if (newr > rg->max_degree)
      throw std::runtime_error(
          "artin_schreier_solve: residue degree budget exceeded (needed " +
          std::to_string(newr) + ", cap " + std::to_string(rg->max_degree) +
          ")");
    Ring big = gr_make(p, 1, (int)newr, rg->max_degree);
    RingEmbedding emb = embed_ring(rg, big);
    GRElement ybig = emb.apply(y);
    if (auto x = as_try_field(ybig, n)) {
      ASResult res;
      res.x = *x;
      res.field = big;
      res.extended = true;
      res.degree_factor = d;
      res.emb = emb;
      return res;
    }
  }
  throw std::runtime_error(
      "artin_schreier_solve: no solution within extension budget");
}

// ---------------------------------------------------------------------------
// Small formatting helpers (used by tests and the CLI)
// ---------------------------------------------------------------------------

inline std::string gr_to_string(const GRElement& a) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < a.c.size(); ++i) {
    if (i) os << ",";
    os << a.c[i];
  }
  os << "]";
  return os.str();
}

inline std::string mat_to_string(const GRMatrix& A) {
  std::ostringstream os;
  os << "[";
  for (int i = 0; i < A.rows; ++i) {
    if (i) os << ", ";
    os << "[";
    for (int j = 0; j < A.cols; ++j) {
      if (j) os << ",";
      os << gr_to_string(A.at(i, j));
    }
    os << "]";
  }
  os << "]";
  return os.str();
}

}  // namespace minpdiv
