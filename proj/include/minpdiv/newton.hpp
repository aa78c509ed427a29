// newton.hpp
//
// Newton polygons of p-divisible groups, encoded as formal sums of coprime
// pairs (m, n) with multiplicities.  The pair (m, n) contributes n/(m+n) as
// a slope with multiplicity m+n; slopes are kept strictly increasing.  The
// polygon itself is the lower-convex lattice path from (0, 0) with, for each
// part, m+n steps of slope n/(m+n); height h = sum (m_i+n_i), dimension
// d = sum n_i... (the path ends at (h, sum n_i)).

#pragma once

#include <minpdiv/arith.hpp>

#include <numeric>
#include <string>
#include <vector>

namespace minpdiv {

struct NewtonPart {
  int m = 0, n = 0;   // coprime, m >= 0, n >= 0, not both 0
  int mult = 1;

  int height() const { return m + n; }
  // Slope as a fraction n / (m+n).
  std::pair<int, int> slope() const { return {n, m + n}; }

  bool operator==(const NewtonPart& o) const {
    return m == o.m && n == o.n && mult == o.mult;
  }
};

// Comparison of slopes n1/h1 < n2/h2 without overflow at these sizes.
inline bool slope_less(const NewtonPart& a, const NewtonPart& b) {
  return (long long)a.n * b.height() < (long long)b.n * a.height();
}

struct NewtonPolygon {
  std::vector<NewtonPart> parts;  // strictly increasing slopes

  int height() const {
    int h = 0;
    for (const auto& p : parts) h += p.height() * p.mult;
    return h;
  }
  int dim() const {
    int d = 0;
    for (const auto& p : parts) d += p.n * p.mult;
    return d;
  }
  bool empty() const { return parts.empty(); }

  bool operator==(const NewtonPolygon& o) const { return parts == o.parts; }
};

// Normalize a list of (m, n, mult) into a polygon: reduce each pair by its
// gcd folding the factor into the multiplicity, merge equal slopes, sort.
inline NewtonPolygon np_make(std::vector<NewtonPart> raw) {
  for (auto& p : raw) {
    if (p.m < 0 || p.n < 0 || (p.m == 0 && p.n == 0) || p.mult <= 0)
      input_error("newton polygon: parts need m,n >= 0, not both zero, mult > 0");
    int g = std::gcd(p.m, p.n);
    p.m /= g;
    p.n /= g;
    p.mult *= g;
  }
  std::sort(raw.begin(), raw.end(), [](const NewtonPart& a, const NewtonPart& b) {
    return slope_less(a, b);
  });
  NewtonPolygon np;
  for (const auto& p : raw) {
    if (!np.parts.empty() && np.parts.back().m == p.m &&
        np.parts.back().n == p.n)
      np.parts.back().mult += p.mult;
    else
      np.parts.push_back(p);
  }
  return np;
}

// Isoclinic check: a single slope.
inline bool np_isoclinic(const NewtonPolygon& np) {
  return np.parts.size() == 1;
}

// Dual polygon: (m, n) -> (n, m), i.e. slope s -> 1 - s.
inline NewtonPolygon np_dual(const NewtonPolygon& np) {
  std::vector<NewtonPart> parts;
  for (const auto& p : np.parts) parts.push_back({p.n, p.m, p.mult});
  return np_make(std::move(parts));
}

// The common denominator of the breakpoints: lcm of part heights.
inline int np_T(const NewtonPolygon& np) {
  long long t = 1;
  for (const auto& p : np.parts) t = std::lcm(t, (long long)p.height());
  MINPDIV_CHECK(t <= 1 << 20, "np_T overflow");
  return (int)t;
}

// The polygon as a lattice path: y-values at integer x in [0, height],
// scaled by np_T so every value is an integer.
inline std::vector<long long> np_path_scaled(const NewtonPolygon& np, int T) {
  std::vector<long long> y;
  y.push_back(0);
  long long cur = 0;
  for (const auto& p : np.parts) {
    // slope n/h scaled by T: T*n/h integral since h | T.
    long long step = (long long)T * p.n / p.height();
    for (int k = 0; k < p.height() * p.mult; ++k) {
      cur += step;
      y.push_back(cur);
    }
  }
  return y;
}

enum class NpOrder {
  equal,
  strictly_below,   // first polygon lies strictly below somewhere, never above
  below_or_equal,   // below or touching everywhere, equal nowhere strict? (see precedes)
  incomparable,
};

// Pointwise comparison of two polygons with the same endpoints ("lying
// below" = smaller ordinate).  Returns:
//   equal          identical paths
//   strictly_below first is <= everywhere and < somewhere
//   incomparable   crossing paths or different endpoints
// below_or_equal is reported when the paths coincide in value but come from
// different part lists (cannot happen after normalization; kept for JSON).
inline NpOrder np_compare(const NewtonPolygon& a, const NewtonPolygon& b) {
  if (a.height() != b.height() || a.dim() != b.dim()) return NpOrder::incomparable;
  int T = std::lcm(np_T(a), np_T(b));
  std::vector<long long> ya = np_path_scaled(a, T);
  std::vector<long long> yb = np_path_scaled(b, T);
  MINPDIV_CHECK(ya.size() == yb.size(), "np_compare: path size mismatch");
  bool some_below = false, some_above = false;
  for (size_t i = 0; i < ya.size(); ++i) {
    if (ya[i] < yb[i]) some_below = true;
    if (ya[i] > yb[i]) some_above = true;
  }
  if (!some_below && !some_above) return NpOrder::equal;
  if (some_below && !some_above) return NpOrder::strictly_below;
  return NpOrder::incomparable;
}

inline std::string np_order_name(NpOrder o) {
  switch (o) {
    case NpOrder::equal: return "equal";
    case NpOrder::strictly_below: return "strictly-below";
    case NpOrder::below_or_equal: return "below-or-equal";
    case NpOrder::incomparable: return "incomparable";
  }
  return "?";
}

// Text form "m1:n1^mult + m2:n2 + ..." with ^1 omitted.
inline std::string np_to_string(const NewtonPolygon& np) {
  if (np.parts.empty()) return "0";
  std::string s;
  for (size_t i = 0; i < np.parts.size(); ++i) {
    if (i) s += " + ";
    s += std::to_string(np.parts[i].m) + ":" + std::to_string(np.parts[i].n);
    if (np.parts[i].mult != 1) s += "^" + std::to_string(np.parts[i].mult);
  }
  return s;
}

// Parse the text form; accepts "m:n", "m:n^k", joined by "+" with optional
// whitespace.
inline NewtonPolygon np_parse(const std::string& text) {
  std::vector<NewtonPart> parts;
  std::string t;
  for (char c : text)
    if (!isspace((unsigned char)c)) t += c;
  if (t.empty() || t == "0") return {};
  size_t pos = 0;
  while (pos < t.size()) {
    size_t end = t.find('+', pos);
    if (end == std::string::npos) end = t.size();
    std::string piece = t.substr(pos, end - pos);
    size_t colon = piece.find(':');
    if (colon == std::string::npos)
      input_error("newton polygon parse: expected m:n in '" + piece + "'");
    size_t caret = piece.find('^', colon);
    NewtonPart part;
    try {
      part.m = std::stoi(piece.substr(0, colon));
      part.n = std::stoi(piece.substr(
          colon + 1,
          (caret == std::string::npos ? piece.size() : caret) - colon - 1));
      part.mult =
          caret == std::string::npos ? 1 : std::stoi(piece.substr(caret + 1));
    } catch (const std::exception&) {
      input_error("newton polygon parse: bad integer in '" + piece + "'");
    }
    parts.push_back(part);
    pos = end + 1;
  }
  return np_make(std::move(parts));
}

// ---------------------------------------------------------------------------
// Convenience aliases under the names used by the command-line surface.
// ---------------------------------------------------------------------------

// Build a polygon from explicit (m, n, mult) triples.
inline NewtonPolygon np_from_pairs(const std::vector<NewtonPart>& pairs) {
  return np_make(pairs);
}

inline int np_height(const NewtonPolygon& np) { return np.height(); }

// Codimension: the total y-drop of the dual, i.e. sum of m * mult.
inline int np_codim(const NewtonPolygon& np) {
  int c = 0;
  for (const auto& p : np.parts) c += p.m * p.mult;
  return c;
}

// The canonical lattice path: ordinates at x = 0..height scaled by np_T.
struct PolygonPath {
  int T = 1;
  std::vector<long long> y_scaled;
};

inline PolygonPath np_path(const NewtonPolygon& np) {
  int T = np_T(np);
  return {T, np_path_scaled(np, T)};
}

// The partial order "lies on or below": alias of np_compare.
inline NpOrder precedes(const NewtonPolygon& a, const NewtonPolygon& b) {
  return np_compare(a, b);
}

}  // namespace minpdiv
