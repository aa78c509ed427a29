#pragma once
// Umbrella header: the whole library in one include.
//
// Layering (each header includes the ones above it):
//   arith      Galois rings GR(p^ell, r), Frobenius, matrices, Smith form,
//              semilinear solvers, ring embeddings, Artin-Schreier solving
//   newton     Newton polygons: construction, ordering, duality, isoclinicity
//   dmodule    Dieudonne modules at finite level: validity, duality, kernels,
//              base extension, isomorphism testing, standard modules H_{m,n}
//   bt1        Kernel classification by cyclic words and minimality testing
//   algorithms slope filtration, standardization, the rigidity pipeline,
//              counterexamples for non-minimal kernels, polygon comparison

#include "algorithms.hpp"
