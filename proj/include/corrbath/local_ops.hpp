#pragma once

#include <cmath>

#include "corrbath/common.hpp"

namespace corrbath::ops {

// Matrix element convention: op(s, s') = <s| op |s'>.

inline MatrixXc identity(int d) { return MatrixXc::Identity(d, d); }

/// Truncated bosonic annihilator, <m-1| a |m> = sqrt(m).
inline MatrixXc annihilate(int d) {
  MatrixXc a = MatrixXc::Zero(d, d);
  for (int m = 1; m < d; ++m) a(m - 1, m) = std::sqrt(static_cast<double>(m));
  return a;
}

inline MatrixXc create(int d) { return annihilate(d).adjoint(); }

inline MatrixXc number(int d) {
  MatrixXc n = MatrixXc::Zero(d, d);
  for (int m = 0; m < d; ++m) n(m, m) = m;
  return n;
}

// Two-level system site: |0> empty, |1> holds the excitation.
inline MatrixXc site_lower() { return annihilate(2); }       // f
inline MatrixXc site_raise() { return create(2); }           // f^dagger
inline MatrixXc site_projector() { return number(2); }       // |alpha><alpha|

} // namespace corrbath::ops
