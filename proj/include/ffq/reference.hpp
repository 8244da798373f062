#pragma once

#include "ffq/estimator.hpp"

// Plain serial loops over subjects, kept as the reference implementation for
// the OpenMP kernels. Tests compare the two; the bench tool times them.
namespace ffq::ref {

NormalEquations accumulate_normal_equations(const SubjectSet& subjects, const NuParams& nu);
double log_likelihood(const SubjectSet& subjects, const ThetaMatrix& theta, const NuParams& nu);
NuDerivatives nu_derivatives(const SubjectSet& subjects, const ThetaMatrix& theta,
                             const NuParams& nu);

}  // namespace ffq::ref
