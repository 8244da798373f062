#pragma once

#include <stdexcept>
#include <string>

namespace ffq {

// Argument lies outside the basis or model domain.
class domain_error : public std::invalid_argument {
public:
    explicit domain_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Incompatible shapes or an invalid size request.
class dimension_error : public std::invalid_argument {
public:
    explicit dimension_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// A symmetric system turned out numerically rank deficient where a
// unique solution was required.
class rank_error : public std::runtime_error {
public:
    explicit rank_error(const std::string& msg) : std::runtime_error(msg) {}
};

// SPD factorization failed even after a single jitter retry. Carries an
// estimate of the smallest eigenvalue of the offending matrix.
class ill_conditioned_error : public std::runtime_error {
public:
    ill_conditioned_error(const std::string& msg, double min_eig)
        : std::runtime_error(msg), min_eigenvalue(min_eig) {}
    double min_eigenvalue;
};

// Invalid configuration or input data.
class validation_error : public std::invalid_argument {
public:
    explicit validation_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// A model selection criterion is not defined for the given fit
// (e.g. GBIC at lambda = 0, or GCV when df + 3 >= total observations).
class undefined_criterion_error : public std::runtime_error {
public:
    explicit undefined_criterion_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ffq
