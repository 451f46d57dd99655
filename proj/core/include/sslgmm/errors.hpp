#pragma once

#include <stdexcept>
#include <string>

namespace sslgmm {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Iterative scheme blew up (NaN, or relative change beyond the divergence threshold).
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int iteration);
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual);
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

// Denominator of the RMLE curvature response vanished.
class SingularityError : public Error {
public:
    using Error::Error;
};

class DegenerateInput : public Error {
public:
    using Error::Error;
};

class OutOfRange : public Error {
public:
    using Error::Error;
};

}  // namespace sslgmm
