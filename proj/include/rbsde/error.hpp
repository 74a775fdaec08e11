#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace rbsde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on user-supplied data does not hold.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A numerical procedure produced a non-finite or runaway value.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// An iterative solver stopped without meeting its tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

namespace detail {

template <class... Args>
std::string concat(const Args&... args) {
    std::ostringstream os;
    os.precision(17);
    (os << ... << args);
    return os.str();
}

}  // namespace detail

template <class E = InvalidArgument, class... Args>
inline void require(bool condition, const Args&... message) {
    if (!condition) throw E(detail::concat(message...));
}

}  // namespace rbsde
