#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace mtlseg {

// Shortest-ish decimal form used by every CSV writer; %.9g round-trips any
// binary32 value, so logs stay byte-stable across identical runs.
inline std::string str_g9(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
}

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape or dimension disagreement; the message names the offending dimension.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Invalid argument value (non-binary mask, bad threshold, missing gradient, ...).
class ValueError : public Error {
public:
    using Error::Error;
};

// File format or filesystem problem.
class IoError : public Error {
public:
    using Error::Error;
};

// Bad configuration file or unknown key.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace mtlseg
