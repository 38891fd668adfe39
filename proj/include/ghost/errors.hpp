#pragma once

#include <stdexcept>
#include <string>

namespace ghost {

// Failure taxonomy shared by the library and the CLI exit-code mapping.
// Every throwing code path in the library uses one of these classes so a
// caller can dispatch on failure class rather than message text.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input value (non-unit quaternion, bad joint state, non-monotone
// timestamp, mismatched sequence lengths, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Unreadable or malformed file content.
class ParseError : public Error {
public:
    using Error::Error;
};

// Point at or behind the camera plane where projection is undefined.
class BehindCameraError : public Error {
public:
    using Error::Error;
};

// Fewer accepted marker detections than the registration gate requires.
class InsufficientDetectionsError : public Error {
public:
    using Error::Error;
};

// Too few usable observations to pose the problem at all.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// Input geometry does not constrain the solution (collinear points,
// rank-deficient correspondence sets).
class DegenerateConfigurationError : public Error {
public:
    using Error::Error;
};

// Motion set whose rotation axes are (near-)parallel: the translation
// component of a hand-eye transform is unobservable from such data.
class UnobservableTranslationError : public Error {
public:
    using Error::Error;
};

// Robust estimation examined its hypothesis budget without finding a
// consensus set of the required minimum size.
class NoConsensusError : public Error {
public:
    using Error::Error;
};

} // namespace ghost
