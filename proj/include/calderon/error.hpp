#pragma once

#include <stdexcept>
#include <string>

namespace calderon {

enum class ErrorKind {
    InvalidArgument,
    DegenerateGeometry,
    NoExtremalVertex,
    FrequencyTooLow,
    InconsistentGeometry,
    MeshResolution,
    SolverFailure,
    IncompatibleData,
    FitUnreliable,
    DomainError,
    OutOfRange,
    ContourOutsideMesh,
    Precondition,
    FlatLandscape,
    Config,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::DegenerateGeometry: return "degenerate geometry";
    case ErrorKind::NoExtremalVertex: return "no extremal vertex";
    case ErrorKind::FrequencyTooLow: return "frequency too low";
    case ErrorKind::InconsistentGeometry: return "inconsistent geometry";
    case ErrorKind::MeshResolution: return "mesh resolution";
    case ErrorKind::SolverFailure: return "solver failure";
    case ErrorKind::IncompatibleData: return "incompatible data";
    case ErrorKind::FitUnreliable: return "fit unreliable";
    case ErrorKind::DomainError: return "domain error";
    case ErrorKind::OutOfRange: return "out of range";
    case ErrorKind::ContourOutsideMesh: return "contour outside mesh";
    case ErrorKind::Precondition: return "precondition violated";
    case ErrorKind::FlatLandscape: return "flat misfit landscape";
    case ErrorKind::Config: return "config";
    }
    return "error";
}

}  // namespace calderon
