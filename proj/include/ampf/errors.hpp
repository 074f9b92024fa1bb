#pragma once

#include <stdexcept>

namespace ampf {

// Common base so subsystem boundaries can catch one type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IndexError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct OrderError : Error { using Error::Error; };
struct FetchError : Error { using Error::Error; };
struct MissingMetricError : Error { using Error::Error; };
struct TrainingDiverged : Error { using Error::Error; };
struct DegenerateMetric : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

} // namespace ampf
