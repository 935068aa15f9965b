#ifndef FACC_ERRORS_HPP
#define FACC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace facc {

// Geometry violations: non-divisible strides, mismatched sides, ragged lanes.
struct GeometryError : std::runtime_error {
    explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

// On-chip resource limits: cache depths, FIFO capacities, field widths.
struct CapacityError : std::runtime_error {
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed layer descriptors or command streams.
struct CommandError : std::runtime_error {
    explicit CommandError(const std::string& what) : std::runtime_error(what) {}
};

// Host<->engine transport faults (stalled channel, timeout).
struct TransportError : std::runtime_error {
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

// Unparseable input files (network descriptions, blobs, manifests).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace facc

#endif
