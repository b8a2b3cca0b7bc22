#pragma once

#include <stdexcept>
#include <string>

namespace demoforge {

/// Machine-readable failure kinds. The names double as the failure_reason
/// strings written into demo records and batch stats.
enum class ErrorKind {
  MalformedXml,
  KinematicLoop,
  UnsupportedJointType,
  MissingLimit,
  DimensionMismatch,
  UnknownFrame,
  DegenerateEndpoints,
  SamplingExhausted,
  DegenerateCloud,
  NoTemporalOverlap,
  NoMotionDetected,
  NoFeasibleGrasp,
  WindowOutOfRange,
  Diverged,
  TrackingFailure,
  ParseError,
  MissingAsset,
  InvariantViolation,
  FormatUnavailable,
  IoError,
  InvalidArgument,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedXml: return "MalformedXml";
    case ErrorKind::KinematicLoop: return "KinematicLoop";
    case ErrorKind::UnsupportedJointType: return "UnsupportedJointType";
    case ErrorKind::MissingLimit: return "MissingLimit";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::UnknownFrame: return "UnknownFrame";
    case ErrorKind::DegenerateEndpoints: return "DegenerateEndpoints";
    case ErrorKind::SamplingExhausted: return "SamplingExhausted";
    case ErrorKind::DegenerateCloud: return "DegenerateCloud";
    case ErrorKind::NoTemporalOverlap: return "NoTemporalOverlap";
    case ErrorKind::NoMotionDetected: return "NoMotionDetected";
    case ErrorKind::NoFeasibleGrasp: return "NoFeasibleGrasp";
    case ErrorKind::WindowOutOfRange: return "WindowOutOfRange";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::TrackingFailure: return "TrackingFailure";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MissingAsset: return "MissingAsset";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::FormatUnavailable: return "FormatUnavailable";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  /// Step index for solver failures, -1 otherwise.
  int step = -1;
  /// End-effector frame of the arm a bimanual failure belongs to.
  std::string arm;

 private:
  ErrorKind kind_;
};

}  // namespace demoforge
