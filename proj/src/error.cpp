#include "acfclust/error.hpp"

namespace acfclust {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidGrid: return "invalid grid";
    case ErrorKind::GridMismatch: return "grid mismatch";
    case ErrorKind::EmptyMask: return "empty mask";
    case ErrorKind::Precondition: return "precondition violated";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::DegenerateData: return "degenerate data";
    case ErrorKind::FitFailure: return "fit failure";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::InfiniteT: return "infinite t statistic";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Io: return "i/o error";
  }
  return "unknown error";
}

}  // namespace acfclust
