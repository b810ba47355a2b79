#pragma once

#include <stdexcept>
#include <string>

namespace aroid {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent configuration / usage (maps to CLI exit code 2).
struct ConfigError : Error {
  using Error::Error;
};

/// Unknown operation or out-of-range index against the augmentation catalog.
struct CatalogError : Error {
  using Error::Error;
};

/// Dataset file problems (malformed records, unreadable files).
struct IngestError : Error {
  using Error::Error;
};

/// Attack diverged (non-finite loss) or was misconfigured.
struct AttackError : Error {
  using Error::Error;
};

/// Training aborted (non-finite target loss etc.).
struct TrainError : Error {
  using Error::Error;
};

}  // namespace aroid
