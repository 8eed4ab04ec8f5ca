#pragma once

#include <stdexcept>
#include <string>

namespace patchprint {

// All library failures are exceptions rooted here. The CLI maps anything
// derived from Error to exit code 3; argument parsing problems exit 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// image i/o
struct FileNotFound : Error { using Error::Error; };
struct UnsupportedFormat : Error { using Error::Error; };
struct CorruptData : Error { using Error::Error; };

// patch selection
struct PatchTooLarge : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct KTooLarge : Error { using Error::Error; };

// autodiff / optimizer
struct ShapeMismatch : Error { using Error::Error; };
struct NotScalar : Error { using Error::Error; };
struct MissingGradient : Error { using Error::Error; };

// manifests
struct ParseError : Error { using Error::Error; };
struct UnknownLabel : Error { using Error::Error; };
struct SingleClassDataset : Error { using Error::Error; };

// checkpoints
struct BadMagic : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace patchprint
