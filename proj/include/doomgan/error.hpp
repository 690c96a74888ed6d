#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace doomgan {

enum class Errc {
  BadMagic,
  TruncatedDirectory,
  OverlappingOutOfBounds,
  MissingLump,
  MisalignedLump,
  NameTooLong,
  DoesNotFit,
  UnclosedSector,
  EmptyInput,
  EmptyFloor,
  EmptyGraph,
  EmptyCorpus,
  SizeMismatch,
  TooSmall,
  EmptyMeaningfulSet,
  ShapeMismatch,
  NoForwardCache,
  NonScalarOutput,
  NonSquare,
  EmptyDataset,
  MissingFeatures,
  MissingConditioning,
  NoInput,
  BadCheckpoint,
  Io,
  InvalidConfig,
};

std::string_view errc_name(Errc code) noexcept;

// All library failures are reported through this type; code() is the
// machine-readable category, what() carries the detail.
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

}  // namespace doomgan
