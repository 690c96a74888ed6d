#include "doomgan/error.hpp"

namespace doomgan {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedDirectory: return "TruncatedDirectory";
    case Errc::OverlappingOutOfBounds: return "OverlappingOutOfBounds";
    case Errc::MissingLump: return "MissingLump";
    case Errc::MisalignedLump: return "MisalignedLump";
    case Errc::NameTooLong: return "NameTooLong";
    case Errc::DoesNotFit: return "DoesNotFit";
    case Errc::UnclosedSector: return "UnclosedSector";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyFloor: return "EmptyFloor";
    case Errc::EmptyGraph: return "EmptyGraph";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::TooSmall: return "TooSmall";
    case Errc::EmptyMeaningfulSet: return "EmptyMeaningfulSet";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NoForwardCache: return "NoForwardCache";
    case Errc::NonScalarOutput: return "NonScalarOutput";
    case Errc::NonSquare: return "NonSquare";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::MissingFeatures: return "MissingFeatures";
    case Errc::MissingConditioning: return "MissingConditioning";
    case Errc::NoInput: return "NoInput";
    case Errc::BadCheckpoint: return "BadCheckpoint";
    case Errc::Io: return "Io";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace doomgan
