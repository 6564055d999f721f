#pragma once

#include <filesystem>

#include "saber/types.hpp"

namespace saber {

// On-disk dataset directory: meta.json (layout, rate, bad channels, format
// version), data.f32le (channel-major little-endian float32, one row per
// channel in meta.json label order) and events.csv. This is the only
// persistent interchange format in the repo; samples are quantized to
// float32 on disk, all computation stays in double.
inline constexpr int kDatasetFormatVersion = 1;

void write_dataset(const RawRecording& rec, const std::filesystem::path& dir);

// Reads a directory produced by write_dataset (or conforming to the same
// format). Unsorted events are re-sorted with a warning. Throws
// ErrorKind::Io (missing file), Format (malformed content), SizeMismatch
// (declared vs actual sample count), Version (unknown format version).
RawRecording read_dataset(const std::filesystem::path& dir);

}  // namespace saber
