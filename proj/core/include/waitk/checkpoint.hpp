#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "waitk/model.hpp"

namespace waitk {

// Binary layout, little-endian throughout:
//   "WKCK" | u32 version (1) | u32 tensor count
//   per tensor: u16 name length | name | u8 rank | u64 extents | f32 values
//   u32 CRC-32 of the tensor records
// The model config travels as an 8-element tensor named "config".
void write_tensors(std::ostream& out, const NamedTensors& tensors);
// Throws DataError on a bad magic, version, truncation or CRC mismatch.
NamedTensors read_tensors(std::istream& in);

void save_checkpoint(std::ostream& out, const Parameters& params);
// Validates names and shapes against the stored config.
Parameters load_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Parameters& params);
Parameters load_checkpoint(const std::filesystem::path& path);

// Values as they come back from a checkpoint (rounded to f32).
Parameters round_to_f32(Parameters params);

}  // namespace waitk
