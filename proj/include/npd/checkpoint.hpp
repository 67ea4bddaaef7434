#pragma once

#include <filesystem>

#include "npd/model.hpp"

namespace npd {

// Little-endian: magic "NPDCKPT1", then V, w, d_e, d_h, version as u32, then
// the parameter tensors in declaration order as f64, then a CRC32 of the
// payload. Returns the payload CRC.
uint32_t write_checkpoint(const TinyLm& lm, const std::filesystem::path& path);

TinyLm read_checkpoint(const std::filesystem::path& path);

}  // namespace npd
