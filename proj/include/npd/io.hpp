#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace npd::io {

// Accumulates bytes in memory; commit() writes temp-then-rename so readers
// never observe a partial artifact. The CRC runs over everything appended
// after begin_payload() (i.e. past the magic).
class BinaryWriter {
public:
  void magic(const char tag[8]);
  void u16(uint16_t v);
  void u32(uint32_t v);
  void f32(float v);
  void f64(double v);
  void bytes(const void* data, size_t n);
  void u32_array(const uint32_t* v, size_t n);
  void u16_array(const uint16_t* v, size_t n);
  void f64_array(const double* v, size_t n);

  uint32_t payload_crc() const { return crc_; }
  // appends the payload CRC and writes the file
  uint32_t commit(const std::filesystem::path& path);

private:
  void raw(const void* data, size_t n, bool in_payload);
  std::vector<unsigned char> buf_;
  uint32_t crc_ = 0;
  bool payload_started_ = false;
};

class BinaryReader {
public:
  // loads whole file; throws MissingArtifact if absent
  explicit BinaryReader(const std::filesystem::path& path);

  // checks the 8-byte magic, starts CRC tracking after it
  void expect_magic(const char tag[8]);
  uint16_t u16();
  uint32_t u32();
  float f32();
  double f64();
  void bytes(void* out, size_t n);
  void u32_array(uint32_t* out, size_t n);
  void u16_array(uint16_t* out, size_t n);
  void f64_array(double* out, size_t n);

  // reads the trailing CRC and verifies it against the payload
  uint32_t verify_trailing_crc();
  uint32_t payload_crc() const { return crc_; }
  size_t remaining() const { return buf_.size() - pos_; }

private:
  void raw(void* out, size_t n, bool in_payload);
  std::string path_;
  std::vector<unsigned char> buf_;
  size_t pos_ = 0;
  uint32_t crc_ = 0;
};

uint32_t crc32_bytes(const void* data, size_t n, uint32_t seed = 0);

// temp-then-rename text write
void write_text_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);

void require_exists(const std::filesystem::path& path, const std::string& what);

// Provenance sidecar (`<artifact>.meta.json`): producing command, config hash,
// policy version where meaningful.
struct Meta {
  std::string command;
  uint32_t config_hash = 0;
  int64_t policy_version = -1;  // -1 when not applicable
  std::vector<std::pair<std::string, std::string>> inputs;
};

void write_meta(const std::filesystem::path& artifact, const Meta& meta);

}  // namespace npd::io
