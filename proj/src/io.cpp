#include "npd/io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "npd/errors.hpp"

namespace npd::io {

namespace fs = std::filesystem;

uint32_t crc32_bytes(const void* data, size_t n, uint32_t seed) {
  return static_cast<uint32_t>(
      ::crc32(seed, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

void BinaryWriter::raw(const void* data, size_t n, bool in_payload) {
  const auto* p = static_cast<const unsigned char*>(data);
  buf_.insert(buf_.end(), p, p + n);
  if (in_payload) crc_ = crc32_bytes(data, n, crc_);
}

void BinaryWriter::magic(const char tag[8]) {
  raw(tag, 8, false);
  payload_started_ = true;
}

void BinaryWriter::u16(uint16_t v) { raw(&v, 2, payload_started_); }
void BinaryWriter::u32(uint32_t v) { raw(&v, 4, payload_started_); }
void BinaryWriter::f32(float v) { raw(&v, 4, payload_started_); }
void BinaryWriter::f64(double v) { raw(&v, 8, payload_started_); }
void BinaryWriter::bytes(const void* data, size_t n) { raw(data, n, payload_started_); }
void BinaryWriter::u32_array(const uint32_t* v, size_t n) { raw(v, n * 4, payload_started_); }
void BinaryWriter::u16_array(const uint16_t* v, size_t n) { raw(v, n * 2, payload_started_); }
void BinaryWriter::f64_array(const double* v, size_t n) { raw(v, n * 8, payload_started_); }

uint32_t BinaryWriter::commit(const fs::path& path) {
  uint32_t crc = crc_;
  raw(&crc, 4, false);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw NpdError(ErrorKind::Input, "cannot open for write: " + tmp.string());
    out.write(reinterpret_cast<const char*>(buf_.data()),
              static_cast<std::streamsize>(buf_.size()));
    if (!out) throw NpdError(ErrorKind::Input, "short write: " + tmp.string());
  }
  fs::rename(tmp, path);
  return crc;
}

BinaryReader::BinaryReader(const fs::path& path) : path_(path.string()) {
  require_exists(path, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NpdError(ErrorKind::MissingArtifact, "cannot open: " + path_);
  in.seekg(0, std::ios::end);
  buf_.resize(static_cast<size_t>(in.tellg()));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
}

void BinaryReader::raw(void* out, size_t n, bool in_payload) {
  if (pos_ + n > buf_.size())
    throw NpdError(ErrorKind::Parse, path_ + ": truncated (wanted " +
                                         std::to_string(n) + " bytes at offset " +
                                         std::to_string(pos_) + ")");
  std::memcpy(out, buf_.data() + pos_, n);
  if (in_payload) crc_ = crc32_bytes(buf_.data() + pos_, n, crc_);
  pos_ += n;
}

void BinaryReader::expect_magic(const char tag[8]) {
  char got[8];
  raw(got, 8, false);
  if (std::memcmp(got, tag, 8) != 0)
    throw NpdError(ErrorKind::Parse,
                   path_ + ": bad magic, expected '" + std::string(tag, 8) + "'");
}

uint16_t BinaryReader::u16() { uint16_t v; raw(&v, 2, true); return v; }
uint32_t BinaryReader::u32() { uint32_t v; raw(&v, 4, true); return v; }
float BinaryReader::f32() { float v; raw(&v, 4, true); return v; }
double BinaryReader::f64() { double v; raw(&v, 8, true); return v; }
void BinaryReader::bytes(void* out, size_t n) { raw(out, n, true); }
void BinaryReader::u32_array(uint32_t* out, size_t n) { raw(out, n * 4, true); }
void BinaryReader::u16_array(uint16_t* out, size_t n) { raw(out, n * 2, true); }
void BinaryReader::f64_array(double* out, size_t n) { raw(out, n * 8, true); }

uint32_t BinaryReader::verify_trailing_crc() {
  uint32_t expect = crc_;
  uint32_t stored;
  raw(&stored, 4, false);
  if (stored != expect)
    throw NpdError(ErrorKind::Validation,
                   path_ + ": CRC mismatch (stored " + std::to_string(stored) +
                       ", computed " + std::to_string(expect) + ")");
  return stored;
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw NpdError(ErrorKind::Input, "cannot open for write: " + tmp.string());
    out << content;
    if (!out) throw NpdError(ErrorKind::Input, "short write: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  require_exists(path, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NpdError(ErrorKind::MissingArtifact, "cannot open: " + path.string());
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::string text = read_text(path);
  std::vector<std::string> lines;
  size_t start = 0;
  while (start < text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

void require_exists(const fs::path& path, const std::string& what) {
  if (!fs::exists(path))
    throw NpdError(ErrorKind::MissingArtifact, "missing artifact: " + what);
}

void write_meta(const fs::path& artifact, const Meta& meta) {
  nlohmann::json j;
  j["command"] = meta.command;
  j["config_hash"] = meta.config_hash;
  if (meta.policy_version >= 0) j["policy_version"] = meta.policy_version;
  nlohmann::json inputs = nlohmann::json::object();
  for (const auto& [k, v] : meta.inputs) inputs[k] = v;
  j["inputs"] = inputs;
  fs::path p = artifact;
  p += ".meta.json";
  write_text_atomic(p, j.dump(2) + "\n");
}

}  // namespace npd::io
