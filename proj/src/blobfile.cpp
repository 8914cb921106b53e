#include "ets/blobfile.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

using nlohmann::json;

namespace ets {

namespace {

constexpr char kMagic[8] = {'E', 'T', 'S', 'B', 'L', 'O', 'B', '1'};

void append_bytes(std::string& out, const void* p, size_t n) {
  out.append(reinterpret_cast<const char*>(p), n);
}

}  // namespace

void write_blob_file(const std::string& path, const BlobFile& blob) {
  json header;
  header["kind"] = blob.kind;
  header["meta"] = blob.meta;
  json tens = json::array();
  uint64_t offset = 0;
  for (const auto& t : blob.tensors) {
    tens.push_back({{"name", t.name},
                    {"shape", t.shape},
                    {"offset", offset},
                    {"size", t.data.size()}});
    offset += t.data.size();
  }
  header["tensors"] = tens;
  const std::string hs = header.dump();

  std::string buf;
  append_bytes(buf, kMagic, 8);
  const uint32_t version = BlobFile::kSchemaVersion;
  append_bytes(buf, &version, 4);
  const uint64_t hlen = hs.size();
  append_bytes(buf, &hlen, 8);
  buf += hs;
  for (const auto& t : blob.tensors)
    append_bytes(buf, t.data.data(), t.data.size() * sizeof(float));
  const uint32_t crc =
      static_cast<uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
                                  static_cast<uInt>(buf.size())));
  append_bytes(buf, &crc, 4);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("io", "cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) fail("io", "write failed: " + path);
}

BlobFile read_blob_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 8 + 4 + 8 + 4 || std::memcmp(buf.data(), kMagic, 8) != 0)
    fail("checkpoint", "not a parameter container: " + path);
  const uint32_t stored_crc = [&] {
    uint32_t v;
    std::memcpy(&v, buf.data() + buf.size() - 4, 4);
    return v;
  }();
  const uint32_t crc =
      static_cast<uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
                                  static_cast<uInt>(buf.size() - 4)));
  if (crc != stored_crc)
    fail("checksum", "corrupt or truncated container (CRC mismatch): " + path);

  uint32_t version;
  std::memcpy(&version, buf.data() + 8, 4);
  if (version != BlobFile::kSchemaVersion)
    fail("checkpoint", "unsupported container schema version " + std::to_string(version) +
                           " in " + path);
  uint64_t hlen;
  std::memcpy(&hlen, buf.data() + 12, 8);
  const size_t header_off = 20;
  if (header_off + hlen > buf.size() - 4) fail("checksum", "corrupt header in " + path);
  json header;
  try {
    header = json::parse(buf.substr(header_off, hlen));
  } catch (const json::exception& e) {
    fail("checkpoint", std::string("corrupt header JSON: ") + e.what());
  }

  BlobFile blob;
  blob.kind = header.value("kind", "");
  blob.meta = header.value("meta", json::object());
  const size_t payload_off = header_off + hlen;
  const size_t payload_floats = (buf.size() - 4 - payload_off) / sizeof(float);
  for (const auto& t : header["tensors"]) {
    NamedTensorBlob nt;
    nt.name = t.at("name").get<std::string>();
    const auto shp = t.at("shape");
    for (int i = 0; i < 4; ++i) nt.shape[i] = shp.at(i).get<int>();
    const uint64_t off = t.at("offset").get<uint64_t>();
    const uint64_t size = t.at("size").get<uint64_t>();
    if (off + size > payload_floats) fail("checksum", "tensor outside payload in " + path);
    nt.data.resize(size);
    std::memcpy(nt.data.data(), buf.data() + payload_off + off * sizeof(float),
                size * sizeof(float));
    blob.tensors.push_back(std::move(nt));
  }
  return blob;
}

}  // namespace ets
