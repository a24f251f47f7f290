#include "dnl/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dnl/errors.hpp"

namespace dnl {

void append_f64_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
  }
}

double read_f64_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[i];
  return std::bit_cast<double>(bits);
}

void save_checkpoint(const std::filesystem::path& path, const TensorMap& tensors) {
  std::ostringstream header;
  header << "dnl-checkpoint 1\n" << "tensors " << tensors.size() << '\n';
  std::string payload;
  for (const auto& [name, t] : tensors) {
    if (name.empty() || name.find_first_of(" \t\r\n") != std::string::npos) {
      throw IoError("checkpoint: invalid tensor name '" + name + "'");
    }
    header << name << ' ' << t.rank();
    for (std::size_t d : t.shape()) header << ' ' << d;
    header << ' ' << payload.size() << '\n';
    for (double v : t.data()) append_f64_le(payload, v);
  }
  header << "payload " << payload.size() << '\n';

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("short write to checkpoint " + path.string());
}

TensorMap load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());

  auto fail = [&](const std::string& why) {
    return IoError("checkpoint " + path.string() + ": " + why);
  };
  std::string line;
  if (!std::getline(in, line) || line != "dnl-checkpoint 1") {
    throw fail("missing 'dnl-checkpoint 1' magic line");
  }
  std::size_t count = 0;
  {
    if (!std::getline(in, line)) throw fail("truncated manifest");
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key >> count) || key != "tensors") throw fail("bad 'tensors' line");
  }
  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw fail("truncated manifest");
    std::istringstream ls(line);
    Entry e;
    std::size_t rank = 0;
    if (!(ls >> e.name >> rank)) throw fail("bad manifest line: " + line);
    e.shape.resize(rank);
    for (auto& d : e.shape) {
      if (!(ls >> d) || d == 0) throw fail("bad dimension in: " + line);
    }
    if (!(ls >> e.offset)) throw fail("missing offset in: " + line);
    entries.push_back(std::move(e));
  }
  std::size_t payload_size = 0;
  {
    if (!std::getline(in, line)) throw fail("missing payload line");
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key >> payload_size) || key != "payload") throw fail("bad 'payload' line");
  }
  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (payload.size() != payload_size) {
    throw fail("payload has " + std::to_string(payload.size()) + " bytes, manifest says " +
               std::to_string(payload_size));
  }

  TensorMap out;
  const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());
  for (const Entry& e : entries) {
    const std::size_t n = shape_size(e.shape);
    if (e.offset + n * 8 > payload_size) throw fail("tensor '" + e.name + "' overruns payload");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = read_f64_le(bytes + e.offset + 8 * i);
    if (!out.emplace(e.name, Tensor(e.shape, std::move(data))).second) {
      throw fail("duplicate tensor '" + e.name + "'");
    }
  }
  return out;
}

}  // namespace dnl
