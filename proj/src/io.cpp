#include "jova/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace jova {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::size_t NamedArray::element_count() const {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

const std::string* ArrayFile::find_meta(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return &v;
  return nullptr;
}

namespace {

std::size_t dtype_width(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "f64") return 8;
  fail(ErrorCode::IoError, "unknown dtype '" + dtype + "'");
}

void append_le32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void append_le64(std::string& out, std::uint64_t v) {
  append_le32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
  append_le32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t read_le32(const char* p) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(p[0])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(p[1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(p[2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(p[3])) << 24;
}

std::uint64_t read_le64(const char* p) {
  return static_cast<std::uint64_t>(read_le32(p)) |
         static_cast<std::uint64_t>(read_le32(p + 4)) << 32;
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s.empty() ? "1" : s;
}

std::vector<int> parse_shape(const std::string& s) {
  std::vector<int> shape;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t next = s.find('x', pos);
    if (next == std::string::npos) next = s.size();
    shape.push_back(std::stoi(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  return shape;
}

// key=value fields separated by tabs
std::map<std::string, std::string> parse_fields(const std::string& line,
                                                std::size_t from) {
  std::map<std::string, std::string> out;
  std::size_t pos = from;
  while (pos < line.size()) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) tab = line.size();
    std::string field = line.substr(pos, tab - pos);
    std::size_t eq = field.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::IoError, "malformed manifest field '" + field + "'");
    out[field.substr(0, eq)] = field.substr(eq + 1);
    pos = tab + 1;
  }
  return out;
}

}  // namespace

void write_array_file(const std::string& path, const ArrayFile& file) {
  std::string header = file.magic + "\n";
  for (const auto& [k, v] : file.meta) header += "meta\t" + k + "=" + v + "\n";

  std::string blob;
  for (const NamedArray& arr : file.arrays) {
    const std::size_t count = arr.element_count();
    if (count != arr.data.size())
      fail(ErrorCode::IoError, "array '" + arr.name + "' shape/data mismatch");
    std::ostringstream line;
    line << "tensor\tname=" << arr.name << "\tdtype=" << arr.dtype
         << "\tshape=" << shape_string(arr.shape) << "\toffset=" << blob.size();
    for (const auto& [k, v] : arr.attrs) line << "\t" << k << "=" << v;
    header += line.str() + "\n";
    if (arr.dtype == "f32") {
      for (double d : arr.data)
        append_le32(blob, std::bit_cast<std::uint32_t>(static_cast<float>(d)));
    } else if (arr.dtype == "f64") {
      for (double d : arr.data) append_le64(blob, std::bit_cast<std::uint64_t>(d));
    } else {
      fail(ErrorCode::IoError, "unknown dtype '" + arr.dtype + "'");
    }
  }
  header += "end\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) fail(ErrorCode::IoError, "write failed for '" + path + "'");
}

ArrayFile read_array_file(const std::string& path,
                          const std::string& expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  std::string contents((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());

  ArrayFile file;
  std::size_t pos = 0;
  auto next_line = [&]() {
    std::size_t nl = contents.find('\n', pos);
    if (nl == std::string::npos)
      fail(ErrorCode::IoError, "truncated header in '" + path + "'");
    std::string line = contents.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };

  file.magic = next_line();
  if (file.magic != expected_magic)
    fail(ErrorCode::IoError, "bad magic in '" + path + "': expected '" +
                                 expected_magic + "', got '" + file.magic + "'");

  struct Pending {
    NamedArray arr;
    std::size_t offset;
  };
  std::vector<Pending> pending;
  for (;;) {
    std::string line = next_line();
    if (line == "end") break;
    if (line.rfind("meta\t", 0) == 0) {
      std::string field = line.substr(5);
      std::size_t eq = field.find('=');
      if (eq == std::string::npos)
        fail(ErrorCode::IoError, "malformed meta line in '" + path + "'");
      file.meta.emplace_back(field.substr(0, eq), field.substr(eq + 1));
    } else if (line.rfind("tensor\t", 0) == 0) {
      auto fields = parse_fields(line, 7);
      Pending p;
      p.arr.name = fields.at("name");
      p.arr.dtype = fields.at("dtype");
      p.arr.shape = parse_shape(fields.at("shape"));
      p.offset = std::stoull(fields.at("offset"));
      for (const auto& [k, v] : fields) {
        if (k != "name" && k != "dtype" && k != "shape" && k != "offset")
          p.arr.attrs[k] = v;
      }
      pending.push_back(std::move(p));
    } else {
      fail(ErrorCode::IoError, "unexpected manifest line '" + line + "'");
    }
  }

  const char* blob = contents.data() + pos;
  const std::size_t blob_size = contents.size() - pos;
  for (Pending& p : pending) {
    const std::size_t count = p.arr.element_count();
    const std::size_t width = dtype_width(p.arr.dtype);
    if (p.offset + count * width > blob_size)
      fail(ErrorCode::IoError,
           "array '" + p.arr.name + "' extends past end of '" + path + "'");
    p.arr.data.resize(count);
    const char* src = blob + p.offset;
    if (p.arr.dtype == "f32") {
      for (std::size_t i = 0; i < count; ++i)
        p.arr.data[i] = std::bit_cast<float>(read_le32(src + i * 4));
    } else {
      for (std::size_t i = 0; i < count; ++i)
        p.arr.data[i] = std::bit_cast<double>(read_le64(src + i * 8));
    }
    file.arrays.push_back(std::move(p.arr));
  }
  return file;
}

}  // namespace jova
