#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "jova/common.hpp"

namespace jova {

/// One named tensor in a container file. Values are held as double in
/// memory; `dtype` ("f32" or "f64") controls the serialized width.
struct NamedArray {
  std::string name;
  std::string dtype = "f32";
  std::vector<int> shape;
  std::vector<double> data;
  std::map<std::string, std::string> attrs;

  std::size_t element_count() const;
};

/// Container layout shared by checkpoints (JOVA-CKPT v1) and feature caches
/// (JOVA-FEAT v1): magic line, plain-text key=value manifest (meta lines,
/// then one line per array with name/dtype/shape/offset), `end`, then the
/// raw little-endian arrays concatenated in manifest order.
struct ArrayFile {
  std::string magic;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<NamedArray> arrays;

  const std::string* find_meta(const std::string& key) const;
};

void write_array_file(const std::string& path, const ArrayFile& file);
ArrayFile read_array_file(const std::string& path,
                          const std::string& expected_magic);

inline constexpr const char* kCheckpointMagic = "JOVA-CKPT v1";
inline constexpr const char* kFeatureCacheMagic = "JOVA-FEAT v1";

}  // namespace jova
