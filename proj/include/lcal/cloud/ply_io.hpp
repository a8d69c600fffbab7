#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <lcal/cloud/point_cloud.hpp>
#include <lcal/error.hpp>

namespace lcal {

static_assert(std::endian::native == std::endian::little, "PLY binary I/O assumes a little-endian host");

struct CloudLoadResult {
  PointCloud cloud;
  std::size_t dropped_non_finite = 0;
};

namespace ply_detail {

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

inline std::optional<ScalarType> parse_scalar_type(const std::string& name) {
  if (name == "char" || name == "int8") return ScalarType::Int8;
  if (name == "uchar" || name == "uint8") return ScalarType::UInt8;
  if (name == "short" || name == "int16") return ScalarType::Int16;
  if (name == "ushort" || name == "uint16") return ScalarType::UInt16;
  if (name == "int" || name == "int32") return ScalarType::Int32;
  if (name == "uint" || name == "uint32") return ScalarType::UInt32;
  if (name == "float" || name == "float32") return ScalarType::Float32;
  if (name == "double" || name == "float64") return ScalarType::Float64;
  return std::nullopt;
}

inline std::size_t scalar_size(ScalarType type) {
  switch (type) {
    case ScalarType::Int8:
    case ScalarType::UInt8:
      return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16:
      return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32:
      return 4;
    case ScalarType::Float64:
      return 8;
  }
  return 0;
}

template <typename T>
double read_as(const char* data) {
  T value;
  std::memcpy(&value, data, sizeof(T));
  return static_cast<double>(value);
}

inline double decode_scalar(ScalarType type, const char* data) {
  switch (type) {
    case ScalarType::Int8:
      return read_as<std::int8_t>(data);
    case ScalarType::UInt8:
      return read_as<std::uint8_t>(data);
    case ScalarType::Int16:
      return read_as<std::int16_t>(data);
    case ScalarType::UInt16:
      return read_as<std::uint16_t>(data);
    case ScalarType::Int32:
      return read_as<std::int32_t>(data);
    case ScalarType::UInt32:
      return read_as<std::uint32_t>(data);
    case ScalarType::Float32:
      return read_as<float>(data);
    case ScalarType::Float64:
      return read_as<double>(data);
  }
  return 0.0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::Float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::UInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

struct Header {
  enum class Format { Ascii, BinaryLittleEndian } format = Format::Ascii;
  std::vector<Element> elements;
};

inline Header parse_header(std::istream& is, const std::string& path) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("ply", 0) != 0) {
    throw FormatError(path + ": missing \"ply\" magic");
  }

  Header header;
  bool has_format = false;
  int line_no = 1;
  while (std::getline(is, line)) {
    line_no++;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    std::istringstream sst(line);
    std::string keyword;
    sst >> keyword;
    const auto fail = [&](const std::string& what) { return FormatError(path + ":" + std::to_string(line_no) + ": " + what + " in \"" + line + "\""); };

    if (keyword == "format") {
      std::string format;
      sst >> format;
      if (format == "ascii") {
        header.format = Header::Format::Ascii;
      } else if (format == "binary_little_endian") {
        header.format = Header::Format::BinaryLittleEndian;
      } else {
        throw fail("unsupported format");
      }
      has_format = true;
    } else if (keyword == "element") {
      Element element;
      long long count = -1;
      sst >> element.name >> count;
      if (!sst || count < 0) {
        throw fail("malformed element");
      }
      element.count = static_cast<std::size_t>(count);
      header.elements.push_back(element);
    } else if (keyword == "property") {
      if (header.elements.empty()) {
        throw fail("property before any element");
      }
      Property property;
      std::string type;
      sst >> type;
      if (type == "list") {
        std::string count_type, item_type;
        sst >> count_type >> item_type >> property.name;
        const auto ct = parse_scalar_type(count_type);
        const auto it = parse_scalar_type(item_type);
        if (!ct || !it) {
          throw fail("unknown list type");
        }
        property.is_list = true;
        property.count_type = *ct;
        property.type = *it;
      } else {
        const auto t = parse_scalar_type(type);
        sst >> property.name;
        if (!t) {
          throw fail("unknown property type");
        }
        property.type = *t;
      }
      if (property.name.empty()) {
        throw fail("unnamed property");
      }
      header.elements.back().properties.push_back(property);
    } else if (keyword == "end_header") {
      if (!has_format) {
        throw FormatError(path + ": missing format line");
      }
      return header;
    } else if (keyword == "comment" || keyword == "obj_info" || keyword.empty()) {
      continue;
    } else {
      throw fail("unknown header keyword");
    }
  }
  throw FormatError(path + ": missing end_header");
}

inline int find_property(const Element& element, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    for (std::size_t i = 0; i < element.properties.size(); i++) {
      if (!element.properties[i].is_list && element.properties[i].name == name) {
        return static_cast<int>(i);
      }
    }
  }
  return -1;
}

/// Reads all scalar values of one element instance. List properties are skipped (value = NaN).
inline bool read_row(std::istream& is, Header::Format format, const Element& element, std::vector<double>& row) {
  row.assign(element.properties.size(), std::numeric_limits<double>::quiet_NaN());
  char buffer[8];
  for (std::size_t i = 0; i < element.properties.size(); i++) {
    const auto& property = element.properties[i];
    if (format == Header::Format::Ascii) {
      if (property.is_list) {
        double count = 0;
        if (!(is >> count)) return false;
        for (long long k = 0; k < static_cast<long long>(count); k++) {
          std::string skip;
          if (!(is >> skip)) return false;
        }
      } else {
        std::string token;
        if (!(is >> token)) return false;
        // stod handles nan/inf tokens, stream extraction does not
        try {
          row[i] = std::stod(token);
        } catch (const std::exception&) {
          return false;
        }
      }
    } else {
      if (property.is_list) {
        const std::size_t csize = scalar_size(property.count_type);
        if (!is.read(buffer, csize)) return false;
        const auto count = static_cast<std::size_t>(decode_scalar(property.count_type, buffer));
        is.ignore(static_cast<std::streamsize>(count * scalar_size(property.type)));
        if (!is) return false;
      } else {
        const std::size_t size = scalar_size(property.type);
        if (!is.read(buffer, size)) return false;
        row[i] = decode_scalar(property.type, buffer);
      }
    }
  }
  return true;
}

inline void normalize_min_max(std::vector<double>& values) {
  if (values.empty()) {
    return;
  }
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  const double min = *min_it;
  const double range = *max_it - min;
  for (double& v : values) {
    v = range > 0.0 ? (v - min) / range : 0.0;
  }
}

}  // namespace ply_detail

/// Loads the "vertex" element of a PLY file (ascii or binary_little_endian).
///
/// Requires x, y, z. Intensity is read from "intensity" or "reflectivity" (zeros if absent)
/// and times from "time", "t" or "timestamp"; both are min-max normalized to [0, 1].
/// Points with a non-finite position, intensity or time are dropped and counted.
inline CloudLoadResult load_cloud(const std::string& path) {
  using namespace ply_detail;

  std::ifstream ifs(path, std::ios::binary);
  if (!ifs) {
    throw IoError("failed to open " + path);
  }

  const Header header = parse_header(ifs, path);

  CloudLoadResult result;
  PointCloud& cloud = result.cloud;
  bool found_vertex = false;
  std::vector<double> row;
  for (const auto& element : header.elements) {
    if (element.name != "vertex") {
      for (std::size_t i = 0; i < element.count; i++) {
        if (!read_row(ifs, header.format, element, row)) {
          throw FormatError(path + ": truncated element \"" + element.name + "\"");
        }
      }
      continue;
    }

    found_vertex = true;
    const int x = find_property(element, {"x"});
    const int y = find_property(element, {"y"});
    const int z = find_property(element, {"z"});
    if (x < 0 || y < 0 || z < 0) {
      throw FormatError(path + ": vertex element lacks x/y/z properties");
    }
    const int intensity = find_property(element, {"intensity", "reflectivity"});
    const int time = find_property(element, {"time", "t", "timestamp"});

    cloud.points.reserve(element.count);
    cloud.intensities.reserve(element.count);
    if (time >= 0) {
      cloud.times.emplace();
      cloud.times->reserve(element.count);
    }

    for (std::size_t i = 0; i < element.count; i++) {
      if (!read_row(ifs, header.format, element, row)) {
        throw FormatError(path + ": truncated vertex data at vertex " + std::to_string(i));
      }
      const Eigen::Vector3d p(row[x], row[y], row[z]);
      const double value = intensity >= 0 ? row[intensity] : 0.0;
      const double t = time >= 0 ? row[time] : 0.0;
      if (!p.allFinite() || !std::isfinite(value) || !std::isfinite(t)) {
        result.dropped_non_finite++;
        continue;
      }
      cloud.points.push_back(p);
      cloud.intensities.push_back(value);
      if (cloud.times) {
        cloud.times->push_back(t);
      }
    }
  }

  if (!found_vertex) {
    throw FormatError(path + ": no vertex element");
  }

  normalize_min_max(cloud.intensities);
  if (cloud.times) {
    normalize_min_max(*cloud.times);
  }
  return result;
}

/// Writes a cloud as PLY with double-precision x, y, z, intensity (and time).
inline void write_cloud(const std::string& path, const PointCloud& cloud, bool binary = true) {
  cloud.validate();
  std::ofstream ofs(path, std::ios::binary);
  if (!ofs) {
    throw IoError("failed to write " + path);
  }

  ofs << "ply\n";
  ofs << "format " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  ofs << "element vertex " << cloud.size() << "\n";
  ofs << "property double x\nproperty double y\nproperty double z\nproperty double intensity\n";
  if (cloud.times) {
    ofs << "property double time\n";
  }
  ofs << "end_header\n";

  if (binary) {
    std::vector<double> row;
    for (std::size_t i = 0; i < cloud.size(); i++) {
      row = {cloud.points[i].x(), cloud.points[i].y(), cloud.points[i].z(), cloud.intensities[i]};
      if (cloud.times) {
        row.push_back((*cloud.times)[i]);
      }
      ofs.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
  } else {
    ofs.precision(17);
    for (std::size_t i = 0; i < cloud.size(); i++) {
      ofs << cloud.points[i].x() << " " << cloud.points[i].y() << " " << cloud.points[i].z() << " " << cloud.intensities[i];
      if (cloud.times) {
        ofs << " " << (*cloud.times)[i];
      }
      ofs << "\n";
    }
  }

  if (!ofs) {
    throw IoError("failed to write " + path);
  }
}

}  // namespace lcal
