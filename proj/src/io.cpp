#include "querydet/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "querydet/errors.hpp"
#include "querydet/hash.hpp"

namespace qd::io {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "fixture I/O assumes a little-endian host");

namespace {

void write_header(std::ostream& os, const char (&magic)[8], const json& header) {
  const std::string text = header.dump();
  const auto len = static_cast<std::uint32_t>(text.size());
  os.write(magic, 8);
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
}

json read_header(std::istream& is, const char (&magic)[8], const char* what) {
  char got[8];
  if (!is.read(got, 8) || std::memcmp(got, magic, 8) != 0)
    throw FormatError(std::string(what) + ": bad magic");
  std::uint32_t len = 0;
  if (!is.read(reinterpret_cast<char*>(&len), sizeof(len)))
    throw FormatError(std::string(what) + ": truncated header length");
  if (len > (64u << 20)) throw FormatError(std::string(what) + ": implausible header length");
  std::string text(len, '\0');
  if (!is.read(text.data(), len)) throw FormatError(std::string(what) + ": truncated header");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + ": header is not valid JSON: " + e.what());
  }
}

void write_floats(std::ostream& os, const std::vector<float>& v) {
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

bool read_floats(std::istream& is, std::vector<float>& v) {
  return static_cast<bool>(
      is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float))));
}

template <typename T>
T field(const json& j, const char* key, const char* what) {
  if (!j.contains(key)) throw FormatError(std::string(what) + ": header missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string(what) + ": header field \"" + key + "\" has the wrong type");
  }
}

void expect_eof(std::istream& is, const char* what) {
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError(std::string(what) + ": trailing bytes after payload");
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return is;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

void write_tensor(std::ostream& os, const DenseTensor& t) {
  write_header(os, kTensorMagic, json{{"dtype", "f32"}, {"shape", {t.channels, t.height, t.width}}});
  write_floats(os, t.values);
}

DenseTensor read_tensor(std::istream& is) {
  const json h = read_header(is, kTensorMagic, "QDT1");
  if (field<std::string>(h, "dtype", "QDT1") != "f32") throw FormatError("QDT1: dtype must be f32");
  const auto shape = field<std::vector<int>>(h, "shape", "QDT1");
  if (shape.size() != 3 || shape[0] < 0 || shape[1] < 0 || shape[2] < 0)
    throw FormatError("QDT1: shape must be [C,H,W]");
  std::vector<float> v(static_cast<std::size_t>(shape[0]) * shape[1] * shape[2]);
  if (!read_floats(is, v)) throw FormatError("QDT1: truncated payload");
  return DenseTensor(shape[0], shape[1], shape[2], std::move(v));
}

void save_tensor(const DenseTensor& t, const std::filesystem::path& path) {
  auto os = open_out(path);
  write_tensor(os, t);
  finish(os, path);
}

DenseTensor load_tensor(const std::filesystem::path& path) {
  auto is = open_in(path);
  DenseTensor t = read_tensor(is);
  expect_eof(is, "QDT1");
  return t;
}

void write_pyramid(std::ostream& os, const FeaturePyramid& pyr) {
  json levels = json::array();
  for (const auto& [l, t] : pyr.levels)
    levels.push_back({{"l", l}, {"shape", {t.channels, t.height, t.width}}});
  write_header(os, kPyramidMagic,
               json{{"image", {pyr.image_height, pyr.image_width}},
                    {"channels", pyr.channels},
                    {"levels", levels}});
  for (const auto& [l, t] : pyr.levels) write_floats(os, t.values);
}

FeaturePyramid read_pyramid(std::istream& is) {
  const json h = read_header(is, kPyramidMagic, "QDPYR1");
  FeaturePyramid pyr;
  const auto image = field<std::vector<int>>(h, "image", "QDPYR1");
  if (image.size() != 2 || image[0] <= 0 || image[1] <= 0) throw FormatError("QDPYR1: image must be [H,W]");
  pyr.image_height = image[0];
  pyr.image_width = image[1];
  pyr.channels = field<int>(h, "channels", "QDPYR1");
  if (pyr.channels <= 0) throw FormatError("QDPYR1: channels must be positive");
  const json levels = field<json>(h, "levels", "QDPYR1");
  if (!levels.is_array() || levels.empty()) throw FormatError("QDPYR1: levels must be a non-empty array");

  std::vector<std::pair<int, std::vector<int>>> manifest;
  for (const json& entry : levels) {
    const int l = field<int>(entry, "l", "QDPYR1");
    const auto shape = field<std::vector<int>>(entry, "shape", "QDPYR1");
    if (l < kMinPyramidLevel || l > kMaxPyramidLevel)
      throw FormatError("QDPYR1: level " + std::to_string(l) + " outside [2, 7]");
    if (shape.size() != 3 || shape[0] != pyr.channels || shape[1] != level_dim(pyr.image_height, l) ||
        shape[2] != level_dim(pyr.image_width, l))
      throw FormatError("QDPYR1: level " + std::to_string(l) + " shape does not match the image dims");
    manifest.emplace_back(l, shape);
  }
  for (const auto& [l, shape] : manifest) {
    std::vector<float> v(static_cast<std::size_t>(shape[0]) * shape[1] * shape[2]);
    if (!read_floats(is, v)) throw FormatError("QDPYR1: level " + std::to_string(l) + " missing from payload");
    if (!pyr.levels.emplace(l, DenseTensor(shape[0], shape[1], shape[2], std::move(v))).second)
      throw FormatError("QDPYR1: level " + std::to_string(l) + " listed twice");
  }
  return pyr;
}

void save_pyramid(const FeaturePyramid& pyr, const std::filesystem::path& path) {
  auto os = open_out(path);
  write_pyramid(os, pyr);
  finish(os, path);
}

FeaturePyramid load_pyramid(const std::filesystem::path& path) {
  auto is = open_in(path);
  FeaturePyramid pyr = read_pyramid(is);
  expect_eof(is, "QDPYR1");
  return pyr;
}

void write_weights(std::ostream& os, const HeadWeights& w) {
  json convs = json::array();
  for (const auto& [role, conv] : w.roles())
    convs.push_back({{"role", role},
                     {"shape", {conv->out_channels, conv->in_channels, conv->kernel, conv->kernel}}});
  write_header(os, kWeightsMagic,
               json{{"channels", w.channels},
                    {"num_anchors", w.num_anchors},
                    {"num_classes", w.num_classes},
                    {"convs", convs}});
  for (const auto& [role, conv] : w.roles()) {
    write_floats(os, conv->weights);
    write_floats(os, conv->bias);
  }
}

HeadWeights read_weights(std::istream& is) {
  const json h = read_header(is, kWeightsMagic, "QDWTS1");
  HeadWeights w;
  w.channels = field<int>(h, "channels", "QDWTS1");
  w.num_anchors = field<int>(h, "num_anchors", "QDWTS1");
  w.num_classes = field<int>(h, "num_classes", "QDWTS1");
  if (w.channels <= 0 || w.num_anchors <= 0 || w.num_classes <= 0)
    throw FormatError("QDWTS1: head dims must be positive");
  const json convs = field<json>(h, "convs", "QDWTS1");
  auto roles = w.roles();
  if (!convs.is_array() || convs.size() != roles.size())
    throw FormatError("QDWTS1: expected " + std::to_string(roles.size()) + " convs");
  for (std::size_t i = 0; i < roles.size(); ++i) {
    const auto role = field<std::string>(convs[i], "role", "QDWTS1");
    const auto shape = field<std::vector<int>>(convs[i], "shape", "QDWTS1");
    if (role != roles[i].first) throw FormatError("QDWTS1: expected role " + roles[i].first + ", got " + role);
    if (shape.size() != 4 || shape[2] != shape[3] || (shape[2] != 1 && shape[2] != 3) || shape[0] <= 0 ||
        shape[1] <= 0)
      throw FormatError("QDWTS1: bad shape for " + role);
    *roles[i].second = ConvWeights(shape[0], shape[1], shape[2]);
  }
  for (const auto& [role, conv] : roles)
    if (!read_floats(is, conv->weights) || !read_floats(is, conv->bias))
      throw FormatError("QDWTS1: " + role + " missing from payload");
  try {
    w.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("QDWTS1: ") + e.what());
  }
  return w;
}

void save_weights(const HeadWeights& w, const std::filesystem::path& path) {
  auto os = open_out(path);
  write_weights(os, w);
  finish(os, path);
}

HeadWeights load_weights(const std::filesystem::path& path) {
  auto is = open_in(path);
  HeadWeights w = read_weights(is);
  expect_eof(is, "QDWTS1");
  return w;
}

std::string file_checksum(const std::filesystem::path& path) {
  auto is = open_in(path);
  Fnv1a h;
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(std::as_bytes(std::span(buf.data(), static_cast<std::size_t>(is.gcount()))));
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h.digest();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto os = open_out(path);
  os << text;
  finish(os, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace qd::io
