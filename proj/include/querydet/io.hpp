#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "querydet/model.hpp"
#include "querydet/tensor.hpp"

namespace qd::io {

// Container layout shared by all formats: 8-byte magic, u32 little-endian
// header length, UTF-8 JSON header, raw little-endian f32 payload.
inline constexpr char kTensorMagic[8] = {'Q', 'D', 'T', 'E', 'N', 'S', '1', '\n'};
inline constexpr char kPyramidMagic[8] = {'Q', 'D', 'P', 'Y', 'R', '1', '\n', '\0'};
inline constexpr char kWeightsMagic[8] = {'Q', 'D', 'W', 'T', 'S', '1', '\n', '\0'};

void write_tensor(std::ostream& os, const DenseTensor& t);
DenseTensor read_tensor(std::istream& is);
void save_tensor(const DenseTensor& t, const std::filesystem::path& path);
DenseTensor load_tensor(const std::filesystem::path& path);

void write_pyramid(std::ostream& os, const FeaturePyramid& pyr);
FeaturePyramid read_pyramid(std::istream& is);
void save_pyramid(const FeaturePyramid& pyr, const std::filesystem::path& path);
FeaturePyramid load_pyramid(const std::filesystem::path& path);

void write_weights(std::ostream& os, const HeadWeights& w);
HeadWeights read_weights(std::istream& is);
void save_weights(const HeadWeights& w, const std::filesystem::path& path);
HeadWeights load_weights(const std::filesystem::path& path);

// FNV-1a over the raw file bytes, as a 16-digit hex string.
std::string file_checksum(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace qd::io
