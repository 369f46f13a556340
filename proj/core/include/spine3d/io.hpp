#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spine3d/grid.hpp"

namespace spine3d {

/// Raised for malformed files and failed reads/writes.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, std::string>;

/// `key=value` lines; blank lines and `#` comments ignored. Keys keep insertion-free
/// sorted order on write so files are byte-stable.
KeyValues read_key_values(const std::filesystem::path& path);
KeyValues parse_key_values(const std::string& text);
void write_key_values(const std::filesystem::path& path, const KeyValues& kv);
std::string format_key_values(const KeyValues& kv);

/// Shortest round-trippable decimal representation of a double.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);

/// Volume file: text header line `Z X Y voxel_size_mm`, then the occupancy as a
/// little-endian bitset (bit k of byte i holds voxel 8i+k, voxel order z, x, y).
void write_volume(const std::filesystem::path& path, const VoxelMask& mask);
VoxelMask read_volume(const std::filesystem::path& path);

/// Binary PGM (P5, maxval 65535). Intensities are stored as round(v * scale); the
/// scale is recorded in a `# scale <value>` header comment.
void write_pgm(const std::filesystem::path& path, const Image2D& image, double scale);
Image2D read_pgm(const std::filesystem::path& path);

/// Minimal CSV table with a header row; cells are kept as strings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // throws IoError when absent
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
std::string format_csv(const CsvTable& table);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Fixed-point formatting, e.g. fixed(1.23456, 4) == "1.2346".
std::string fixed(double v, int decimals);

}  // namespace spine3d
