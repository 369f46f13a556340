#include "spine3d/io.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace spine3d {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw IoError("invalid number for " + what + ": '" + text + "'");
  }
}

long long parse_int(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  long long v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw IoError("invalid integer for " + what + ": '" + text + "'");
  return v;
}

std::string fixed(double v, int decimals) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(decimals) << v;
  std::string s = ss.str();
  // Avoid "-0.0000" so equal values always serialize identically.
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw IoError("line " + std::to_string(lineno) + ": expected key=value, got '" + t + "'");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  return parse_key_values(read_text(path));
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

void write_key_values(const std::filesystem::path& path, const KeyValues& kv) {
  write_text(path, format_key_values(kv));
}

void write_volume(const std::filesystem::path& path, const VoxelMask& mask) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << mask.nz << ' ' << mask.nx << ' ' << mask.ny << ' ' << format_double(mask.voxel_size_mm) << '\n';
  std::vector<char> bits((mask.data.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    if (mask.data[i]) bits[i / 8] = static_cast<char>(bits[i / 8] | (1u << (i % 8)));
  out.write(bits.data(), static_cast<std::streamsize>(bits.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

VoxelMask read_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  int z = 0, x = 0, y = 0;
  double mm = 0.0;
  if (!(hs >> z >> x >> y >> mm) || z <= 0 || x <= 0 || y <= 0 || !(mm > 0.0))
    throw IoError("bad volume header in " + path.string());
  VoxelMask mask(z, x, y, mm);
  std::vector<char> bits((mask.data.size() + 7) / 8);
  in.read(bits.data(), static_cast<std::streamsize>(bits.size()));
  if (in.gcount() != static_cast<std::streamsize>(bits.size()))
    throw IoError("truncated volume payload in " + path.string());
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    mask.data[i] = (static_cast<unsigned char>(bits[i / 8]) >> (i % 8)) & 1u;
  return mask;
}

void write_pgm(const std::filesystem::path& path, const Image2D& image, double scale) {
  if (!(scale > 0.0)) throw IoError("pgm scale must be positive");
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n# scale " << format_double(scale) << "\n" << image.cols << ' ' << image.rows << "\n65535\n";
  std::vector<unsigned char> buf(image.data.size() * 2);
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    const double q = std::clamp(std::round(image.data[i] * scale), 0.0, 65535.0);
    const auto v = static_cast<unsigned>(q);
    buf[2 * i] = static_cast<unsigned char>(v >> 8);  // PGM 16-bit samples are big-endian
    buf[2 * i + 1] = static_cast<unsigned char>(v & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Image2D read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  double scale = 1.0;
  std::vector<std::string> tokens;
  std::string line;
  while (tokens.size() < 4 && std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.rfind("# scale", 0) == 0) {
      scale = parse_double(t.substr(7), "pgm scale");
      continue;
    }
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ls(t);
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
  }
  if (tokens.size() != 4 || tokens[0] != "P5") throw IoError("not a P5 pgm: " + path.string());
  const int cols = static_cast<int>(parse_int(tokens[1], "pgm width"));
  const int rows = static_cast<int>(parse_int(tokens[2], "pgm height"));
  if (parse_int(tokens[3], "pgm maxval") != 65535) throw IoError("pgm maxval must be 65535");
  Image2D image(rows, cols);
  std::vector<unsigned char> buf(image.data.size() * 2);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw IoError("truncated pgm " + path.string());
  for (std::size_t i = 0; i < image.data.size(); ++i)
    image.data[i] = static_cast<double>((buf[2 * i] << 8) | buf[2 * i + 1]) / scale;
  return image;
}

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw IoError("missing CSV column '" + name + "'");
  return static_cast<int>(it - header.begin());
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (first) {
      table.header = std::move(cells);
      first = false;
      continue;
    }
    if (cells.size() != table.header.size())
      throw IoError("CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                    std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  if (first) throw IoError("empty CSV");
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  try {
    return parse_csv(read_text(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string format_csv(const CsvTable& table) {
  auto join = [](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += ',';
      s += cells[i];
    }
    return s + '\n';
  };
  std::string out = join(table.header);
  for (const auto& row : table.rows) out += join(row);
  return out;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  write_text(path, format_csv(table));
}

}  // namespace spine3d
