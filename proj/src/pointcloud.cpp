#include "epc/pointcloud.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "epc/error.hpp"

namespace epc {

namespace {

constexpr char kMagic[4] = {'E', 'P', 'C', 'C'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": cannot parse number '" +
                                std::string(tok) + "'");
  }
  return v;
}

std::uint32_t parse_label(std::string_view tok, std::size_t line_no) {
  std::uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    fail(ErrorKind::kParse, "line " + std::to_string(line_no) +
                                ": label must be a non-negative integer, got '" +
                                std::string(tok) + "'");
  }
  return v;
}

}  // namespace

void PointCloud::validate() const {
  if (positions.cols() != 3 || colors.cols() != 3) {
    fail(ErrorKind::kShape, "point cloud positions and colors must have 3 columns");
  }
  if (positions.rows() != colors.rows()) {
    fail(ErrorKind::kShape, "positions have " + std::to_string(positions.rows()) +
                                " rows but colors have " + std::to_string(colors.rows()));
  }
  if (positions.rows() == 0) fail(ErrorKind::kShape, "point cloud is empty");
  for (double c : colors.data()) {
    if (!(c >= 0.0 && c <= 1.0)) {
      fail(ErrorKind::kRange, "color component " + std::to_string(c) + " outside [0,1]");
    }
  }
  if (labels && labels->size() != positions.rows()) {
    fail(ErrorKind::kShape, "label count does not match point count");
  }
}

void AugmentParams::validate() const {
  if (!(scale_min > 0.0 && scale_min <= scale_max)) {
    fail(ErrorKind::kInvalidArgument, "augment: require 0 < scale_min <= scale_max");
  }
  if (!(jitter_sigma >= 0.0 && jitter_sigma <= jitter_clip)) {
    fail(ErrorKind::kInvalidArgument, "augment: require 0 <= jitter_sigma <= jitter_clip");
  }
  if (!(rot_max >= 0.0)) fail(ErrorKind::kInvalidArgument, "augment: rot_max must be >= 0");
}

AugmentParams AugmentParams::identity() {
  AugmentParams p;
  p.scale_min = p.scale_max = 1.0;
  p.rot_max = 0.0;
  p.jitter_sigma = 0.0;
  p.jitter_clip = 0.0;
  return p;
}

PointCloud load_ascii(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());

  std::vector<double> pos, col;
  std::vector<std::uint32_t> labels;
  std::optional<bool> labeled;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty() || toks[0].front() == '#') continue;
    if (toks.size() != 6 && toks.size() != 7) {
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": expected 6 or 7 fields, got " +
                                  std::to_string(toks.size()));
    }
    const bool has_label = toks.size() == 7;
    if (labeled && *labeled != has_label) {
      fail(ErrorKind::kFormat, "line " + std::to_string(line_no) +
                                   ": mixed labeled and unlabeled lines");
    }
    labeled = has_label;
    for (int k = 0; k < 3; ++k) pos.push_back(parse_double(toks[k], line_no));
    for (int k = 3; k < 6; ++k) {
      const double c = parse_double(toks[k], line_no);
      if (c < 0.0 || c > 1.0) {
        fail(ErrorKind::kRange, "line " + std::to_string(line_no) + ": color " +
                                    std::string(toks[k]) + " outside [0,1]");
      }
      col.push_back(c);
    }
    if (has_label) labels.push_back(parse_label(toks[6], line_no));
  }
  if (pos.empty()) fail(ErrorKind::kFormat, path.string() + ": no points");

  PointCloud cloud;
  const std::size_t n = pos.size() / 3;
  cloud.positions = Matrix(n, 3, std::move(pos));
  cloud.colors = Matrix(n, 3, std::move(col));
  if (labeled.value_or(false)) cloud.labels = std::move(labels);
  return cloud;
}

void save_ascii(const PointCloud& cloud, const std::filesystem::path& path) {
  cloud.validate();
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  char buf[64];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g ", cloud.positions(i, k));
      out << buf;
    }
    for (int k = 0; k < 3; ++k) {
      std::snprintf(buf, sizeof buf, k == 2 ? "%.17g" : "%.17g ", cloud.colors(i, k));
      out << buf;
    }
    if (cloud.labels) out << ' ' << (*cloud.labels)[i];
    out << '\n';
  }
}

std::vector<std::uint8_t> encode_binary(const PointCloud& cloud) {
  cloud.validate();
  const std::size_t n = cloud.size();
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + n * 24 + (cloud.labels ? n * 4 : 0));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kVersion);
  put_u64(out, n);
  out.push_back(cloud.labels ? 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k)
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(cloud.positions(i, k))));
    for (int k = 0; k < 3; ++k)
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(cloud.colors(i, k))));
  }
  if (cloud.labels)
    for (std::uint32_t l : *cloud.labels) put_u32(out, l);
  return out;
}

PointCloud decode_binary(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::kFormat, "bad magic: not an EPCC file");
  }
  if (bytes.size() < kHeaderBytes) {
    fail(ErrorKind::kLength, "truncated header: expected at least " +
                                 std::to_string(kHeaderBytes) + " bytes, got " +
                                 std::to_string(bytes.size()));
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kVersion) {
    fail(ErrorKind::kFormat, "unsupported EPCC version " + std::to_string(version));
  }
  const std::uint64_t n = get_u64(bytes.data() + 8);
  const std::uint8_t has_labels = bytes[16];
  if (has_labels > 1) fail(ErrorKind::kFormat, "has_labels byte must be 0 or 1");
  if (n == 0) fail(ErrorKind::kFormat, "EPCC file declares zero points");
  if (n > bytes.size()) {
    fail(ErrorKind::kLength, "EPCC header declares " + std::to_string(n) + " points but the file has " +
                                 std::to_string(bytes.size()) + " bytes");
  }
  const std::uint64_t expected = kHeaderBytes + n * 24 + (has_labels ? n * 4 : 0);
  if (bytes.size() != expected) {
    fail(ErrorKind::kLength, "EPCC payload length mismatch: expected " +
                                 std::to_string(expected) + " bytes, got " +
                                 std::to_string(bytes.size()));
  }
  std::vector<double> pos(n * 3), col(n * 3);
  const std::uint8_t* p = bytes.data() + kHeaderBytes;
  for (std::uint64_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k, p += 4) pos[i * 3 + k] = std::bit_cast<float>(get_u32(p));
    for (int k = 0; k < 3; ++k, p += 4) col[i * 3 + k] = std::bit_cast<float>(get_u32(p));
  }
  PointCloud cloud;
  cloud.positions = Matrix(n, 3, std::move(pos));
  cloud.colors = Matrix(n, 3, std::move(col));
  if (has_labels) {
    std::vector<std::uint32_t> labels(n);
    for (std::uint64_t i = 0; i < n; ++i, p += 4) labels[i] = get_u32(p);
    cloud.labels = std::move(labels);
  }
  cloud.validate();
  return cloud;
}

PointCloud load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_binary(bytes);
}

void save_binary(const PointCloud& cloud, const std::filesystem::path& path) {
  const auto bytes = encode_binary(cloud);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

PointCloud load_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  char head[4] = {};
  in.read(head, 4);
  if (in.gcount() == 4 && std::memcmp(head, kMagic, 4) == 0) return load_binary(path);
  return load_ascii(path);
}

Matrix centroid(const Matrix& positions) {
  Matrix c(1, positions.cols());
  for (std::size_t i = 0; i < positions.rows(); ++i)
    for (std::size_t k = 0; k < positions.cols(); ++k) c(0, k) += positions(i, k);
  for (double& v : c.data()) v /= static_cast<double>(positions.rows());
  return c;
}

PointCloud augment(const PointCloud& cloud, const AugmentParams& params, Rng& stream) {
  cloud.validate();
  params.validate();
  const double s = stream.uniform(params.scale_min, params.scale_max);
  const double theta = params.rot_max > 0.0 ? stream.uniform(0.0, params.rot_max) : 0.0;
  const double ct = std::cos(theta), st = std::sin(theta);

  // Rotation plane: the two axes other than rot_axis, in cyclic order.
  const int ax = static_cast<int>(params.rot_axis);
  const int u = (ax + 1) % 3, v = (ax + 2) % 3;

  const Matrix c = centroid(cloud.positions);
  PointCloud out = cloud;
  // An identity transform copies positions exactly instead of round-tripping
  // them through the centroid.
  const bool rigid_identity = s == 1.0 && theta == 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!rigid_identity) {
      double d[3];
      for (int k = 0; k < 3; ++k) d[k] = s * (cloud.positions(i, k) - c(0, k));
      const double du = ct * d[u] - st * d[v];
      const double dv = st * d[u] + ct * d[v];
      d[u] = du;
      d[v] = dv;
      for (int k = 0; k < 3; ++k) out.positions(i, k) = c(0, k) + d[k];
    }
    if (params.jitter_sigma > 0.0) {
      for (int k = 0; k < 3; ++k) {
        out.positions(i, k) += std::clamp(params.jitter_sigma * stream.normal(),
                                          -params.jitter_clip, params.jitter_clip);
      }
    }
  }
  return out;
}

ViewPair make_view_pair(const PointCloud& cloud, const AugmentParams& params,
                        std::uint64_t seed) {
  const Rng root(seed);
  Rng s1 = root.substream(std::uint64_t{1});
  Rng s2 = root.substream(std::uint64_t{2});
  ViewPair pair;
  pair.view1 = augment(cloud, params, s1);
  pair.view2 = augment(cloud, params, s2);
  return pair;
}

}  // namespace epc
