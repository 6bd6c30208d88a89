#include "epc/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "epc/error.hpp"
#include "epc/rng.hpp"

namespace epc {

namespace {

constexpr char kMagic[4] = {'E', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t k) {
    if (pos_ + k > bytes_.size()) {
      fail(ErrorKind::kLength, "truncated EPCK checkpoint at byte " + std::to_string(pos_) +
                                   " (file has " + std::to_string(bytes_.size()) + " bytes)");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t MlpParams::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(num_params());
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.weight.data().begin(), l.weight.data().end());
    flat.insert(flat.end(), l.bias.data().begin(), l.bias.data().end());
  }
  return flat;
}

MlpParams MlpParams::with_values(std::span<const double> flat) const {
  if (flat.size() != num_params()) {
    fail(ErrorKind::kShape, "parameter vector has " + std::to_string(flat.size()) +
                                " values, model has " + std::to_string(num_params()));
  }
  MlpParams out = *this;
  std::size_t off = 0;
  for (auto& l : out.layers) {
    for (double& v : l.weight.data()) v = flat[off++];
    for (double& v : l.bias.data()) v = flat[off++];
  }
  return out;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams out;
  for (const auto& l : layers) {
    out.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()), Matrix(1, l.bias.cols())});
  }
  return out;
}

MlpParams encoder_init(std::size_t d_in, std::size_t hidden, std::size_t c_out,
                       std::uint64_t seed) {
  if (d_in < 1 || hidden < 1 || c_out < 1) {
    fail(ErrorKind::kInvalidArgument, "encoder_init: all dimensions must be >= 1");
  }
  Rng rng = Rng(seed).substream("encoder_init");
  const std::size_t dims[4] = {d_in, hidden, hidden, c_out};
  MlpParams p;
  for (int l = 0; l < 3; ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[l]));
    Matrix w(dims[l], dims[l + 1]);
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    p.layers.push_back({std::move(w), Matrix(1, dims[l + 1])});
  }
  return p;
}

Matrix encoder_features(const PointCloud& cloud) {
  cloud.validate();
  const std::size_t n = cloud.size();
  const Matrix c = centroid(cloud.positions);
  double extent = 0.0;
  for (int k = 0; k < 3; ++k) {
    double lo = cloud.positions(0, k), hi = lo;
    for (std::size_t i = 1; i < n; ++i) {
      lo = std::min(lo, cloud.positions(i, k));
      hi = std::max(hi, cloud.positions(i, k));
    }
    extent = std::max(extent, hi - lo);
  }
  if (extent <= 0.0) extent = 1.0;
  const Matrix mean_rgb = centroid(cloud.colors);

  Matrix x(n, kEncoderInputDim);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      x(i, k) = (cloud.positions(i, k) - c(0, k)) / extent;
      x(i, 3 + k) = cloud.colors(i, k);
      x(i, 6 + k) = mean_rgb(0, k);
    }
  }
  return x;
}

Matrix mlp_forward(const MlpParams& params, const Matrix& input, ForwardCache* cache) {
  if (params.layers.empty()) fail(ErrorKind::kShape, "encoder has no layers");
  if (input.cols() != params.input_dim()) {
    fail(ErrorKind::kShape, "encoder input has " + std::to_string(input.cols()) +
                                " features, model expects " + std::to_string(params.input_dim()));
  }
  if (cache) {
    cache->input = input;
    cache->pre_activations.clear();
    cache->activations.clear();
  }
  Matrix h = input;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Matrix z = matmul_nn(h, layer.weight);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto row = z.row(i);
      for (std::size_t k = 0; k < row.size(); ++k) row[k] += layer.bias(0, k);
    }
    if (l + 1 == params.layers.size()) {
      if (cache) cache->pre_activations.push_back(z);
      return z;
    }
    Matrix a = z;
    for (double& v : a.data()) v = std::max(v, 0.0);
    if (cache) {
      cache->pre_activations.push_back(std::move(z));
      cache->activations.push_back(a);
    }
    h = std::move(a);
  }
  return h;
}

Matrix encoder_forward(const MlpParams& params, const PointCloud& cloud, ForwardCache* cache) {
  return mlp_forward(params, encoder_features(cloud), cache);
}

MlpParams encoder_backward(const MlpParams& params, const ForwardCache& cache,
                           const Matrix& grad_embedding) {
  const std::size_t layers = params.layers.size();
  if (cache.pre_activations.size() != layers || cache.activations.size() + 1 != layers) {
    fail(ErrorKind::kCache, "forward cache does not match the model's layer count");
  }
  const Matrix& out = cache.pre_activations.back();
  if (out.rows() != grad_embedding.rows() || out.cols() != grad_embedding.cols() ||
      cache.input.cols() != params.input_dim() || out.cols() != params.output_dim()) {
    fail(ErrorKind::kCache, "stale forward cache: cached output " + out.shape_string() +
                                ", upstream gradient " + grad_embedding.shape_string());
  }

  MlpParams grads = params.zeros_like();
  Matrix delta = grad_embedding;  // d loss / d pre-activation of the current layer
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& layer_in = l == 0 ? cache.input : cache.activations[l - 1];
    grads.layers[l].weight = matmul_tn(layer_in, delta);
    auto& db = grads.layers[l].bias;
    for (std::size_t i = 0; i < delta.rows(); ++i)
      for (std::size_t k = 0; k < delta.cols(); ++k) db(0, k) += delta(i, k);
    if (l == 0) break;
    Matrix up = matmul_nt(delta, params.layers[l].weight);
    const Matrix& z = cache.pre_activations[l - 1];
    auto u = up.data();
    auto zs = z.data();
    for (std::size_t i = 0; i < u.size(); ++i)
      if (!(zs[i] > 0.0)) u[i] = 0.0;
    delta = std::move(up);
  }
  return grads;
}

std::vector<std::uint8_t> encode_checkpoint(const MlpParams& params) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& l : params.layers) {
    put_u32(out, static_cast<std::uint32_t>(l.weight.rows()));
    put_u32(out, static_cast<std::uint32_t>(l.weight.cols()));
    for (double v : l.weight.data()) put_f64(out, v);
    for (double v : l.bias.data()) put_f64(out, v);
  }
  return out;
}

MlpParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::kFormat, "bad magic: not an EPCK checkpoint");
  }
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kVersion) fail(ErrorKind::kFormat, "unsupported EPCK version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  if (count == 0) fail(ErrorKind::kFormat, "EPCK checkpoint has no layers");
  MlpParams p;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint32_t in = r.u32(), out = r.u32();
    if (l > 0 && in != p.layers.back().weight.cols()) {
      fail(ErrorKind::kFormat, "EPCK layer " + std::to_string(l) + " does not chain");
    }
    std::vector<double> w(static_cast<std::size_t>(in) * out), b(out);
    for (double& v : w) v = r.f64();
    for (double& v : b) v = r.f64();
    p.layers.push_back({Matrix(in, out, std::move(w)), Matrix(1, out, std::move(b))});
  }
  if (!r.done()) fail(ErrorKind::kLength, "EPCK checkpoint has trailing bytes");
  return p;
}

void save_checkpoint(const MlpParams& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

std::uint64_t checkpoint_hash(const MlpParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : encode_checkpoint(params)) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace epc
