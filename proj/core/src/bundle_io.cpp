#include "protofaith/bundle_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "protofaith/error.hpp"

namespace protofaith {

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < size; ++i) {
    crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  }
  return crc ^ 0xFFFFFFFFu;
}

namespace {

constexpr char kMagic[4] = {'P', 'X', 'E', 'B'};

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f32_array(const float* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) f32(data[i]);
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& buf, std::size_t begin, std::size_t end,
         const std::filesystem::path& path)
      : buf_(buf), pos_(begin), end_(end), path_(path) {}

  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void f32_array(float* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f32();
  }
  bool exhausted() const { return pos_ == end_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > end_) {
      throw IoError("bundle " + path_.string() + " truncated: payload shorter than declared");
    }
  }
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_;
  std::size_t end_;
  std::filesystem::path path_;
};

int checked_dim(std::uint32_t v, const char* what, const std::filesystem::path& path) {
  if (v > (1u << 24)) {
    throw IoError("bundle " + path.string() + ": implausible " + what);
  }
  return static_cast<int>(v);
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  bundle.validate();

  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kBundleVersion);
  w.u32(static_cast<std::uint32_t>(bundle.input_h));
  w.u32(static_cast<std::uint32_t>(bundle.input_w));

  w.u32(static_cast<std::uint32_t>(bundle.backbone.size()));
  for (const LayerSpec& layer : bundle.backbone) {
    switch (layer.kind) {
      case LayerKind::conv2d:
        w.u8(0);
        w.u32(static_cast<std::uint32_t>(layer.out_channels));
        w.u32(static_cast<std::uint32_t>(layer.in_channels));
        w.u32(static_cast<std::uint32_t>(layer.kernel_h));
        w.u32(static_cast<std::uint32_t>(layer.kernel_w));
        w.u32(static_cast<std::uint32_t>(layer.stride));
        w.u32(static_cast<std::uint32_t>(layer.padding));
        w.f32_array(layer.weights.data(), static_cast<std::size_t>(layer.weights.numel()));
        w.f32_array(layer.bias.data(), static_cast<std::size_t>(layer.bias.numel()));
        break;
      case LayerKind::relu:
        w.u8(1);
        break;
      case LayerKind::maxpool2d:
        w.u8(2);
        w.u32(static_cast<std::uint32_t>(layer.window));
        w.u32(static_cast<std::uint32_t>(layer.stride));
        break;
    }
  }

  w.u32(static_cast<std::uint32_t>(bundle.prototypes.count()));
  w.u32(static_cast<std::uint32_t>(bundle.prototypes.dimension));
  for (int i = 0; i < bundle.prototypes.count(); ++i) {
    const auto& vec = bundle.prototypes.vectors[static_cast<std::size_t>(i)];
    w.f32_array(vec.data(), vec.size());
    const auto& prov = i < static_cast<int>(bundle.prototypes.provenance.size())
                           ? bundle.prototypes.provenance[static_cast<std::size_t>(i)]
                           : std::optional<Provenance>{};
    w.u8(prov ? 1 : 0);
    if (prov) {
      w.u32(static_cast<std::uint32_t>(prov->image_id));
      w.u32(static_cast<std::uint32_t>(prov->h));
      w.u32(static_cast<std::uint32_t>(prov->w));
    }
  }

  w.u8(bundle.simfn.kind == SimilarityKind::log_ratio ? 0 : 1);
  w.f64(bundle.simfn.epsilon);

  w.u8(bundle.head ? 1 : 0);
  if (bundle.head) {
    w.u32(static_cast<std::uint32_t>(bundle.head->dim(0)));
    w.f32_array(bundle.head->data(), static_cast<std::size_t>(bundle.head->numel()));
  }

  w.u8(bundle.policy.kind == TargetPolicyKind::protopnet_top10 ? 0 : 1);
  w.f64(bundle.policy.theta);

  auto& bytes = w.bytes();
  const std::uint32_t checksum = crc32(bytes.data() + 4, bytes.size() - 4);
  Writer tail;
  tail.u32(checksum);
  bytes.insert(bytes.end(), tail.bytes().begin(), tail.bytes().end());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write bundle " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing bundle " + path.string());
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open bundle " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 12) throw IoError("bundle " + path.string() + " is too short");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError("bundle " + path.string() + " has bad magic (expected PXEB)");
  }
  const std::size_t payload_end = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) {
    stored |= static_cast<std::uint32_t>(bytes[payload_end + static_cast<std::size_t>(i)]) << (8 * i);
  }
  const std::uint32_t actual = crc32(bytes.data() + 4, payload_end - 4);
  if (stored != actual) {
    throw IoError("bundle " + path.string() + " checksum mismatch: file is corrupted");
  }

  Reader r(bytes, 4, payload_end, path);
  const std::uint32_t version = r.u32();
  if (version != kBundleVersion) {
    throw IoError("bundle " + path.string() + " has unsupported version " +
                  std::to_string(version));
  }

  ModelBundle bundle;
  bundle.input_h = checked_dim(r.u32(), "input height", path);
  bundle.input_w = checked_dim(r.u32(), "input width", path);

  const int layer_count = checked_dim(r.u32(), "layer count", path);
  for (int i = 0; i < layer_count; ++i) {
    const std::uint8_t kind = r.u8();
    if (kind == 0) {
      const int out_c = checked_dim(r.u32(), "conv out channels", path);
      const int in_c = checked_dim(r.u32(), "conv in channels", path);
      const int kh = checked_dim(r.u32(), "conv kernel height", path);
      const int kw = checked_dim(r.u32(), "conv kernel width", path);
      const int stride = checked_dim(r.u32(), "conv stride", path);
      const int padding = checked_dim(r.u32(), "conv padding", path);
      Tensor weights({out_c, in_c, kh, kw});
      r.f32_array(weights.data(), static_cast<std::size_t>(weights.numel()));
      Tensor bias({out_c});
      r.f32_array(bias.data(), static_cast<std::size_t>(bias.numel()));
      bundle.backbone.push_back(
          LayerSpec::conv(out_c, in_c, kh, kw, stride, padding, std::move(weights), std::move(bias)));
    } else if (kind == 1) {
      bundle.backbone.push_back(LayerSpec::relu());
    } else if (kind == 2) {
      const int window = checked_dim(r.u32(), "pool window", path);
      const int stride = checked_dim(r.u32(), "pool stride", path);
      bundle.backbone.push_back(LayerSpec::maxpool(window, stride));
    } else {
      throw IoError("bundle " + path.string() + " layer " + std::to_string(i) +
                    " has unknown kind " + std::to_string(kind));
    }
  }

  const int count = checked_dim(r.u32(), "prototype count", path);
  bundle.prototypes.dimension = checked_dim(r.u32(), "prototype dimension", path);
  for (int i = 0; i < count; ++i) {
    std::vector<float> vec(static_cast<std::size_t>(bundle.prototypes.dimension));
    r.f32_array(vec.data(), vec.size());
    bundle.prototypes.vectors.push_back(std::move(vec));
    if (r.u8() != 0) {
      Provenance prov;
      prov.image_id = checked_dim(r.u32(), "provenance image id", path);
      prov.h = checked_dim(r.u32(), "provenance row", path);
      prov.w = checked_dim(r.u32(), "provenance column", path);
      bundle.prototypes.provenance.push_back(prov);
    } else {
      bundle.prototypes.provenance.push_back(std::nullopt);
    }
  }

  bundle.simfn.kind = r.u8() == 0 ? SimilarityKind::log_ratio : SimilarityKind::neg_exp;
  bundle.simfn.epsilon = r.f64();

  if (r.u8() != 0) {
    const int classes = checked_dim(r.u32(), "head classes", path);
    Tensor head({classes, count});
    r.f32_array(head.data(), static_cast<std::size_t>(head.numel()));
    bundle.head = std::move(head);
  }

  bundle.policy.kind =
      r.u8() == 0 ? TargetPolicyKind::protopnet_top10 : TargetPolicyKind::prototree_threshold;
  bundle.policy.theta = r.f64();

  if (!r.exhausted()) {
    throw IoError("bundle " + path.string() + " has trailing bytes after the payload");
  }
  bundle.validate();
  return bundle;
}

}  // namespace protofaith
