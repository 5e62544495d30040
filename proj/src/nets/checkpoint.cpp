#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include <json.hpp>

#include "kasr/nets.hpp"

namespace kasr {

namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'K', 'A', 'S', 'R'};
constexpr std::uint8_t kDtypeF32 = 0;

template <typename U>
void put(std::string& out, U value) {
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::string& buf) : buf_(buf) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    unsigned char bytes[sizeof(U)];
    std::memcpy(bytes, buf_.data() + pos_, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    pos_ += sizeof(U);
    U value;
    std::memcpy(&value, bytes, sizeof(U));
    return value;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (buf_.size() - pos_ < n) {
      throw LoadError(LoadError::Kind::Truncated, std::string("file ends inside ") + what);
    }
  }

  const std::string& buf_;
  std::size_t pos_ = 0;
};

json spec_json(const Network& net) {
  const NetSpec& s = net.spec();
  return json{{"name", net.name()},  {"kind", net_kind_name(s.kind)}, {"scale", s.scale},
              {"width", s.width},    {"blocks", s.blocks},            {"slope", s.slope}};
}

}  // namespace

std::string checkpoint_header(const std::vector<const Network*>& nets, const std::string& config_json) {
  json header;
  header["config"] = config_json.empty() ? json::object() : json::parse(config_json);
  header["networks"] = json::array();
  for (const Network* n : nets) header["networks"].push_back(spec_json(*n));
  return header.dump();
}

std::size_t checkpoint_size(const std::vector<const Network*>& nets, std::size_t header_len) {
  std::size_t size = sizeof(kMagic) + 4 + 4 + header_len + 4;
  for (const Network* n : nets) {
    for (const auto& p : n->parameters()) {
      const std::string name = n->name() + "." + p.name;
      size += 4 + name.size() + 1 + 4 + 4 * p.tensor.ndim() + 4 * p.tensor.numel();
    }
  }
  return size;
}

void save_checkpoint(const std::vector<const Network*>& nets, const std::string& config_json,
                     const std::filesystem::path& path) {
  const std::string header = checkpoint_header(nets, config_json);
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  std::uint32_t entries = 0;
  for (const Network* n : nets) entries += static_cast<std::uint32_t>(n->parameters().size());
  put<std::uint32_t>(out, entries);
  for (const Network* n : nets) {
    for (const auto& p : n->parameters()) {
      const std::string name = n->name() + "." + p.name;
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out += name;
      put<std::uint8_t>(out, kDtypeF32);
      put<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.ndim()));
      for (std::size_t d : p.tensor.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
      for (float v : p.tensor.data()) put<float>(out, v);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(IoError::Kind::Unwritable, "cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError(IoError::Kind::Unwritable, "failed writing " + path.string());
}

CheckpointContents load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError(LoadError::Kind::Io, "cannot open " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(buf);

  // A short file that still agrees with the magic is a truncation, not a foreign file.
  if (std::memcmp(buf.data(), kMagic, std::min(buf.size(), sizeof(kMagic))) != 0) {
    throw LoadError(LoadError::Kind::BadMagic, path.string() + " does not start with \"KASR\"");
  }
  r.bytes(sizeof(kMagic), "magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw LoadError(LoadError::Kind::UnknownVersion, "version " + std::to_string(version) + ", expected " +
                                                         std::to_string(kCheckpointVersion));
  }
  const auto header_len = r.get<std::uint32_t>("header length");
  const std::string header_text = r.bytes(header_len, "header");
  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw LoadError(LoadError::Kind::Malformed, std::string("header is not valid JSON: ") + e.what());
  }

  CheckpointContents contents;
  std::map<std::string, BasicTensor<float>> slots;
  try {
    contents.config_json = header.at("config").dump();
    for (const auto& s : header.at("networks")) {
      NetSpec spec;
      spec.kind = parse_net_kind(s.at("kind").get<std::string>());
      spec.scale = s.at("scale").get<std::size_t>();
      spec.width = s.at("width").get<std::size_t>();
      spec.blocks = s.at("blocks").get<std::size_t>();
      spec.slope = s.at("slope").get<double>();
      Network net = build_network<float>(spec);
      net.set_name(s.at("name").get<std::string>());
      contents.nets.push_back(std::move(net));
    }
  } catch (const json::exception& e) {
    throw LoadError(LoadError::Kind::Malformed, std::string("bad header field: ") + e.what());
  } catch (const ContractError& e) {
    throw LoadError(LoadError::Kind::Malformed, e.what());
  }
  for (auto& net : contents.nets) {
    for (auto& p : net.parameters()) slots.emplace(net.name() + "." + p.name, p.tensor);
  }

  const auto entries = r.get<std::uint32_t>("entry count");
  if (entries != slots.size()) {
    throw LoadError(LoadError::Kind::Malformed, "expected " + std::to_string(slots.size()) + " tensors, file has " +
                                                    std::to_string(entries));
  }
  std::map<std::string, std::vector<float>> values;
  for (std::uint32_t e = 0; e < entries; ++e) {
    const auto name_len = r.get<std::uint32_t>("entry name length");
    const std::string name = r.bytes(name_len, "entry name");
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype != kDtypeF32) throw LoadError(LoadError::Kind::Malformed, name + ": unsupported dtype tag");
    const auto ndim = r.get<std::uint32_t>("ndim");
    Shape shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(r.get<std::uint32_t>("dims"));
    const auto it = slots.find(name);
    if (it == slots.end()) throw LoadError(LoadError::Kind::Malformed, "unexpected tensor " + name);
    if (it->second.shape() != shape) {
      throw LoadError(LoadError::Kind::Malformed, name + ": shape " + shape_str(shape) + " does not match " +
                                                      shape_str(it->second.shape()));
    }
    std::vector<float> v(shape_numel(shape));
    for (auto& x : v) x = r.get<float>("tensor values");
    if (!values.emplace(name, std::move(v)).second) {
      throw LoadError(LoadError::Kind::Malformed, "duplicate tensor " + name);
    }
  }
  if (!r.at_end()) throw LoadError(LoadError::Kind::Malformed, "trailing bytes after last tensor");

  for (auto& [name, tensor] : slots) {
    auto dst = tensor.mutable_data();
    const auto& src = values.at(name);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return contents;
}

}  // namespace kasr
