#include "precise/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "precise/errors.hpp"
#include "precise/text.hpp"

namespace precise {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::string_view kMagic = "PRECISEv1\n";

struct ParamHeader {
  std::string name;
  Shape shape;
  std::size_t width = 0;
};

Shape parse_shape(const std::string& text) {
  Shape shape;
  for (const std::string& part : split(text, 'x')) shape.push_back(parse_size(part));
  return shape;
}

std::string shape_text(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out.push_back('x');
    out += std::to_string(shape[i]);
  }
  return out;
}

std::vector<ParamHeader> read_header(std::istream& in, const std::filesystem::path& path) {
  std::string magic(kMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kMagic) throw DataError("not a checkpoint (bad magic): " + path.string());
  std::vector<ParamHeader> headers;
  std::string line;
  while (std::getline(in, line)) {
    if (line == "data") return headers;
    std::istringstream ls(line);
    std::string tag, shape;
    ParamHeader h;
    if (!(ls >> tag >> h.name >> shape >> h.width) || tag != "param") {
      throw DataError("checkpoint " + path.string() + ": malformed header line '" + line + "'");
    }
    if (h.width != 4 && h.width != 8) throw DataError("checkpoint " + path.string() + ": bad scalar width");
    h.shape = parse_shape(shape);
    headers.push_back(std::move(h));
  }
  throw DataError("checkpoint " + path.string() + ": truncated header");
}

template <typename Stored, typename T>
std::vector<T> read_buffer(std::istream& in, std::size_t n) {
  std::vector<Stored> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * sizeof(Stored)));
  if constexpr (std::is_same_v<Stored, T>) {
    return raw;
  } else {
    return std::vector<T>(raw.begin(), raw.end());
  }
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const PreciseModel<T>& model, const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  out << kMagic;
  const auto params = model.named_parameters();
  for (const auto& p : params) {
    out << "param " << p.name << ' ' << shape_text(p.tensor.shape()) << ' ' << sizeof(T) << '\n';
  }
  out << "data\n";
  for (const auto& p : params) {
    const auto v = p.tensor.values();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
  const ArchitectureSpec& arch = model.architecture();
  std::string hidden;
  for (std::size_t i = 0; i < arch.hidden.size(); ++i) hidden += (i ? "," : "") + std::to_string(arch.hidden[i]);
  out << "image_height=" << arch.image_height << '\n'
      << "image_width=" << arch.image_width << '\n'
      << "hidden=" << hidden << '\n'
      << "latent_dim=" << arch.latent_dim << '\n'
      << "classifier_bias=" << (arch.classifier_bias ? 1 : 0) << '\n'
      << "per_class=" << model.reservation().per_class() << '\n'
      << "num_classes=" << model.num_classes() << '\n'
      << "norm_mean=" << format_double(model.normalization().mean) << '\n'
      << "norm_std=" << format_double(model.normalization().std) << '\n'
      << "lambda1=" << format_double(meta.lambda1) << '\n'
      << "lambda2=" << format_double(meta.lambda2) << '\n'
      << "mode=" << meta.mode << '\n'
      << "seed=" << meta.seed << '\n';
  for (const auto& [k, v] : meta.extra) out << k << '=' << v << '\n';
  if (!out) throw IoError("checkpoint write failed: " + path.string());
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  const auto headers = read_header(in, path);

  std::vector<NamedTensor<T>> params;
  for (const ParamHeader& h : headers) {
    const std::size_t n = element_count(h.shape);
    std::vector<T> values = h.width == 4 ? read_buffer<float, T>(in, n) : read_buffer<double, T>(in, n);
    if (!in) throw DataError("checkpoint " + path.string() + ": truncated data for '" + h.name + "'");
    params.push_back({h.name, Tensor<T>(h.shape, std::move(values), true)});
  }

  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("checkpoint " + path.string() + ": bad metadata line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError("checkpoint " + path.string() + ": missing metadata '" + key + "'");
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  try {
    ArchitectureSpec arch;
    arch.image_height = parse_size(need("image_height"));
    arch.image_width = parse_size(need("image_width"));
    arch.hidden.clear();
    const std::string hidden = need("hidden");
    if (!hidden.empty())
      for (const std::string& h : split(hidden, ',')) arch.hidden.push_back(parse_size(h));
    arch.latent_dim = parse_size(need("latent_dim"));
    arch.classifier_bias = need("classifier_bias") == "1";
    const std::size_t per_class = parse_size(need("per_class"));
    const std::size_t num_classes = parse_size(need("num_classes"));
    Normalization norm{parse_double(need("norm_mean")), parse_double(need("norm_std"))};
    CheckpointMeta meta;
    meta.lambda1 = parse_double(need("lambda1"));
    meta.lambda2 = parse_double(need("lambda2"));
    meta.mode = need("mode");
    meta.seed = std::stoull(need("seed"));
    meta.extra = std::move(kv);
    auto model = PreciseModel<T>::from_parameters(arch, per_class, num_classes, std::move(params));
    model.set_normalization(norm);
    return Checkpoint<T>{std::move(model), std::move(meta)};
  } catch (const std::invalid_argument& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
}

std::size_t checkpoint_scalar_width(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  const auto headers = read_header(in, path);
  if (headers.empty()) throw DataError("checkpoint " + path.string() + " has no parameters");
  return headers.front().width;
}

template void save_checkpoint<float>(const std::filesystem::path&, const PreciseModel<float>&, const CheckpointMeta&);
template void save_checkpoint<double>(const std::filesystem::path&, const PreciseModel<double>&,
                                      const CheckpointMeta&);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace precise
