#include "ssad/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace ssad::nn {
namespace {

constexpr char kMagic[8] = {'S', 'S', 'A', 'D', 'A', 'R', 'C', '1'};

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

Tensor he_normal(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels, ops::ConvGeometry g, std::mt19937_64& rng,
               bool trainable)
    : weight(make_parameter(name + ".weight",
                            he_normal({out_channels, in_channels, g.kernel, g.kernel},
                                      in_channels * g.kernel * g.kernel, rng),
                            trainable)),
      bias(make_parameter(name + ".bias", Tensor({out_channels}), trainable)),
      geometry(g) {}

Var Conv2d::operator()(Tape& tape, Var x) const {
  return ops::conv2d(tape, x, tape.parameter(weight), tape.parameter(bias), geometry);
}

ConvTranspose2d::ConvTranspose2d(const std::string& name, int in_channels, int out_channels, ops::ConvGeometry g,
                                 std::mt19937_64& rng, bool trainable)
    : weight(make_parameter(name + ".weight",
                            he_normal({in_channels, out_channels, g.kernel, g.kernel},
                                      in_channels * (g.kernel / std::max(1, g.stride)) * (g.kernel / std::max(1, g.stride)),
                                      rng),
                            trainable)),
      bias(make_parameter(name + ".bias", Tensor({out_channels}), trainable)),
      geometry(g) {}

Var ConvTranspose2d::operator()(Tape& tape, Var x) const {
  return ops::conv_transpose2d(tape, x, tape.parameter(weight), tape.parameter(bias), geometry);
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p->value.size();
  return n;
}

void Archive::put(const ParameterList& params) {
  for (const auto& p : params) tensors[p->name] = p->value;
}

void Archive::restore(const ParameterList& params) const {
  for (const auto& p : params) {
    auto it = tensors.find(p->name);
    if (it == tensors.end()) throw Error("archive lacks parameter '" + p->name + "'");
    if (!it->second.same_shape(p->value)) {
      throw Error("archive parameter '" + p->name + "' has shape " + shape_string(it->second.shape()) +
                  ", expected " + shape_string(p->value.shape()));
    }
    p->value = it->second;
  }
}

void Archive::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["metadata"] = metadata;
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : tensors) header["tensors"].push_back({{"name", name}, {"shape", t.shape()}});
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open archive for writing: " + path.string());
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : tensors) {
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  out.flush();
  if (!out) throw Error("failed writing archive: " + path.string());
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("archive not found: " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw Error("not an ssad archive: " + path.string());
  }
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1u << 30)) {
    throw Error("corrupt archive header: " + path.string());
  }
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw Error("truncated archive header: " + path.string());

  Archive a;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt archive header in " + path.string() + ": " + e.what());
  }
  a.metadata = header.value("metadata", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    Tensor t(entry.at("shape").get<std::vector<int>>());
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)))) {
      throw Error("truncated archive data: " + path.string());
    }
    a.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes in archive: " + path.string());
  return a;
}

}  // namespace ssad::nn
