#include "pearl/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace pearl {

namespace {
constexpr char kMagic[8] = {'P', 'E', 'A', 'R', 'L', 'P', 'S', '1'};
constexpr std::uint32_t kVersion = 1;

void write_values(std::ofstream& out, const Tensor& t) {
  for (long i = 0; i < t.rows(); ++i)
    for (long j = 0; j < t.cols(); ++j) {
      double v = t(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
}

void read_values(std::ifstream& in, Tensor& t) {
  for (long i = 0; i < t.rows(); ++i)
    for (long j = 0; j < t.cols(); ++j) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      t(i, j) = v;
    }
}
}  // namespace

void save_parameters(const std::filesystem::path& path, const ParameterSet& params) {
  nlohmann::json header;
  header["version"] = kVersion;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& name : params.names()) {
    const Tensor& t = params.at(name);
    entries.push_back({{"name", name},
                       {"rows", t.rows()},
                       {"cols", t.cols()},
                       {"trainable", params.trainable(name)}});
  }
  header["parameters"] = entries;
  std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), hs.size());
  for (const auto& name : params.names()) write_values(out, params.at(name));
  if (!out) throw ConfigError("checkpoint write failed: " + path.string());
}

namespace {
nlohmann::json read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw ConfigError("not a checkpoint file: " + path.string());
  std::uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  nlohmann::json header = nlohmann::json::parse(hs);
  if (header.at("version").get<std::uint32_t>() != kVersion)
    throw ConfigError("unsupported checkpoint version in " + path.string());
  return header;
}
}  // namespace

void load_parameters_into(const std::filesystem::path& path, ParameterSet& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path.string());
  nlohmann::json header = read_header(in, path);
  for (const auto& e : header.at("parameters")) {
    std::string name = e.at("name").get<std::string>();
    long rows = e.at("rows").get<long>(), cols = e.at("cols").get<long>();
    Tensor t(rows, cols);
    read_values(in, t);
    if (!params.contains(name)) throw ConfigError("checkpoint has unknown parameter " + name);
    Tensor& dst = params.at(name);
    if (dst.rows() != rows || dst.cols() != cols)
      throw ConfigError("checkpoint shape mismatch for " + name);
    dst = t;
  }
}

ParameterSet load_parameters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path.string());
  nlohmann::json header = read_header(in, path);
  ParameterSet params;
  for (const auto& e : header.at("parameters")) {
    std::string name = e.at("name").get<std::string>();
    long rows = e.at("rows").get<long>(), cols = e.at("cols").get<long>();
    Tensor t(rows, cols);
    read_values(in, t);
    params.add(name, std::move(t), e.value("trainable", true));
  }
  return params;
}

}  // namespace pearl
