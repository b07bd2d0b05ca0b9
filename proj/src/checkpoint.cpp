#include "knockoffs/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "knockoffs/errors.hpp"
#include "knockoffs/rng.hpp"

namespace knockoffs {

namespace {
constexpr char kMagic[8] = {'K', 'N', 'O', 'C', 'K', 'P', 'T', '1'};

std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const CheckpointHeader& header,
                     const std::vector<Param>& params) {
  std::vector<double> payload;
  nlohmann::json manifest = nlohmann::json::array();
  for (const Param& p : params) {
    manifest.push_back({{"name", p.name},
                        {"shape", p.var.value().shape()},
                        {"offset", payload.size()}});
    auto d = p.var.value().data();
    payload.insert(payload.end(), d.begin(), d.end());
  }

  nlohmann::json j{{"format_version", 1},
                   {"kind", header.kind},
                   {"arch", header.arch},
                   {"schedule", header.schedule},
                   {"seed", header.seed},
                   {"manifest", manifest},
                   {"payload_doubles", payload.size()},
                   {"content_hash",
                    hash_hex(fnv1a64(payload.data(),
                                     payload.size() * sizeof(double)))}};
  const std::string head = j.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = head.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
}

const Tensor& LoadedCheckpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw DataError("checkpoint has no tensor named '" + name + "'");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw DataError(path.string() + ": not a checkpoint file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string head(len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError(path.string() + ": truncated header");

  nlohmann::json j = nlohmann::json::parse(head, nullptr, false);
  if (j.is_discarded() || j.value("format_version", 0) != 1)
    throw DataError(path.string() + ": unsupported checkpoint header");

  const auto payload_doubles = j.at("payload_doubles").get<std::size_t>();
  std::vector<double> payload(payload_doubles);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload_doubles * sizeof(double)));
  if (!in) throw DataError(path.string() + ": truncated payload");

  const std::uint64_t h = fnv1a64(payload.data(), payload.size() * sizeof(double));
  if (hash_hex(h) != j.at("content_hash").get<std::string>())
    throw DataError(path.string() + ": payload hash mismatch");

  LoadedCheckpoint out;
  out.header.kind = j.at("kind").get<std::string>();
  out.header.arch = j.at("arch");
  out.header.schedule = j.at("schedule");
  out.header.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& entry : j.at("manifest")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = static_cast<std::size_t>(shape_numel(shape));
    if (offset + count > payload.size())
      throw DataError(path.string() + ": manifest entry out of bounds");
    std::vector<double> data(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                             payload.begin() + static_cast<std::ptrdiff_t>(offset + count));
    out.tensors.emplace_back(name, Tensor::from_data(shape, std::move(data)));
  }
  return out;
}

void restore_params(std::vector<Param>& params, const LoadedCheckpoint& ckpt) {
  for (Param& p : params) p.var.set_value(ckpt.tensor(p.name).clone());
}

}  // namespace knockoffs
