#include "vat/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace vat {

namespace {

constexpr std::array<char, 8> kMagic = {'V', 'A', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint64_t kMaxParams = std::uint64_t{1} << 32;
constexpr std::uint64_t kMaxText = std::uint64_t{1} << 26;

template <class T>
void put(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get(std::istream& in, const char* what) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const PolicyParams& params, std::string_view config_text) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint8_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.obs_dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.n_actions()));
  const auto& sizes = params.actor.sizes();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(sizes.size() - 2));
  for (std::size_t i = 1; i + 1 < sizes.size(); ++i) put<std::uint32_t>(out, static_cast<std::uint32_t>(sizes[i]));
  put<std::uint64_t>(out, params.flat.size());
  for (double x : params.flat) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  put<std::uint64_t>(out, config_text.size());
  out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  if (!out) throw CheckpointError("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = get<std::uint8_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto obs_dim = get<std::uint32_t>(in, "observation size");
  const auto n_actions = get<std::uint32_t>(in, "action count");
  const auto layers = get<std::uint32_t>(in, "layer count");
  if (obs_dim == 0 || n_actions == 0 || layers == 0 || layers > 64) {
    throw CheckpointError("checkpoint has an invalid network shape");
  }
  std::vector<int> hidden;
  for (std::uint32_t i = 0; i < layers; ++i) {
    const auto h = get<std::uint32_t>(in, "hidden size");
    if (h == 0 || h > (1u << 20)) throw CheckpointError("checkpoint has an invalid hidden size");
    hidden.push_back(static_cast<int>(h));
  }

  Checkpoint ck;
  ck.params.actor = MlpShape(static_cast<int>(obs_dim), hidden, static_cast<int>(n_actions));
  ck.params.critic = MlpShape(static_cast<int>(obs_dim), hidden, 1);
  const auto count = get<std::uint64_t>(in, "parameter count");
  const std::uint64_t expect = ck.params.actor.param_count() + ck.params.critic.param_count();
  if (count != expect || count > kMaxParams) {
    throw CheckpointError("checkpoint parameter count " + std::to_string(count) + " does not match its shape (" +
                          std::to_string(expect) + ")");
  }
  ck.params.flat.resize(count);
  for (auto& x : ck.params.flat) x = std::bit_cast<double>(get<std::uint64_t>(in, "parameters"));
  const auto len = get<std::uint64_t>(in, "config length");
  if (len > kMaxText) throw CheckpointError("checkpoint config text is implausibly long");
  ck.config_text.resize(len);
  if (len > 0 && !in.read(ck.config_text.data(), static_cast<std::streamsize>(len))) {
    throw CheckpointError("checkpoint truncated while reading config text");
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params, std::string_view config_text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params, config_text);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace vat
