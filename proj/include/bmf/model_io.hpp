#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "errors.hpp"
#include "eval.hpp"
#include "ingest.hpp"
#include "kernel.hpp"
#include "ratings.hpp"

namespace bmf {

// Binary layout, all integers and floats little-endian:
//   "BMFMODEL" | u32 version | u64 m | u64 n | u64 k | U (m*k) | V (n*k) | bu (m) | bi (n)
// Matrices are row-major f64. A text sidecar carries the kernel variant,
// the training mean, and the raw id of each row with its training count.
inline constexpr std::array<char, 8> kModelMagic = {'B', 'M', 'F', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

struct ModelBundle {
  FactorModel model;
  KernelVariant variant = KernelVariant::biased_svd;
  TrainingStats stats;
  IdMap users;
  IdMap items;
};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline std::uint64_t get_le(std::istream& in, int bytes) {
  unsigned char b[8] = {};
  if (!in.read(reinterpret_cast<char*>(b), bytes)) throw data_error("model file truncated");
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace detail

inline void write_model_binary(std::ostream& out, const FactorModel& m) {
  out.write(kModelMagic.data(), kModelMagic.size());
  detail::put_u32(out, kModelVersion);
  detail::put_u64(out, m.n_users());
  detail::put_u64(out, m.n_items());
  detail::put_u64(out, m.k());
  for (auto xs : {m.user_factors(), m.item_factors(), m.user_biases(), m.item_biases()}) {
    for (double x : xs) detail::put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
}

inline FactorModel read_model_binary(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kModelMagic) {
    throw data_error("not a model file (bad magic)");
  }
  const auto version = detail::get_le(in, 4);
  if (version != kModelVersion) {
    throw data_error("unsupported model version " + std::to_string(version));
  }
  const auto m = detail::get_le(in, 8);
  const auto n = detail::get_le(in, 8);
  const auto k = detail::get_le(in, 8);
  if (k < 1 || k > (1u << 20) || m > (1ull << 32) || n > (1ull << 32)) {
    throw data_error("model header has implausible dimensions");
  }
  FactorModel model(m, n, static_cast<int>(k));
  for (auto xs : {model.user_factors(), model.item_factors(), model.user_biases(),
                  model.item_biases()}) {
    for (double& x : xs) x = std::bit_cast<double>(detail::get_le(in, 8));
  }
  return model;
}

inline void write_model_sidecar(std::ostream& out, const ModelBundle& b) {
  auto table = [&](const char* name, const IdMap& ids, const std::vector<std::size_t>& counts) {
    out << name << ' ' << ids.size() << '\n';
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::string& raw = ids.raw(i);
      if (raw.find_first_of(" \t\r\n") != std::string::npos) {
        throw data_error("id '" + raw + "' contains whitespace");
      }
      out << raw << ' ' << (i < counts.size() ? counts[i] : 0) << '\n';
    }
  };
  out << "bmf-model-meta " << kModelVersion << '\n';
  out << "variant " << to_string(b.variant) << '\n';
  out << "global_mean " << format_double(b.stats.global_mean) << '\n';
  table("users", b.users, b.stats.user_counts);
  table("items", b.items, b.stats.item_counts);
}

inline void read_model_sidecar(std::istream& in, ModelBundle& b) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "bmf-model-meta" || version != static_cast<int>(kModelVersion)) {
    throw data_error("bad model sidecar header");
  }
  std::string key, value;
  if (!(in >> key >> value) || key != "variant") throw data_error("sidecar: missing variant");
  b.variant = parse_variant(value);
  if (!(in >> key >> value) || key != "global_mean" ||
      !detail::parse_double(value, b.stats.global_mean)) {
    throw data_error("sidecar: missing global_mean");
  }
  auto table = [&](const char* name, IdMap& ids, std::vector<std::size_t>& counts) {
    std::size_t n = 0;
    if (!(in >> key >> n) || key != name) throw data_error(std::string("sidecar: missing ") + name);
    ids = IdMap{};
    counts.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::string raw;
      if (!(in >> raw >> counts[i])) throw data_error(std::string("sidecar: truncated ") + name);
      if (ids.intern(raw) != i) throw data_error("sidecar: duplicate id " + raw);
    }
  };
  table("users", b.users, b.stats.user_counts);
  table("items", b.items, b.stats.item_counts);
}

inline std::string sidecar_path(const std::string& model_path) { return model_path + ".meta"; }

inline void save_model(const std::string& path, const ModelBundle& b) {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw data_error("cannot write " + path);
  write_model_binary(bin, b.model);
  std::ofstream meta(sidecar_path(path));
  if (!meta) throw data_error("cannot write " + sidecar_path(path));
  write_model_sidecar(meta, b);
  if (!bin || !meta) throw data_error("write failed for " + path);
}

inline ModelBundle load_model(const std::string& path) {
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw data_error("cannot open " + path);
  ModelBundle b;
  b.model = read_model_binary(bin);
  std::ifstream meta(sidecar_path(path));
  if (!meta) throw data_error("cannot open " + sidecar_path(path));
  read_model_sidecar(meta, b);
  if (b.users.size() != b.model.n_users() || b.items.size() != b.model.n_items()) {
    throw dimension_error("sidecar id tables do not match model dimensions");
  }
  return b;
}

}  // namespace bmf
