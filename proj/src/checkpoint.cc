// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Binary layout (little-endian):
//   "C2FCKPT1" | u32 version | u64 n + config ini text | i32 epoch |
//   u64 history digest | u64 record count | records...
// record: u32 n + key | u32 rank | u64 dims[rank] | f64 values[numel]

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "c2f/config.h"
#include "c2f/errors.h"
#include "c2f/trainer.h"

namespace c2f {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', '2', 'F', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxString = 1u << 24;
constexpr std::uint64_t kMaxElements = 1ull << 32;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("checkpoint: truncated file");
  return v;
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > kMaxString) throw DataError("checkpoint: corrupt string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("checkpoint: truncated file");
  return s;
}

using Records = std::vector<std::pair<std::string, ag::Array>>;

void add_map(Records& r, const std::string& prefix, const std::map<std::string, ag::Array>& m) {
  for (const auto& [k, v] : m) r.emplace_back(prefix + k, v);
}

void add_opt(Records& r, const std::string& prefix, const OptimizerState& s) {
  add_map(r, prefix + "adam/m/", s.m);
  add_map(r, prefix + "adam/v/", s.v);
  r.emplace_back(prefix + "adam/step", ag::Array::scalar(static_cast<double>(s.step)));
}

bool strip(const std::string& key, const std::string& prefix, std::string& rest) {
  if (key.rfind(prefix, 0) != 0) return false;
  rest = key.substr(prefix.size());
  return true;
}

// Routes one record into gen/disc param sets and optimizer states.
void route(Checkpoint& ck, const std::string& key, ag::Array value) {
  for (const char* net : {"gen/", "disc/"}) {
    std::string rest;
    if (!strip(key, net, rest)) continue;
    const bool gen = std::strcmp(net, "gen/") == 0;
    if (!gen && !ck.discriminator) {
      ck.discriminator = ParamSet{};
      ck.discriminator_opt = OptimizerState{};
    }
    ParamSet& ps = gen ? ck.generator : *ck.discriminator;
    OptimizerState& os = gen ? ck.generator_opt : *ck.discriminator_opt;
    std::string name;
    if (strip(rest, "params/", name)) {
      ps.params[name] = std::move(value);
    } else if (strip(rest, "buffers/", name)) {
      ps.buffers[name] = std::move(value);
    } else if (strip(rest, "adam/m/", name)) {
      os.m[name] = std::move(value);
    } else if (strip(rest, "adam/v/", name)) {
      os.v[name] = std::move(value);
    } else if (rest == "adam/step") {
      os.step = static_cast<std::int64_t>(value.item());
    } else {
      throw DataError(fmt::format("checkpoint: unknown record '{}'", key));
    }
    return;
  }
  throw DataError(fmt::format("checkpoint: unknown record '{}'", key));
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  RunConfig rc;
  rc.train = ck.config;
  put_string(out, to_ini(rc));
  put<std::int32_t>(out, ck.epoch);
  put<std::uint64_t>(out, ck.history_digest);

  Records records;
  add_map(records, "gen/params/", ck.generator.params);
  add_map(records, "gen/buffers/", ck.generator.buffers);
  add_opt(records, "gen/", ck.generator_opt);
  if (ck.discriminator) {
    add_map(records, "disc/params/", ck.discriminator->params);
    add_map(records, "disc/buffers/", ck.discriminator->buffers);
    add_opt(records, "disc/", ck.discriminator_opt ? *ck.discriminator_opt : OptimizerState{});
  }
  put<std::uint64_t>(out, records.size());
  for (const auto& [key, a] : records) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(key.size()));
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.rank()));
    for (std::size_t d : a.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(a.ptr()), static_cast<std::streamsize>(a.size() * sizeof(double)));
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw DataError("checkpoint: bad magic header");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw DataError(fmt::format("checkpoint: unsupported format version {}", version));
  Checkpoint ck;
  try {
    ck.config = parse_config(get_string(in)).train;
  } catch (const ConfigError& e) {
    throw DataError(fmt::format("checkpoint: invalid config snapshot ({})", e.what()));
  }
  ck.epoch = get<std::int32_t>(in);
  ck.history_digest = get<std::uint64_t>(in);
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto klen = get<std::uint32_t>(in);
    if (klen > kMaxString) throw DataError("checkpoint: corrupt key length");
    std::string key(klen, '\0');
    in.read(key.data(), klen);
    const auto rank = get<std::uint32_t>(in);
    if (rank > 8) throw DataError("checkpoint: corrupt rank");
    ag::Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = get<std::uint64_t>(in);
      n *= d;
      if (n > kMaxElements) throw DataError("checkpoint: corrupt shape");
    }
    std::vector<double> data(n);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw DataError("checkpoint: truncated file");
    route(ck, key, ag::Array(std::move(shape), std::move(data)));
  }
  in.peek();
  if (!in.eof()) throw DataError("checkpoint: trailing bytes after last record");
  if (ck.generator.params.empty()) throw DataError("checkpoint: no generator parameters");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write checkpoint '{}'", path.string()));
  write_checkpoint(out, ck);
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open checkpoint '{}'", path.string()));
  return read_checkpoint(in);
}

}  // namespace c2f
