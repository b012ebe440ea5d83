#pragma once

// "CEC1" checkpoint container.
//
//   magic   4 bytes  "CEC1"
//   count   u32
//   count × { u32 name_len, name bytes, u32 rank, rank × u64 dims, f64 data[prod(dims)] }
//
// All integers and floats are little-endian. A TrainState is stored as its
// named parameters, the Adam moments ("adam.m.<name>", "adam.v.<name>"), the
// counters and a "meta.spec" vector describing the architecture.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cecnet/harness.hpp"

namespace cecnet {

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class U>
void put(std::ostream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <class U>
U get(std::istream& in, const std::string& what) {
  U v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(U))) throw IoError("checkpoint truncated while reading " + what);
  return v;
}

/// A 64-bit integer as two exactly representable 32-bit halves.
inline std::vector<double> split_u64(std::uint64_t v) {
  return {static_cast<double>(v >> 32), static_cast<double>(v & 0xffffffffULL)};
}
inline std::uint64_t join_u64(const std::vector<double>& d) {
  if (d.size() != 2) throw IoError("checkpoint: malformed 64-bit counter");
  return (static_cast<std::uint64_t>(d[0]) << 32) | static_cast<std::uint64_t>(d[1]);
}

}  // namespace detail

inline void write_archive(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write("CEC1", 4);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& a : arrays) {
      if (shape_size(a.shape) != a.data.size()) throw ContractError("checkpoint: array '" + a.name + "' size mismatch");
      detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
      out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
      detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
      for (auto d : a.shape) detail::put<std::uint64_t>(out, d);
      out.write(reinterpret_cast<const char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<NamedArray> read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "CEC1", 4) != 0) throw IoError(path.string() + " is not a CEC1 checkpoint");
  const auto count = detail::get<std::uint32_t>(in, "count");
  std::vector<NamedArray> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    const auto len = detail::get<std::uint32_t>(in, "name length");
    if (len > 4096) throw IoError("checkpoint: implausible name length");
    a.name.resize(len);
    if (!in.read(a.name.data(), len)) throw IoError("checkpoint truncated in name");
    const auto rank = detail::get<std::uint32_t>(in, "rank");
    if (rank > 8) throw IoError("checkpoint: implausible rank for '" + a.name + "'");
    for (std::uint32_t r = 0; r < rank; ++r) a.shape.push_back(detail::get<std::uint64_t>(in, "dims"));
    const auto n = shape_size(a.shape);
    if (n > (std::size_t{1} << 32)) throw IoError("checkpoint: implausible size for '" + a.name + "'");
    a.data.resize(n);
    if (!in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
      throw IoError("checkpoint truncated in data of '" + a.name + "'");
    }
    out.push_back(std::move(a));
  }
  return out;
}

namespace detail {

inline std::vector<double> encode_spec(const ModelSpec& s) {
  return {static_cast<double>(s.attention),
          static_cast<double>(s.cecm_mode),
          static_cast<double>(s.metric),
          static_cast<double>(s.cecd_mode),
          static_cast<double>(s.self_cecm_mode),
          static_cast<double>(s.gcn_activation),
          s.temperature,
          s.cecd_temperature,
          static_cast<double>(s.channels),
          static_cast<double>(s.base_classes),
          s.use_cece ? 1.0 : 0.0,
          static_cast<double>(s.cece_groups),
          static_cast<double>(s.cece_mode),
          s.lambda,
          s.fixed_weights ? 1.0 : 0.0,
          s.fixed_weights ? s.fixed_weights->first : 0.0,
          s.fixed_weights ? s.fixed_weights->second : 0.0,
          s.lr,
          s.beta1,
          s.beta2,
          s.adam_eps};
}

inline ModelSpec decode_spec(const std::vector<double>& v) {
  if (v.size() != 21) throw IoError("checkpoint: meta.spec has " + std::to_string(v.size()) + " entries, expected 21");
  auto code = [&](std::size_t i, int limit) {
    const double d = v[i];
    if (d < 0 || d > limit || d != static_cast<double>(static_cast<int>(d))) throw IoError("checkpoint: bad enum code in meta.spec");
    return static_cast<int>(d);
  };
  ModelSpec s;
  s.attention = static_cast<AttentionKind>(code(0, 2));
  s.cecm_mode = static_cast<ClusterMode>(code(1, 3));
  s.metric = static_cast<MetricKind>(code(2, 1));
  s.cecd_mode = static_cast<ClusterMode>(code(3, 3));
  s.self_cecm_mode = static_cast<ClusterMode>(code(4, 3));
  s.gcn_activation = static_cast<Activation>(code(5, 1));
  s.temperature = v[6];
  s.cecd_temperature = v[7];
  s.channels = static_cast<std::size_t>(v[8]);
  s.base_classes = static_cast<std::size_t>(v[9]);
  s.use_cece = v[10] != 0.0;
  s.cece_groups = static_cast<std::size_t>(v[11]);
  s.cece_mode = static_cast<ClusterMode>(code(12, 3));
  s.lambda = v[13];
  if (v[14] != 0.0) s.fixed_weights = std::make_pair(v[15], v[16]);
  s.lr = v[17];
  s.beta1 = v[18];
  s.beta2 = v[19];
  s.adam_eps = v[20];
  return s;
}

template <class T>
NamedArray to_array(const std::string& name, const Shape& shape, const std::vector<T>& values) {
  return {name, shape, std::vector<double>(values.begin(), values.end())};
}

}  // namespace detail

template <class T>
std::vector<NamedArray> state_to_arrays(TrainState<T>& state) {
  std::vector<NamedArray> out;
  const auto spec = detail::encode_spec(state.spec);
  out.push_back({"meta.spec", Shape{spec.size()}, spec});
  out.push_back({"state.seed", Shape{2}, detail::split_u64(state.seed)});
  out.push_back({"state.step", Shape{2}, detail::split_u64(state.step)});
  out.push_back({"adam.t", Shape{2}, detail::split_u64(state.optimizer.t)});
  const auto named = state.named_parameters();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, tensor] = named[i];
    const auto d = tensor->data();
    out.push_back({name, tensor->shape(), std::vector<double>(d.begin(), d.end())});
    if (i < state.optimizer.m.size() && !state.optimizer.m[i].empty()) {
      out.push_back(detail::to_array("adam.m." + name, tensor->shape(), state.optimizer.m[i]));
      out.push_back(detail::to_array("adam.v." + name, tensor->shape(), state.optimizer.v[i]));
    }
  }
  if (state.task.fixed) {
    // the alphas are not trained but are still reported in metrics
    out.push_back({"task.alpha_global", Shape{}, {static_cast<double>(state.task.alpha_global.item())}});
    out.push_back({"task.alpha_rotation", Shape{}, {static_cast<double>(state.task.alpha_rotation.item())}});
  }
  return out;
}

template <class T>
TrainState<T> state_from_arrays(const std::vector<NamedArray>& arrays) {
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : arrays)
    if (!by_name.emplace(a.name, &a).second) throw IoError("checkpoint: duplicate entry '" + a.name + "'");
  auto need = [&](const std::string& name) -> const NamedArray& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError("checkpoint: missing entry '" + name + "'");
    return *it->second;
  };
  const auto spec = detail::decode_spec(need("meta.spec").data);
  const auto seed = detail::join_u64(need("state.seed").data);
  auto state = TrainState<T>::make(spec, seed);
  state.step = detail::join_u64(need("state.step").data);
  state.optimizer.t = detail::join_u64(need("adam.t").data);

  auto fill = [](Tensor<T>& t, const NamedArray& a) {
    if (a.shape != t.shape()) {
      throw IoError("checkpoint: '" + a.name + "' has shape " + shape_str(a.shape) + ", model expects " + shape_str(t.shape()));
    }
    auto dst = t.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(a.data[i]);
  };
  const auto named = state.named_parameters();
  state.optimizer.m.assign(named.size(), {});
  state.optimizer.v.assign(named.size(), {});
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, tensor] = named[i];
    fill(*tensor, need(name));
    auto m = by_name.find("adam.m." + name), v = by_name.find("adam.v." + name);
    if ((m == by_name.end()) != (v == by_name.end())) throw IoError("checkpoint: incomplete moments for '" + name + "'");
    if (m != by_name.end()) {
      if (m->second->shape != tensor->shape() || v->second->shape != tensor->shape()) {
        throw IoError("checkpoint: moment shape mismatch for '" + name + "'");
      }
      state.optimizer.m[i].assign(m->second->data.begin(), m->second->data.end());
      state.optimizer.v[i].assign(v->second->data.begin(), v->second->data.end());
    }
  }
  if (state.task.fixed) {
    fill(state.task.alpha_global, need("task.alpha_global"));
    fill(state.task.alpha_rotation, need("task.alpha_rotation"));
  }
  return state;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, TrainState<T>& state) {
  write_archive(path, state_to_arrays(state));
}

template <class T>
TrainState<T> load_checkpoint(const std::filesystem::path& path) {
  return state_from_arrays<T>(read_archive(path));
}

}  // namespace cecnet
