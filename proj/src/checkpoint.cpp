// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/checkpoint.hpp"

#include <cstring>
#include <map>

#include "dbae/tensor_file.hpp"

namespace dbae {

namespace {

using Json = nlohmann::json;
constexpr char kMagic[4] = {'D', 'B', 'C', '1'};
constexpr const char* kKinds[4] = {"live", "ema", "adam_m", "adam_v"};

const Tensor<float>& block(const ParamStore<float>::Entry& e, int kind) {
  switch (kind) {
    case 0: return e.live;
    case 1: return e.ema;
    case 2: return e.first_moment;
    default: return e.second_moment;
  }
}

Tensor<float>& block(ParamStore<float>::Entry& e, int kind) {
  return const_cast<Tensor<float>&>(block(static_cast<const ParamStore<float>::Entry&>(e), kind));
}

struct Parsed {
  CheckpointMeta meta;
  Json header;
  std::size_t body_offset = 0;
  std::size_t body_floats = 0;
};

Parsed parse(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  if (bytes.size() < 12) throw TruncationError(what + ": header", 12, bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw MagicMismatchError(what + ": not a DBC1 checkpoint");
  const std::uint64_t header_len = get_u64(bytes.data() + 4);
  if (header_len > bytes.size() - 12) throw TruncationError(what + ": header", 12 + header_len, bytes.size());
  Parsed p;
  try {
    p.header = Json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const Json::exception& e) {
    throw DataError(what + ": malformed header (" + e.what() + ")");
  }
  try {
    p.meta.format_version = p.header.at("format_version").get<int>();
    if (p.meta.format_version != kCheckpointVersion)
      throw VersionMismatchError(what + ": format version " + std::to_string(p.meta.format_version) +
                                 ", expected " + std::to_string(kCheckpointVersion));
    p.meta.config = p.header.at("config");
    p.meta.config_hash = p.header.at("config_hash").get<std::string>();
    p.meta.rng_state = p.header.at("rng_state").get<std::string>();
    p.meta.step = p.header.at("step").get<std::uint64_t>();
    if (!p.header.at("z_stats").is_null()) {
      ZStats s;
      s.mean = p.header["z_stats"].at("mean").get<std::vector<double>>();
      s.std = p.header["z_stats"].at("std").get<std::vector<double>>();
      p.meta.z_stats = s;
    }
    p.header.at("manifest");
    p.header.at("body_floats");
  } catch (const Json::exception& e) {
    throw DataError(what + ": incomplete header (" + e.what() + ")");
  }
  p.body_offset = 12 + header_len;
  p.body_floats = p.header["body_floats"].get<std::size_t>();
  const std::size_t body_bytes = bytes.size() - p.body_offset;
  if (body_bytes != 4 * p.body_floats)
    throw ManifestError(what + ": body holds " + std::to_string(body_bytes) + " bytes, manifest declares " +
                        std::to_string(4 * p.body_floats));

  // Offsets must tile the body exactly, in order.
  std::size_t cursor = 0;
  try {
    for (const Json& m : p.header["manifest"]) {
      std::size_t count = 1;
      for (std::size_t s : m.at("shape").get<std::vector<std::size_t>>()) count *= s;
      for (const char* kind : kKinds) {
        if (m.at("offsets").at(kind).get<std::size_t>() != cursor)
          throw ManifestError(what + ": offset of " + m.at("name").get<std::string>() + "/" + kind +
                              " does not follow the previous block");
        cursor += count;
      }
    }
  } catch (const Json::exception& e) {
    throw ManifestError(what + ": malformed manifest entry (" + e.what() + ")");
  }
  if (cursor != p.body_floats) throw ManifestError(what + ": manifest blocks do not cover the body");
  return p;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const CheckpointMeta& meta, const std::vector<ConstStoreRef>& stores) {
  Json header;
  header["format_version"] = meta.format_version;
  header["config"] = meta.config;
  header["config_hash"] = meta.config_hash;
  header["rng_state"] = meta.rng_state;
  header["step"] = meta.step;
  header["z_stats"] = meta.z_stats ? Json{{"mean", meta.z_stats->mean}, {"std", meta.z_stats->std}} : Json(nullptr);
  Json manifest = Json::array();
  Json steps = Json::object();
  std::size_t offset = 0;
  for (const ConstStoreRef& ref : stores) {
    steps[ref.group] = ref.store->step();
    for (const std::string& name : ref.store->names()) {
      const auto& e = ref.store->entry(name);
      Json m{{"group", ref.group}, {"name", name}, {"shape", e.live.shape()}};
      for (const char* kind : kKinds) {
        m["offsets"][kind] = offset;
        offset += e.live.size();
      }
      manifest.push_back(m);
    }
  }
  header["store_steps"] = steps;
  header["manifest"] = manifest;
  header["body_floats"] = offset;

  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + 4 * offset);
  for (const ConstStoreRef& ref : stores)
    for (const std::string& name : ref.store->names())
      for (int kind = 0; kind < 4; ++kind)
        for (float v : block(ref.store->entry(name), kind).values()) put_f32(out, v);
  return out;
}

void save_checkpoint(const std::string& path, const CheckpointMeta& meta, const std::vector<ConstStoreRef>& stores) {
  write_file_bytes(path, encode_checkpoint(meta, stores));
}

CheckpointMeta read_checkpoint_meta(const std::string& path) { return parse(read_file_bytes(path), path).meta; }

CheckpointMeta decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::vector<StoreRef>& stores,
                                 const std::string* expected_hash, const std::string& what) {
  const Parsed p = parse(bytes, what);
  if (expected_hash && *expected_hash != p.meta.config_hash)
    throw ConfigError(what + ": config hash " + p.meta.config_hash + " does not match the current config " +
                      *expected_hash);
  std::map<std::string, ParamStore<float>*> by_group;
  std::size_t expected_entries = 0;
  for (const StoreRef& s : stores) by_group[s.group] = s.store, expected_entries += s.store->size();
  if (p.header["manifest"].size() != expected_entries)
    throw ManifestError(what + ": manifest lists " + std::to_string(p.header["manifest"].size()) +
                        " parameters, model has " + std::to_string(expected_entries));
  const std::uint8_t* body = bytes.data() + p.body_offset;
  for (const Json& m : p.header["manifest"]) {
    const std::string group = m.at("group").get<std::string>(), name = m.at("name").get<std::string>();
    const auto it = by_group.find(group);
    if (it == by_group.end() || !it->second->contains(name))
      throw ManifestError(what + ": unexpected parameter " + group + "/" + name);
    auto& e = it->second->entry(name);
    if (m.at("shape").get<Shape>() != e.live.shape())
      throw ManifestError(what + ": shape of " + group + "/" + name + " differs from the model");
    for (int kind = 0; kind < 4; ++kind) {
      Tensor<float>& dst = block(e, kind);
      const std::size_t off = m["offsets"][kKinds[kind]].get<std::size_t>();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = get_f32(body + 4 * (off + i));
    }
  }
  const Json& steps = p.header.contains("store_steps") ? p.header["store_steps"] : Json::object();
  for (const StoreRef& s : stores)
    s.store->set_step(steps.contains(s.group) ? steps[s.group].get<std::uint64_t>() : p.meta.step);
  return p.meta;
}

CheckpointMeta load_checkpoint(const std::string& path, const std::vector<StoreRef>& stores,
                               const std::string* expected_hash) {
  return decode_checkpoint(read_file_bytes(path), stores, expected_hash, path);
}

std::vector<ConstStoreRef> bundle_stores(const ModelBundle<float>& bundle) {
  return {{"encoder", &bundle.encoder_params()}, {"decoder", &bundle.decoder_params()},
          {"score", &bundle.score_params()}};
}

std::vector<StoreRef> bundle_stores(ModelBundle<float>& bundle) {
  return {{"encoder", &bundle.encoder_params()}, {"decoder", &bundle.decoder_params()},
          {"score", &bundle.score_params()}};
}

}  // namespace dbae
