// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvlsm/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "kvlsm/error.hpp"
#include "util/file.hpp"

namespace kvlsm {

namespace {

std::string_view trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_uint(std::string_view key, std::string_view v)
{
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw UsageError("config: bad integer for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v)
{
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw UsageError("config: bad number for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v)
{
  if (v == "true" || v == "on" || v == "1") {
    return true;
  }
  if (v == "false" || v == "off" || v == "0") {
    return false;
  }
  throw UsageError("config: bad boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

CodecId parse_codec(std::string_view v)
{
  if (v == "raw" || v == "0") {
    return CodecId::kRaw;
  }
  if (v == "zlib" || v == "1") {
    return CodecId::kZlib;
  }
  throw UsageError("config: unknown codec '" + std::string(v) + "'");
}

}  // namespace

void EngineConfig::validate() const
{
  if (block_tokens == 0) {
    throw UsageError("config: block_tokens must be positive");
  }
  shape.validate();
  if (file_cap == 0) {
    throw UsageError("config: file_cap must be positive");
  }
  if (merge_threshold < 2) {
    throw UsageError("config: merge_threshold must be at least 2");
  }
  if (zlib_level < 0 || zlib_level > 9) {
    throw UsageError("config: zlib_level must be in [0, 9]");
  }
  if (t_max < 2) {
    throw UsageError("config: t_max must be at least 2");
  }
  if (!(retune_threshold >= 0)) {
    throw UsageError("config: retune_threshold must be non-negative");
  }
}

EngineConfig EngineConfig::parse(std::string_view text)
{
  EngineConfig c;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    std::string_view v = trim(line.substr(eq + 1));
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
      v = v.substr(1, v.size() - 2);
    }

    if (key == "block_tokens") {
      c.block_tokens = parse_uint<std::size_t>(key, v);
    } else if (key == "buffer_bytes") {
      c.shape.buffer_bytes = parse_uint<std::uint64_t>(key, v);
    } else if (key == "size_ratio") {
      c.shape.size_ratio = parse_uint<std::uint32_t>(key, v);
    } else if (key == "runs_per_level") {
      c.shape.runs_per_level = parse_uint<std::uint32_t>(key, v);
    } else if (key == "bloom_bits_per_key") {
      c.shape.bloom_bits_per_key = parse_uint<std::uint32_t>(key, v);
    } else if (key == "file_cap") {
      c.file_cap = parse_uint<std::uint64_t>(key, v);
    } else if (key == "merge_threshold") {
      c.merge_threshold = parse_uint<std::size_t>(key, v);
    } else if (key == "codec") {
      c.codec = parse_codec(v);
    } else if (key == "zlib_level") {
      c.zlib_level = parse_uint<int>(key, v);
    } else if (key == "controller") {
      c.controller_enabled = parse_bool(key, v);
    } else if (key == "window_min") {
      c.window_min = parse_uint<std::uint64_t>(key, v);
    } else if (key == "retune_threshold") {
      c.retune_threshold = parse_double(key, v);
    } else if (key == "t_max") {
      c.t_max = parse_uint<std::uint32_t>(key, v);
    } else {
      throw UsageError("config: unknown key '" + std::string(key) + "'");
    }
  }
  c.validate();
  return c;
}

EngineConfig EngineConfig::load(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read config " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string EngineConfig::to_string() const
{
  char threshold[32];
  const auto [end, ec] = std::to_chars(threshold, threshold + sizeof(threshold), retune_threshold);
  std::ostringstream out;
  out << "block_tokens = " << block_tokens << "\n"
      << "buffer_bytes = " << shape.buffer_bytes << "\n"
      << "size_ratio = " << shape.size_ratio << "\n"
      << "runs_per_level = " << shape.runs_per_level << "\n"
      << "bloom_bits_per_key = " << shape.bloom_bits_per_key << "\n"
      << "file_cap = " << file_cap << "\n"
      << "merge_threshold = " << merge_threshold << "\n"
      << "codec = " << (codec == CodecId::kRaw ? "raw" : "zlib") << "\n"
      << "zlib_level = " << zlib_level << "\n"
      << "controller = " << (controller_enabled ? "true" : "false") << "\n"
      << "window_min = " << window_min << "\n"
      << "retune_threshold = " << std::string_view(threshold, end - threshold) << "\n"
      << "t_max = " << t_max << "\n";
  return out.str();
}

void EngineConfig::save(const std::filesystem::path& path) const
{
  const std::string text = to_string();
  util::write_file_synced(path, as_bytes(text));
}

}  // namespace kvlsm
