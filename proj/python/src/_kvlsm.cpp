// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

// pybind11 glue over kvlsm::Engine. No engine logic lives here: arguments are
// marshaled, the GIL is released around every engine call and engine errors
// are re-raised as the matching Python exception type.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <type_traits>
#include <vector>

#include "kvlsm/engine.hpp"
#include "kvlsm/error.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;

namespace {

using kvlsm::Engine;
using kvlsm::TokenId;

// Directories with an open handle in this process.
std::mutex g_open_mu;
std::set<std::string> g_open_dirs;

std::vector<TokenId> to_tokens(const py::handle& obj)
{
  std::vector<TokenId> out;
  // Fast path for anything exposing a 1-D integer buffer (array, numpy).
  if (py::isinstance<py::buffer>(obj) && !py::isinstance<py::bytes>(obj)) {
    const py::buffer_info info = py::reinterpret_borrow<py::buffer>(obj).request();
    if (info.ndim != 1) {
      throw kvlsm::UsageError("tokens must be one-dimensional");
    }
    const auto n = static_cast<std::size_t>(info.shape[0]);
    out.reserve(n);
    auto take = [&](auto* p) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = *reinterpret_cast<const decltype(p)>(static_cast<const char*>(info.ptr) +
                                                           static_cast<py::ssize_t>(i) * info.strides[0]);
        if constexpr (std::is_signed_v<decltype(v)>) {
          if (v < 0) {
            throw kvlsm::UsageError("token id out of 32-bit range");
          }
        }
        if (static_cast<std::uint64_t>(v) > 0xffffffffULL) {
          throw kvlsm::UsageError("token id out of 32-bit range");
        }
        out.push_back(static_cast<TokenId>(v));
      }
    };
    const char f = info.format.empty() ? '?' : info.format.back();
    const bool is_signed = f == 'i' || f == 'l' || f == 'q';
    const bool is_unsigned = f == 'I' || f == 'L' || f == 'Q';
    if (is_signed && info.itemsize == 4) {
      take(static_cast<const std::int32_t*>(nullptr));
      return out;
    }
    if (is_signed && info.itemsize == 8) {
      take(static_cast<const std::int64_t*>(nullptr));
      return out;
    }
    if (is_unsigned && info.itemsize == 4) {
      take(static_cast<const std::uint32_t*>(nullptr));
      return out;
    }
    if (is_unsigned && info.itemsize == 8) {
      take(static_cast<const std::uint64_t*>(nullptr));
      return out;
    }
    // Other formats fall through to the generic sequence path.
  }
  for (const py::handle item : py::iter(obj)) {
    const auto v = item.cast<long long>();
    if (v < 0 || v > 0xffffffffLL) {
      throw kvlsm::UsageError("token id out of 32-bit range");
    }
    out.push_back(static_cast<TokenId>(v));
  }
  return out;
}

kvlsm::EngineConfig to_config(const py::dict& d)
{
  // Reuse the engine's own `key = value` parser so validation stays in one place.
  std::string text;
  for (const auto& [k, v] : d) {
    std::string value;
    if (py::isinstance<py::bool_>(v)) {
      value = v.cast<bool>() ? "true" : "false";
    } else {
      value = py::str(v).cast<std::string>();
    }
    text += k.cast<std::string>() + " = " + value + "\n";
  }
  return kvlsm::EngineConfig::parse(text);
}

py::dict stats_dict(const kvlsm::OpStats& s)
{
  py::dict d;
  d["writes"] = s.writes;
  d["succeeded_point_reads"] = s.succeeded_point_reads;
  d["range_scans"] = s.range_scans;
  d["zero_result_probes"] = s.zero_result_probes;
  d["put_calls"] = s.put_calls;
  d["probe_calls"] = s.probe_calls;
  d["get_calls"] = s.get_calls;
  d["point_lookups"] = s.point_lookups;
  d["range_scan_entries"] = s.range_scan_entries;
  d["blocks_read"] = s.blocks_read;
  d["bytes_read"] = s.bytes_read;
  d["bytes_written"] = s.bytes_written;
  d["data_block_reads"] = s.data_block_reads;
  d["put_ns"] = s.put_ns;
  d["probe_ns"] = s.probe_ns;
  d["get_ns"] = s.get_ns;
  d["maintenance_ns"] = s.maintenance_ns;
  return d;
}

class Handle {
 public:
  Handle(const std::string& dir, const std::optional<py::dict>& config)
  {
    fs::create_directories(dir);
    key_ = fs::canonical(dir).string();
    {
      std::lock_guard lock(g_open_mu);
      if (!g_open_dirs.insert(key_).second) {
        throw kvlsm::UsageError("directory already has an open handle: " + key_);
      }
    }
    try {
      if (config) {
        const kvlsm::EngineConfig c = to_config(*config);
        py::gil_scoped_release nogil;
        engine_ = Engine::open(key_, c);
      } else if (fs::exists(fs::path(key_) / kvlsm::kEngineConfigName)) {
        py::gil_scoped_release nogil;
        engine_ = Engine::open_existing(key_);
      } else {
        py::gil_scoped_release nogil;
        engine_ = Engine::open(key_, kvlsm::EngineConfig{});
      }
    } catch (...) {
      release_dir();
      throw;
    }
  }

  ~Handle()
  {
    std::unique_lock lock(mu_);
    if (engine_) {
      engine_.reset();
      release_dir();
    }
  }

  void close()
  {
    py::gil_scoped_release nogil;
    std::unique_lock lock(mu_);
    if (!engine_) {
      throw kvlsm::UsageError("engine handle is already closed");
    }
    engine_.reset();
    release_dir();
  }

  bool closed() const
  {
    std::shared_lock lock(mu_);
    return !engine_;
  }

  std::size_t put_batch(const py::handle& tokens, const py::sequence& tensors)
  {
    const std::vector<TokenId> t = to_tokens(tokens);
    // Zero-copy: views point into the caller's buffers, which stay alive
    // (and pinned by `buffers`) for the duration of the call.
    std::vector<py::buffer_info> buffers;
    buffers.reserve(tensors.size());
    std::vector<kvlsm::ByteView> views;
    views.reserve(tensors.size());
    for (const py::handle item : tensors) {
      buffers.push_back(py::reinterpret_borrow<py::buffer>(item).request());
      const py::buffer_info& b = buffers.back();
      if (b.ndim > 1 && b.strides.back() != b.itemsize) {
        throw kvlsm::UsageError("tensor buffers must be C-contiguous");
      }
      views.emplace_back(static_cast<const std::uint8_t*>(b.ptr),
                         static_cast<std::size_t>(b.size * b.itemsize));
    }
    py::gil_scoped_release nogil;
    std::shared_lock lock(mu_);
    return engine().put_batch(t, views);
  }

  std::size_t probe(const py::handle& tokens)
  {
    const std::vector<TokenId> t = to_tokens(tokens);
    py::gil_scoped_release nogil;
    std::shared_lock lock(mu_);
    return engine().probe(t).matched_blocks;
  }

  std::vector<py::bytes> get_batch(const py::handle& tokens, std::size_t upto)
  {
    const std::vector<TokenId> t = to_tokens(tokens);
    std::vector<kvlsm::Bytes> payloads;
    {
      py::gil_scoped_release nogil;
      std::shared_lock lock(mu_);
      payloads = engine().get_batch(t, upto);
    }
    std::vector<py::bytes> out;
    out.reserve(payloads.size());
    for (const auto& p : payloads) {
      out.emplace_back(reinterpret_cast<const char*>(p.data()), p.size());
    }
    return out;
  }

  py::dict maintenance_tick()
  {
    kvlsm::MaintenanceReport r;
    {
      py::gil_scoped_release nogil;
      std::shared_lock lock(mu_);
      r = engine().maintenance_tick();
    }
    py::dict d;
    d["compaction"] = !r.compaction.empty();
    d["merged"] = r.merged;
    d["log_files_before"] = r.log_files_before;
    d["log_files_after"] = r.log_files_after;
    d["records_dropped"] = r.records_dropped;
    d["controller"] =
        r.decision ? py::object(py::str(kvlsm::controller_action_name(r.decision->action)))
                   : py::object(py::none());
    if (r.decision && r.decision->choice) {
      d["size_ratio"] = r.decision->choice->size_ratio;
      d["runs_per_level"] = r.decision->choice->runs_per_level;
    }
    return d;
  }

  py::dict stats(bool total)
  {
    kvlsm::OpStats s;
    {
      std::shared_lock lock(mu_);
      s = total ? engine().total_stats() : engine().snapshot_stats();
    }
    return stats_dict(s);
  }

  std::size_t block_tokens()
  {
    std::shared_lock lock(mu_);
    return engine().block_tokens();
  }

  std::string dir() const { return key_; }

 private:
  Engine& engine() const
  {
    if (!engine_) {
      throw kvlsm::UsageError("engine handle is closed");
    }
    return *engine_;
  }

  void release_dir()
  {
    std::lock_guard lock(g_open_mu);
    g_open_dirs.erase(key_);
  }

  mutable std::shared_mutex mu_;  // close() excludes in-flight calls
  std::unique_ptr<Engine> engine_;
  std::string key_;
};

}  // namespace

PYBIND11_MODULE(_kvlsm, m)
{
  m.doc() = "Native kvlsm engine";

  auto base = py::register_exception<kvlsm::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<kvlsm::UsageError>(m, "UsageError", base.ptr());
  py::register_exception<kvlsm::CorruptionError>(m, "CorruptionError", base.ptr());
  py::register_exception<kvlsm::IoError>(m, "IoError", base.ptr());
  py::register_exception<kvlsm::StaleLocationError>(m, "StaleLocationError", base.ptr());
  py::register_exception<kvlsm::UnrecoverableError>(m, "UnrecoverableError", base.ptr());

  py::class_<Handle>(m, "Engine")
      .def(py::init<const std::string&, const std::optional<py::dict>&>(), py::arg("dir"),
           py::arg("config") = py::none())
      .def("close", &Handle::close)
      .def_property_readonly("closed", &Handle::closed)
      .def_property_readonly("dir", &Handle::dir)
      .def_property_readonly("block_tokens", &Handle::block_tokens)
      .def("put_batch", &Handle::put_batch, py::arg("tokens"), py::arg("tensors"))
      .def("probe", &Handle::probe, py::arg("tokens"))
      .def("get_batch", &Handle::get_batch, py::arg("tokens"), py::arg("upto"))
      .def("maintenance_tick", &Handle::maintenance_tick)
      .def("stats", &Handle::stats, py::arg("total") = false);
}
