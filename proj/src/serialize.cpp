#include "dpdlab/serialize.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "dpdlab/error.hpp"

namespace dpdlab::io {

using nlohmann::json;

namespace {

json layers_json(const nn::Mlp& net) {
  json arr = json::array();
  for (const auto& l : net.layers()) {
    arr.push_back({{"in", l.in_dim}, {"out", l.out_dim}, {"activation", nn::to_string(l.activation)}});
  }
  return arr;
}

void append_layout(json& layout, const std::string& block, const nn::Mlp& net, std::size_t base) {
  for (std::size_t r = 0; r < net.depth(); ++r) {
    const auto& l = net.layers()[r];
    const auto& s = net.slice(r);
    layout.push_back({{"block", block},
                      {"layer", r},
                      {"weights", {base + s.weights, l.in_dim * l.out_dim}},
                      {"bias", {base + s.bias, l.out_dim}}});
  }
}

}  // namespace

std::string model_to_string(const dpd::DpdModel& model) {
  json j;
  j["format"] = "dpd-lab-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = dpd::to_string(model.kind());
  j["memory_length"] = model.memory_length();
  j["main_dims"] = model.main_dims();
  j["hyper_hidden_dims"] = model.hyper_hidden_dims();
  j["normalization"] = {{"bw_max_hz", model.bw_max_hz}, {"p_max_dbm", model.p_max_dbm}};
  j["trained_states"] = model.trained_states;
  j["trunk_layers"] = layers_json(model.trunk());
  if (model.has_hyper()) j["hyper_layers"] = layers_json(model.hyper());

  json layout = json::array();
  append_layout(layout, "trunk", model.trunk(), model.trunk_offset());
  if (model.head_size() > 0) {
    layout.push_back({{"block", "head"},
                      {"layer", 0},
                      {"weights", {model.head_offset(), 2 * model.hidden_dim()}},
                      {"bias", {model.head_offset() + 2 * model.hidden_dim(), 2}}});
  }
  if (model.shortcut_size() > 0) {
    layout.push_back({{"block", "shortcut"}, {"layer", 0}, {"weights", {model.shortcut_offset(), 4}}});
  }
  if (model.has_hyper()) append_layout(layout, "hyper", model.hyper(), model.hyper_offset());
  j["layout"] = layout;
  j["param_count"] = model.param_count();
  j["params"] = std::vector<double>(model.params().begin(), model.params().end());
  return j.dump(1) + "\n";
}

dpd::DpdModel model_from_string(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "dpd-lab-model") throw Error(Errc::io, "not a dpd-lab model file");
    if (j.at("version").get<int>() != kModelFormatVersion) throw Error(Errc::io, "unsupported model file version");
    dpd::DpdModel model(dpd::kind_from_string(j.at("kind").get<std::string>()), j.at("memory_length").get<int>(),
                        j.at("main_dims").get<std::vector<std::size_t>>(),
                        j.at("hyper_hidden_dims").get<std::vector<std::size_t>>());
    const auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != model.param_count() || j.at("param_count").get<std::size_t>() != params.size()) {
      throw Error(Errc::io, "parameter count does not match the declared architecture");
    }
    std::copy(params.begin(), params.end(), model.params().begin());
    model.bw_max_hz = j.at("normalization").at("bw_max_hz").get<double>();
    model.p_max_dbm = j.at("normalization").at("p_max_dbm").get<double>();
    model.trained_states = j.at("trained_states").get<std::vector<int>>();
    return model;
  } catch (const json::exception& e) {
    throw Error(Errc::io, std::string("malformed model file: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::io) throw;
    throw Error(Errc::io, std::string("invalid model file: ") + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(Errc::io, "cannot write " + tmp);
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw Error(Errc::io, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::io, "cannot move " + tmp + " to " + path.string() + ": " + ec.message());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void save_model(const std::filesystem::path& path, const dpd::DpdModel& model) {
  write_text_file(path, model_to_string(model));
}

dpd::DpdModel load_model(const std::filesystem::path& path) { return model_from_string(read_text_file(path)); }

namespace {

constexpr char kMagic[8] = {'D', 'P', 'D', 'L', 'A', 'B', 'D', 'S'};

static_assert(std::endian::native == std::endian::little, "dataset cache assumes a little-endian host");

template <typename T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw Error(Errc::io, "dataset cache is truncated");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void put_signal(std::string& buf, const std::vector<cplx>& x) {
  for (const auto& v : x) {
    put(buf, v.real());
    put(buf, v.imag());
  }
}

std::vector<cplx> take_signal(const std::string& buf, std::size_t& pos, std::size_t n) {
  std::vector<cplx> x(n);
  for (auto& v : x) {
    const double re = take<double>(buf, pos);
    const double im = take<double>(buf, pos);
    v = cplx(re, im);
  }
  return x;
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const ila::Dataset& ds) {
  json header;
  header["sample_rate_hz"] = ds.sample_rate_hz;
  header["length"] = ds.length();
  header["train_length"] = ds.train_length;
  json grid = json::array();
  for (int idx : ds.grid.indices()) {
    grid.push_back({{"bandwidth_hz", ds.grid.at(idx).bandwidth_hz}, {"power_dbm", ds.grid.at(idx).power_dbm}});
  }
  header["grid"] = grid;
  json states = json::array();
  for (const auto& s : ds.states) {
    states.push_back({{"state_index", s.state_index},
                      {"seed", s.seed},
                      {"gain", {s.gain.real(), s.gain.imag()}},
                      {"c", s.c.c}});
  }
  header["states"] = states;
  const std::string h = header.dump();

  std::string buf(kMagic, sizeof kMagic);
  put<std::uint32_t>(buf, kDatasetFormatVersion);
  put<std::uint64_t>(buf, h.size());
  buf += h;
  for (const auto& s : ds.states) {
    put_signal(buf, s.input);
    put_signal(buf, s.target);
  }
  write_text_file(path, buf);
}

ila::Dataset load_dataset(const std::filesystem::path& path) {
  const std::string buf = read_text_file(path);
  if (buf.size() < sizeof kMagic || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(Errc::io, path.string() + " is not a dataset cache");
  }
  std::size_t pos = sizeof kMagic;
  if (take<std::uint32_t>(buf, pos) != kDatasetFormatVersion) throw Error(Errc::io, "unsupported dataset cache version");
  const auto hlen = take<std::uint64_t>(buf, pos);
  if (pos + hlen > buf.size()) throw Error(Errc::io, "dataset cache is truncated");
  try {
    const json header = json::parse(buf.substr(pos, hlen));
    pos += hlen;
    std::vector<ila::OperatingState> ops;
    for (const auto& g : header.at("grid")) ops.push_back({g.at("bandwidth_hz"), g.at("power_dbm")});
    ila::Dataset ds;
    ds.grid = ila::StateGrid(ops);
    ds.sample_rate_hz = header.at("sample_rate_hz");
    ds.train_length = header.at("train_length");
    const std::size_t n = header.at("length");
    for (const auto& s : header.at("states")) {
      ila::StateRecord rec;
      rec.state_index = s.at("state_index");
      rec.op = ds.grid.at(rec.state_index);
      rec.seed = s.at("seed");
      rec.gain = cplx(s.at("gain").at(0).get<double>(), s.at("gain").at(1).get<double>());
      rec.c.c = s.at("c").get<std::array<double, dpd::kStateDim>>();
      rec.input = take_signal(buf, pos, n);
      rec.target = take_signal(buf, pos, n);
      ds.states.push_back(std::move(rec));
    }
    if (pos != buf.size()) throw Error(Errc::io, "dataset cache has trailing bytes");
    return ds;
  } catch (const json::exception& e) {
    throw Error(Errc::io, std::string("malformed dataset header: ") + e.what());
  }
}

void write_loss_csv(std::ostream& os, const ila::TrainResult& result) {
  os << "epoch,total_loss";
  for (int idx : result.state_indices) os << ",J_" << idx;
  os << "\r\n";
  char buf[64];
  for (const auto& e : result.history) {
    os << e.epoch;
    std::snprintf(buf, sizeof buf, ",%.17g", e.total);
    os << buf;
    for (double j : e.per_state) {
      std::snprintf(buf, sizeof buf, ",%.17g", j);
      os << buf;
    }
    os << "\r\n";
  }
}

}  // namespace dpdlab::io
