#include "dpdlab/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "dpdlab/error.hpp"
#include "dpdlab/serialize.hpp"

namespace dpdlab::experiment {

namespace fs = std::filesystem;
using config::ExperimentConfig;

namespace {

std::string suffix(std::uint64_t seed) {
  return "_v" + std::to_string(io::kModelFormatVersion) + "_s" + std::to_string(seed);
}

std::uint64_t kind_salt(dpd::ModelKind kind) { return static_cast<std::uint64_t>(kind) + 1; }

// File-name friendly label ("no-DPD" and kind names already are).
std::string file_label(const std::string& label) {
  std::string out;
  for (char ch : label) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-') ? ch : '_';
  return out;
}

struct Logger {
  std::ostream* os;
  template <typename... Args>
  void operator()(const char* fmt, Args... args) const {
    if (!os) return;
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    *os << buf << '\n';
    os->flush();
  }
};

// Remembers what a stage wrote so a failed reproduce can undo it.
struct Journal {
  std::vector<fs::path> files;
  void add(const fs::path& p) { files.push_back(p); }
  void rollback() noexcept {
    for (auto it = files.rbegin(); it != files.rend(); ++it) {
      std::error_code ec;
      fs::remove(*it, ec);
    }
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create directory " + dir.string() + ": " + ec.message());
}

ila::Dataset load_cache(const ExperimentConfig& cfg, const ArtifactPaths& paths) {
  if (!fs::exists(paths.dataset())) {
    throw Error(Errc::missing_artifacts, "dataset cache not found: " + paths.dataset().string() + " (run gen-data)");
  }
  ila::Dataset ds = io::load_dataset(paths.dataset());
  if (ds.train_length != cfg.train_samples || ds.length() != cfg.train_samples + cfg.test_samples ||
      ds.grid.size() != cfg.grid().size()) {
    throw Error(Errc::missing_artifacts, "dataset cache does not match the config; rerun gen-data");
  }
  return ds;
}

Journal* g_journal = nullptr;  // set only while cmd_reproduce runs

void record(const fs::path& p) {
  if (g_journal) g_journal->add(p);
}

}  // namespace

fs::path ArtifactPaths::config() const { return dir / ("config" + suffix(seed) + ".json"); }
fs::path ArtifactPaths::dataset() const { return dir / ("dataset" + suffix(seed) + ".bin"); }
fs::path ArtifactPaths::model(dpd::ModelKind kind) const {
  return dir / ("model_" + std::string(dpd::to_string(kind)) + suffix(seed) + ".json");
}
fs::path ArtifactPaths::loss(dpd::ModelKind kind) const {
  return dir / ("loss_" + std::string(dpd::to_string(kind)) + suffix(seed) + ".csv");
}
fs::path ArtifactPaths::metrics() const { return dir / ("metrics" + suffix(seed) + ".csv"); }
fs::path ArtifactPaths::summary() const { return dir / ("summary" + suffix(seed) + ".json"); }
fs::path ArtifactPaths::psd_dir() const { return dir / "psd"; }
fs::path ArtifactPaths::psd(int state_index, const std::string& label) const {
  return psd_dir() / ("psd_state" + std::to_string(state_index) + "_" + file_label(label) + suffix(seed) + ".csv");
}

ArtifactPaths artifact_paths(const ExperimentConfig& cfg, const fs::path& out_dir) {
  return {out_dir.empty() ? fs::path(cfg.output_dir) : out_dir, cfg.seed};
}

std::uint64_t dataset_seed(std::uint64_t master) { return mix_seed(master, 0x1000); }
std::uint64_t init_seed(std::uint64_t master, dpd::ModelKind kind) { return mix_seed(master, 0x2000 + kind_salt(kind)); }
std::uint64_t train_seed(std::uint64_t master, dpd::ModelKind kind) { return mix_seed(master, 0x3000 + kind_salt(kind)); }
std::uint64_t test_seed(std::uint64_t master) { return mix_seed(master, 0x4000); }

std::vector<int> training_states(const ExperimentConfig& cfg, dpd::ModelKind kind) {
  const auto all = cfg.grid().indices();
  if (dpd::uses_state(kind) || cfg.models.fixed_state_train_states.empty()) return all;
  const std::set<int> valid(all.begin(), all.end());
  for (int i : cfg.models.fixed_state_train_states) {
    if (!valid.count(i)) throw Error(Errc::config, "fixed_state_train_states lists unknown state " + std::to_string(i));
  }
  return cfg.models.fixed_state_train_states;
}

fs::path cmd_gen_data(const ExperimentConfig& cfg, const RunOptions& opts) {
  const Logger log{opts.log};
  const auto paths = artifact_paths(cfg, opts.out_dir);
  ensure_dir(paths.dir);
  const auto chain = cfg.build_chain();
  const auto grid = cfg.grid();
  const std::size_t length = cfg.train_samples + cfg.test_samples;
  const auto ds = ila::build_dataset(chain, grid, cfg.waveform, length, cfg.train_samples, dataset_seed(cfg.seed));

  io::write_text_file(paths.config(), config::dump_config(cfg));
  record(paths.config());
  io::save_dataset(paths.dataset(), ds);
  record(paths.dataset());

  log("dataset: %zu states x %zu samples (%zu train / %zu test) -> %s", ds.states.size(), length, cfg.train_samples,
      cfg.test_samples, paths.dataset().string().c_str());
  for (const auto& st : ds.states) {
    log("  state %d  bw %5.1f MHz  p %6.1f dBm  G = %.5f%+.5fj  rms(s) = %.4f  rms(y_norm) = %.4f", st.state_index,
        st.op.bandwidth_hz / 1e6, st.op.power_dbm, st.gain.real(), st.gain.imag(),
        rms(std::span<const cplx>(st.target)), rms(std::span<const cplx>(st.input)));
  }
  return paths.dataset();
}

fs::path cmd_train(const ExperimentConfig& cfg, dpd::ModelKind kind, const RunOptions& opts) {
  const Logger log{opts.log};
  const auto paths = artifact_paths(cfg, opts.out_dir);
  const auto full = load_cache(cfg, paths);
  const auto states = training_states(cfg, kind);
  const auto ds = full.subset(states);

  std::optional<std::vector<std::size_t>> hyper;
  if (kind == dpd::ModelKind::hn_r2tdnn) hyper = cfg.models.hyper_hidden_dims;
  auto model = dpd::build_model(kind, cfg.models.memory_length, cfg.models.main_dims, hyper, init_seed(cfg.seed, kind));

  auto tcfg = cfg.training;
  tcfg.seed = train_seed(cfg.seed, kind);
  dut::IqPaChain chain;
  const bool needs_chain = tcfg.ila_iterations > 1;
  if (needs_chain) chain = cfg.build_chain();

  std::string state_list;
  for (int s : states) state_list += (state_list.empty() ? "" : ",") + std::to_string(s);
  log("train %s: %zu params, states {%s}, %zu epochs, batch %zu", dpd::to_string(kind), model.param_count(),
      state_list.c_str(), tcfg.epochs, tcfg.effective_batch(states.size()));

  const auto result = ila::train_ila(model, ds, tcfg, needs_chain ? &chain : nullptr);
  if (!result.history.empty()) {
    log("  final loss %.6g (epoch %zu)", result.history.back().total, result.history.back().epoch);
  }

  io::save_model(paths.model(kind), model);
  record(paths.model(kind));
  std::ostringstream loss;
  io::write_loss_csv(loss, result);
  io::write_text_file(paths.loss(kind), loss.str());
  record(paths.loss(kind));
  return paths.model(kind);
}

fs::path cmd_evaluate(const ExperimentConfig& cfg, const std::vector<fs::path>& model_files, const RunOptions& opts) {
  const Logger log{opts.log};
  const auto paths = artifact_paths(cfg, opts.out_dir);
  std::vector<fs::path> files = model_files;
  if (files.empty()) {
    for (auto k : cfg.models.kinds) files.push_back(paths.model(k));
  }
  std::vector<dpd::DpdModel> models;
  std::vector<std::string> labels;
  for (const auto& f : files) {
    if (!fs::exists(f)) throw Error(Errc::missing_artifacts, "model file not found: " + f.string() + " (run train)");
    models.push_back(io::load_model(f));
    std::string label = dpd::to_string(models.back().kind());
    // Two models of one kind stay distinguishable in the report.
    if (std::find(labels.begin(), labels.end(), label) != labels.end()) label += "#" + std::to_string(labels.size());
    labels.push_back(label);
  }
  std::vector<metrics::NamedModel> named;
  for (std::size_t i = 0; i < models.size(); ++i) named.push_back({labels[i], &models[i]});

  auto opt = cfg.evaluation_options();
  opt.keep_psd = true;
  const auto chain = cfg.build_chain();
  const auto eval = metrics::evaluate_models(chain, named, cfg.grid(), test_seed(cfg.seed), opt);

  ensure_dir(paths.psd_dir());
  std::ostringstream csv;
  metrics::write_metrics_csv(csv, eval.reports);
  io::write_text_file(paths.metrics(), csv.str());
  record(paths.metrics());
  for (const auto& trace : eval.psd) {
    std::ostringstream p;
    metrics::write_psd_csv(p, trace.psd);
    const auto path = paths.psd(trace.state_index, trace.label);
    io::write_text_file(path, p.str());
    record(path);
  }

  for (const auto& r : eval.reports) {
    log("%-10s  mean NMSE %8.3f dB  mean ACPR %8.3f dBc", r.model.c_str(), r.mean_nmse_db(), r.mean_acpr_db());
  }
  log("metrics -> %s", paths.metrics().string().c_str());
  return paths.metrics();
}

std::vector<ModelSummary> summarize(const std::vector<metrics::MetricsReport>& reports) {
  std::vector<ModelSummary> rows;
  for (const auto& r : reports) rows.push_back({r.model, r.mean_nmse_db(), r.mean_acpr_db()});
  return rows;
}

std::string summary_json(const ExperimentConfig& cfg, const std::vector<ModelSummary>& rows) {
  using nlohmann::json;
  json j;
  j["schema"] = config::kSchema;
  j["seed"] = cfg.seed;
  j["states"] = cfg.grid().size();
  json models = json::array();
  for (const auto& r : rows) {
    models.push_back({{"model", r.model}, {"mean_nmse_db", r.mean_nmse_db}, {"mean_acpr_db", r.mean_acpr_db}});
  }
  j["models"] = models;

  // Improvement of the state-aware hypernetwork model (or the last one listed)
  // over every other entry; positive means better.
  const ModelSummary* ref = nullptr;
  for (const auto& r : rows) {
    if (r.model == dpd::to_string(dpd::ModelKind::hn_r2tdnn)) ref = &r;
  }
  if (!ref && !rows.empty()) ref = &rows.back();
  if (ref) {
    json cmp = json::array();
    for (const auto& r : rows) {
      if (&r == ref) continue;
      cmp.push_back({{"reference", ref->model},
                     {"versus", r.model},
                     {"nmse_improvement_db", r.mean_nmse_db - ref->mean_nmse_db},
                     {"acpr_improvement_db", r.mean_acpr_db - ref->mean_acpr_db}});
    }
    j["comparisons"] = cmp;
  }
  return j.dump(2) + "\n";
}

fs::path cmd_reproduce(const ExperimentConfig& cfg, const RunOptions& opts) {
  const Logger log{opts.log};
  const auto paths = artifact_paths(cfg, opts.out_dir);
  const bool fresh_dir = !fs::exists(paths.dir);
  Journal journal;
  g_journal = &journal;
  try {
    cmd_gen_data(cfg, opts);
    std::vector<fs::path> model_files;
    for (auto k : cfg.models.kinds) model_files.push_back(cmd_train(cfg, k, opts));
    const auto metrics_path = cmd_evaluate(cfg, model_files, opts);
    const auto reports = read_metrics_csv(io::read_text_file(metrics_path));
    io::write_text_file(paths.summary(), summary_json(cfg, summarize(reports)));
    record(paths.summary());
    log("summary -> %s", paths.summary().string().c_str());
  } catch (...) {
    g_journal = nullptr;
    journal.rollback();
    if (fresh_dir) {
      std::error_code ec;
      fs::remove(paths.psd_dir(), ec);
      fs::remove(paths.dir, ec);
    }
    throw;
  }
  g_journal = nullptr;
  return paths.summary();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<metrics::MetricsReport> read_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<metrics::MetricsReport> reports;
  std::map<std::string, std::size_t> where;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (header) {
      if (f.size() != 8 || f[0] != "state_index") throw Error(Errc::io, "unexpected metrics CSV header");
      header = false;
      continue;
    }
    if (f.size() != 8) throw Error(Errc::io, "malformed metrics CSV row: " + line);
    metrics::StateMetrics m;
    try {
      m.state_index = std::stoi(f[0]);
      m.bandwidth_hz = std::stod(f[1]) * 1e6;
      m.power_dbm = std::stod(f[2]);
      m.nmse_db = std::stod(f[4]);
      m.acpr = {std::stod(f[5]), std::stod(f[6]), std::stod(f[7])};
    } catch (const std::exception&) {
      throw Error(Errc::io, "malformed metrics CSV row: " + line);
    }
    auto [it, inserted] = where.emplace(f[3], reports.size());
    if (inserted) reports.push_back({f[3], {}});
    reports[it->second].states.push_back(m);
  }
  return reports;
}

}  // namespace dpdlab::experiment
