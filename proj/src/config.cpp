#include "dpdlab/config.hpp"

#include <json.hpp>
#include <numbers>
#include <set>

#include "dpdlab/error.hpp"
#include "dpdlab/serialize.hpp"

namespace dpdlab::config {

using nlohmann::json;

dut::PaModel default_pa() {
  dut::PaModel pa(3);
  const cplx a1[] = {{1.0, 0.0}, {0.06, -0.03}, {-0.025, 0.01}, {0.008, 0.0}};
  const cplx a3[] = {{-0.319, 0.073}, {-0.04, 0.015}, {0.015, -0.008}, {-0.006, 0.0}};
  const cplx a5[] = {{0.106, -0.03}, {0.008, 0.0}, {-0.004, 0.0}, {0.0, 0.0}};
  const cplx a7[] = {{-0.009, 0.002}, {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
  for (int m = 0; m < 4; ++m) {
    pa.set_coefficient(1, m, a1[m]);
    pa.set_coefficient(3, m, a3[m]);
    pa.set_coefficient(5, m, a5[m]);
    pa.set_coefficient(7, m, a7[m]);
  }
  return pa;
}

ila::StateGrid ExperimentConfig::grid() const { return ila::StateGrid::product(bandwidths_hz, powers_dbm); }

dut::IqPaChain ExperimentConfig::build_chain() const {
  dut::IqPaChain chain;
  chain.iq.gain = this->chain.gain_mismatch;
  chain.iq.phase_rad = this->chain.phase_mismatch_deg * std::numbers::pi / 180.0;
  chain.iq.h_i = this->chain.h_i;
  chain.iq.h_q = this->chain.h_q;
  chain.iq.validate();
  this->chain.base_pa.validate();
  for (int idx : grid().indices()) {
    chain.pa_per_state.emplace(idx, dut::perturb_for_state(this->chain.base_pa, idx, this->chain.perturbation_seed,
                                                           this->chain.perturbation_magnitude,
                                                           this->chain.perturbation_phase_deg));
  }
  return chain;
}

metrics::EvaluationOptions ExperimentConfig::evaluation_options() const {
  metrics::EvaluationOptions o;
  o.psd = psd;
  o.acpr_offset_factor = acpr_offset_factor;
  o.acpr_integration_factor = acpr_integration_factor;
  o.nmse_skip = nmse_skip >= 0 ? static_cast<std::size_t>(nmse_skip)
                               : static_cast<std::size_t>(build_chain().total_memory());
  o.eval_samples = eval_samples;
  o.waveform = waveform;
  o.exec = training.exec;
  return o;
}

namespace {

// Rejects keys outside `allowed`; `where` names the object in diagnostics.
void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(Errc::config, where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw Error(Errc::config, "unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json pa_to_json(const dut::PaModel& pa) {
  json coeffs = json::object();
  for (int k : dut::PaModel::kOrders) {
    json taps = json::array();
    for (int m = 0; m <= pa.memory_length(); ++m) {
      const cplx c = pa.coefficient(k, m);
      taps.push_back({c.real(), c.imag()});
    }
    coeffs[std::to_string(k)] = taps;
  }
  return {{"memory_length", pa.memory_length()}, {"coefficients", coeffs}};
}

dut::PaModel pa_from_json(const json& j) {
  check_keys(j, {"memory_length", "coefficients"}, "chain.pa");
  dut::PaModel pa(j.at("memory_length").get<int>());
  const auto& coeffs = j.at("coefficients");
  check_keys(coeffs, {"1", "3", "5", "7"}, "chain.pa.coefficients");
  for (auto it = coeffs.begin(); it != coeffs.end(); ++it) {
    const int order = std::stoi(it.key());
    const auto& taps = it.value();
    if (!taps.is_array() || taps.size() > static_cast<std::size_t>(pa.memory_length() + 1)) {
      throw Error(Errc::config, "order-" + it.key() + " taps exceed the PA memory length");
    }
    for (std::size_t m = 0; m < taps.size(); ++m) {
      const auto& t = taps[m];
      if (!t.is_array() || t.size() != 2) throw Error(Errc::config, "PA coefficients are [re, im] pairs");
      pa.set_coefficient(order, static_cast<int>(m), cplx(t[0].get<double>(), t[1].get<double>()));
    }
  }
  pa.validate();
  return pa;
}

}  // namespace

std::string dump_config(const ExperimentConfig& c) {
  json j;
  j["schema"] = kSchema;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  std::vector<double> bw_mhz;
  for (double b : c.bandwidths_hz) bw_mhz.push_back(b / 1e6);
  j["grid"] = {{"bandwidths_mhz", bw_mhz}, {"powers_dbm", c.powers_dbm}};
  j["waveform"] = {{"sample_rate_hz", c.waveform.sample_rate_hz},
                   {"modulation_order", c.waveform.modulation_order},
                   {"occupancy", c.waveform.occupancy},
                   {"subcarrier_spacing_hz", c.waveform.subcarrier_spacing_hz},
                   {"reference_power_dbm", c.waveform.reference_power_dbm},
                   {"reference_rms", c.waveform.reference_rms},
                   {"train_samples", c.train_samples},
                   {"test_samples", c.test_samples},
                   {"eval_samples", c.eval_samples}};
  j["chain"] = {{"gain_mismatch", c.chain.gain_mismatch},
                {"phase_mismatch_deg", c.chain.phase_mismatch_deg},
                {"h_i", c.chain.h_i},
                {"h_q", c.chain.h_q},
                {"pa", pa_to_json(c.chain.base_pa)},
                {"perturbation",
                 {{"seed", c.chain.perturbation_seed},
                  {"magnitude_fraction", c.chain.perturbation_magnitude},
                  {"phase_deg", c.chain.perturbation_phase_deg}}}};
  std::vector<std::string> kinds;
  for (auto k : c.models.kinds) kinds.emplace_back(dpd::to_string(k));
  j["models"] = {{"memory_length", c.models.memory_length},
                 {"main_dims", c.models.main_dims},
                 {"hyper_hidden_dims", c.models.hyper_hidden_dims},
                 {"kinds", kinds},
                 {"fixed_state_train_states", c.models.fixed_state_train_states}};
  j["training"] = {{"epochs", c.training.epochs},
                   {"batch_size", c.training.batch_size},
                   {"learning_rate", c.training.adam.learning_rate},
                   {"beta1", c.training.adam.beta1},
                   {"beta2", c.training.adam.beta2},
                   {"epsilon", c.training.adam.epsilon},
                   {"lr_decay_at", c.training.lr_decay_at},
                   {"lr_decay_factor", c.training.lr_decay_factor},
                   {"ila_iterations", c.training.ila_iterations},
                   {"parallel", c.training.exec == Exec::parallel}};
  j["metrics"] = {{"psd_segment_length", c.psd.segment_length},
                  {"psd_overlap", c.psd.overlap_fraction},
                  {"acpr_offset_factor", c.acpr_offset_factor},
                  {"acpr_integration_factor", c.acpr_integration_factor},
                  {"nmse_skip", c.nmse_skip}};
  return j.dump(2) + "\n";
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  try {
    const json j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    check_keys(j, {"schema", "seed", "output_dir", "grid", "waveform", "chain", "models", "training", "metrics"},
               "config");
    if (!j.contains("schema") || j.at("schema") != kSchema) {
      throw Error(Errc::config, std::string("schema must be \"") + kSchema + "\"");
    }
    read(j, "seed", c.seed);
    read(j, "output_dir", c.output_dir);

    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      check_keys(g, {"bandwidths_mhz", "powers_dbm"}, "grid");
      if (g.contains("bandwidths_mhz")) {
        c.bandwidths_hz.clear();
        for (double b : g.at("bandwidths_mhz").get<std::vector<double>>()) c.bandwidths_hz.push_back(b * 1e6);
      }
      read(g, "powers_dbm", c.powers_dbm);
    }
    if (j.contains("waveform")) {
      const auto& w = j.at("waveform");
      check_keys(w, {"sample_rate_hz", "modulation_order", "occupancy", "subcarrier_spacing_hz",
                     "reference_power_dbm", "reference_rms", "train_samples", "test_samples", "eval_samples"},
                 "waveform");
      read(w, "sample_rate_hz", c.waveform.sample_rate_hz);
      read(w, "modulation_order", c.waveform.modulation_order);
      read(w, "occupancy", c.waveform.occupancy);
      read(w, "subcarrier_spacing_hz", c.waveform.subcarrier_spacing_hz);
      read(w, "reference_power_dbm", c.waveform.reference_power_dbm);
      read(w, "reference_rms", c.waveform.reference_rms);
      read(w, "train_samples", c.train_samples);
      read(w, "test_samples", c.test_samples);
      read(w, "eval_samples", c.eval_samples);
    }
    if (j.contains("chain")) {
      const auto& ch = j.at("chain");
      check_keys(ch, {"gain_mismatch", "phase_mismatch_deg", "h_i", "h_q", "pa", "perturbation"}, "chain");
      read(ch, "gain_mismatch", c.chain.gain_mismatch);
      read(ch, "phase_mismatch_deg", c.chain.phase_mismatch_deg);
      read(ch, "h_i", c.chain.h_i);
      read(ch, "h_q", c.chain.h_q);
      if (ch.contains("pa")) c.chain.base_pa = pa_from_json(ch.at("pa"));
      if (ch.contains("perturbation")) {
        const auto& p = ch.at("perturbation");
        check_keys(p, {"seed", "magnitude_fraction", "phase_deg"}, "chain.perturbation");
        read(p, "seed", c.chain.perturbation_seed);
        read(p, "magnitude_fraction", c.chain.perturbation_magnitude);
        read(p, "phase_deg", c.chain.perturbation_phase_deg);
      }
    }
    if (j.contains("models")) {
      const auto& m = j.at("models");
      check_keys(m, {"memory_length", "main_dims", "hyper_hidden_dims", "kinds", "fixed_state_train_states"},
                 "models");
      read(m, "memory_length", c.models.memory_length);
      read(m, "main_dims", c.models.main_dims);
      read(m, "hyper_hidden_dims", c.models.hyper_hidden_dims);
      if (m.contains("kinds")) {
        c.models.kinds.clear();
        for (const auto& k : m.at("kinds")) c.models.kinds.push_back(dpd::kind_from_string(k.get<std::string>()));
      }
      read(m, "fixed_state_train_states", c.models.fixed_state_train_states);
    }
    if (j.contains("training")) {
      const auto& t = j.at("training");
      check_keys(t, {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "lr_decay_at",
                     "lr_decay_factor", "ila_iterations", "parallel"},
                 "training");
      read(t, "epochs", c.training.epochs);
      read(t, "batch_size", c.training.batch_size);
      read(t, "learning_rate", c.training.adam.learning_rate);
      read(t, "beta1", c.training.adam.beta1);
      read(t, "beta2", c.training.adam.beta2);
      read(t, "epsilon", c.training.adam.epsilon);
      read(t, "lr_decay_at", c.training.lr_decay_at);
      read(t, "lr_decay_factor", c.training.lr_decay_factor);
      read(t, "ila_iterations", c.training.ila_iterations);
      if (t.contains("parallel")) c.training.exec = t.at("parallel").get<bool>() ? Exec::parallel : Exec::serial;
    }
    if (j.contains("metrics")) {
      const auto& m = j.at("metrics");
      check_keys(m, {"psd_segment_length", "psd_overlap", "acpr_offset_factor", "acpr_integration_factor", "nmse_skip"},
                 "metrics");
      read(m, "psd_segment_length", c.psd.segment_length);
      read(m, "psd_overlap", c.psd.overlap_fraction);
      read(m, "acpr_offset_factor", c.acpr_offset_factor);
      read(m, "acpr_integration_factor", c.acpr_integration_factor);
      read(m, "nmse_skip", c.nmse_skip);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::config, std::string("config parse error: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::config) throw;
    throw Error(Errc::config, e.what());
  }
  if (c.train_samples == 0 || c.eval_samples == 0) throw Error(Errc::config, "sample counts must be positive");
  if (c.bandwidths_hz.empty() || c.powers_dbm.empty()) throw Error(Errc::config, "grid must be non-empty");
  if (c.training.epochs == 0 || c.training.batch_size == 0) throw Error(Errc::config, "epochs and batch size must be positive");
  if (c.models.kinds.empty()) throw Error(Errc::config, "models.kinds must list at least one kind");
  try {
    c.grid();
    c.build_chain();
  } catch (const Error& e) {
    throw Error(Errc::config, e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text_file(path);
  } catch (const Error& e) {
    throw Error(Errc::config, e.what());
  }
  return parse_config(text);
}

}  // namespace dpdlab::config
