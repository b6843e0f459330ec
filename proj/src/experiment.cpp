#include "drainsim/experiment.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace drainsim::experiment {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

struct ParamAccess {
  std::function<void(sim::ScenarioConfig&, double)> set;
  std::function<double(const sim::ScenarioConfig&)> get;
  bool integral = false;
};

const std::map<std::string, ParamAccess>& params() {
  static const std::map<std::string, ParamAccess> table = [] {
    std::map<std::string, ParamAccess> t;
    auto add_int = [&](const std::string& name, int sim::ScenarioConfig::*f) {
      t[name] = {[f](sim::ScenarioConfig& c, double v) {
                   c.*f = static_cast<int>(v);
                 },
                 [f](const sim::ScenarioConfig& c) {
                   return static_cast<double>(c.*f);
                 },
                 true};
    };
    auto add_dbl = [&](const std::string& name,
                       double sim::ScenarioConfig::*f) {
      t[name] = {[f](sim::ScenarioConfig& c, double v) { c.*f = v; },
                 [f](const sim::ScenarioConfig& c) { return c.*f; }, false};
    };
    add_int("n_mue", &sim::ScenarioConfig::n_mue);
    add_int("k_sbs", &sim::ScenarioConfig::k_sbs);
    add_int("a_n", &sim::ScenarioConfig::a_n);
    add_int("a_k", &sim::ScenarioConfig::a_k);
    add_int("b", &sim::ScenarioConfig::b);
    add_int("d_n", &sim::ScenarioConfig::d_n);
    add_int("d_k", &sim::ScenarioConfig::d_k);
    add_int("n_subchannels", &sim::ScenarioConfig::n_subchannels);
    add_int("phi_k_limit", &sim::ScenarioConfig::phi_k_limit);
    add_int("trials", &sim::ScenarioConfig::trials);
    add_int("max_rounds", &sim::ScenarioConfig::max_rounds);
    add_int("max_draining_iters", &sim::ScenarioConfig::max_draining_iters);
    add_dbl("delta_db", &sim::ScenarioConfig::delta_db);
    add_dbl("p_max_mbs_dbm", &sim::ScenarioConfig::p_max_mbs_dbm);
    add_dbl("p_max_sbs_dbm", &sim::ScenarioConfig::p_max_sbs_dbm);
    add_dbl("lambda", &sim::ScenarioConfig::lambda);
    add_dbl("macro_radius_m", &sim::ScenarioConfig::macro_radius_m);
    add_dbl("small_cell_radius_m", &sim::ScenarioConfig::small_cell_radius_m);
    return t;
  }();
  return table;
}

}  // namespace

std::vector<std::string> sweepable_parameters() {
  std::vector<std::string> out;
  for (const auto& [name, access] : params()) out.push_back(name);
  return out;
}

ExperimentSpec parse_spec(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SpecError("", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SpecError("", "spec must be a JSON object");

  ExperimentSpec spec;
  for (const auto& [key, value] : doc.items()) {
    if (key == "base") {
      if (!value.is_object()) throw SpecError("base", "must be an object");
      for (const auto& [bk, bv] : value.items()) {
        if (bk == "seed") {
          if (!bv.is_number_unsigned()) {
            throw SpecError("base.seed", "must be a non-negative integer");
          }
          spec.base.seed = bv.get<std::uint64_t>();
          continue;
        }
        if (bk == "compensate_path_loss") {
          if (!bv.is_boolean()) {
            throw SpecError("base.compensate_path_loss", "must be a boolean");
          }
          spec.base.compensate_path_loss = bv.get<bool>();
          continue;
        }
        if (bk == "split_mode") {
          const std::string s = bv.is_string() ? bv.get<std::string>() : "";
          if (s == "waterfilling") {
            spec.base.split_mode = power::SplitMode::WaterFilling;
          } else if (s == "uniform") {
            spec.base.split_mode = power::SplitMode::Uniform;
          } else {
            throw SpecError("base.split_mode",
                            "must be \"waterfilling\" or \"uniform\"");
          }
          continue;
        }
        if (bk == "strategy") {
          const std::string s = bv.is_string() ? bv.get<std::string>() : "";
          try {
            spec.base.strategy = sim::strategy_from(s);
          } catch (const std::invalid_argument& e) {
            throw SpecError("base.strategy", e.what());
          }
          continue;
        }
        auto it = params().find(bk);
        if (it == params().end()) {
          throw SpecError("base." + bk, "unknown parameter");
        }
        if (!bv.is_number()) {
          throw SpecError("base." + bk, "must be a number");
        }
        const double v = bv.get<double>();
        if (it->second.integral && v != std::floor(v)) {
          throw SpecError("base." + bk, "must be an integer");
        }
        it->second.set(spec.base, v);
      }
    } else if (key == "sweep") {
      if (!value.is_object()) throw SpecError("sweep", "must be an object");
      if (!value.contains("parameter") || !value["parameter"].is_string()) {
        throw SpecError("sweep.parameter", "missing or not a string");
      }
      spec.sweep_parameter = value["parameter"].get<std::string>();
      if (!value.contains("values") || !value["values"].is_array()) {
        throw SpecError("sweep.values", "missing or not an array");
      }
      for (const auto& v : value["values"]) {
        if (!v.is_number()) throw SpecError("sweep.values", "must be numbers");
        spec.sweep_values.push_back(v.get<double>());
      }
    } else if (key == "strategies") {
      if (!value.is_array()) throw SpecError("strategies", "must be an array");
      for (const auto& s : value) {
        if (!s.is_string()) throw SpecError("strategies", "must be strings");
        try {
          spec.strategies.push_back(sim::strategy_from(s.get<std::string>()));
        } catch (const std::invalid_argument& e) {
          throw SpecError("strategies", e.what());
        }
      }
    } else if (key == "output_dir") {
      if (!value.is_string()) throw SpecError("output_dir", "must be a string");
      spec.output_dir = value.get<std::string>();
    } else {
      throw SpecError(key, "unknown top-level key");
    }
  }
  if (spec.strategies.empty()) spec.strategies.push_back(spec.base.strategy);
  return spec;
}

ExperimentSpec load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("", "cannot read spec file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str());
}

std::vector<Diagnostic> validate_spec(const ExperimentSpec& spec) {
  std::vector<Diagnostic> out;
  auto err = [&](const std::string& f, const std::string& m) {
    out.push_back({true, f, m});
  };
  auto warn = [&](const std::string& f, const std::string& m) {
    out.push_back({false, f, m});
  };
  const auto& b = spec.base;
  if (b.trials < 1) err("base.trials", "must be at least 1");
  if (b.n_mue < 0) err("base.n_mue", "must be non-negative");
  if (b.k_sbs < 0) err("base.k_sbs", "must be non-negative");
  if (b.a_n < 1 || b.a_k < 1 || b.b < 1) {
    err("base.antennas", "antenna counts must be positive");
  }
  if (b.d_n < 1 || b.d_k < 1) err("base.streams", "stream counts must be positive");
  if (b.n_subchannels < 1) err("base.n_subchannels", "must be at least 1");
  if (b.phi_k_limit < 1) err("base.phi_k_limit", "must be at least 1");
  if (b.macro_radius_m <= 0 || b.small_cell_radius_m <= 0) {
    err("base.radii", "radii must be positive");
  }
  if (b.max_rounds < 1) err("base.max_rounds", "must be at least 1");

  if (b.phi_k_limit > 4) warn("base.phi_k_limit", "above the usual limit of 4");
  if (b.a_k != 2 && b.a_k != 4) {
    warn("base.a_k", "outside the usual {2, 4} profile");
  }
  if (b.delta_db < 8.0 || b.delta_db > 12.0) {
    warn("base.delta_db", "outside the usual 8-12 dB range");
  }
  if (b.p_max_sbs_dbm < 0.0 || b.p_max_sbs_dbm > 30.0) {
    warn("base.p_max_sbs_dbm", "outside [0, 30] dBm");
  }
  if (b.p_max_mbs_dbm < 30.0 || b.p_max_mbs_dbm > 50.0) {
    warn("base.p_max_mbs_dbm", "outside [30, 50] dBm");
  }

  if (!spec.sweep_parameter.empty()) {
    if (!params().count(spec.sweep_parameter)) {
      err("sweep.parameter", "not a sweepable ScenarioConfig parameter: " +
                                 spec.sweep_parameter);
    }
    if (spec.sweep_values.empty()) err("sweep.values", "must be nonempty");
  }
  if (spec.strategies.empty()) err("strategies", "must be nonempty");
  if (spec.output_dir.empty()) err("output_dir", "must be nonempty");
  return out;
}

sim::ScenarioConfig apply_sweep(const ExperimentSpec& spec, double value) {
  sim::ScenarioConfig cfg = spec.base;
  if (!spec.sweep_parameter.empty()) {
    params().at(spec.sweep_parameter).set(cfg, value);
  }
  return cfg;
}

std::string trial_csv(const std::vector<sim::TrialResult>& trials) {
  std::ostringstream os;
  os << "trial,node_id,kind,rate_bps_hz,dof_used,released,coalition_size,"
        "interference_total_w,interference_in_desired_w\n";
  for (const auto& tr : trials) {
    for (const auto& row : tr.rows) {
      os << tr.trial << ',' << row.node_id << ','
         << (row.is_sue ? "sue" : "mue") << ',' << fmt(row.rate) << ','
         << row.dof_used << ',' << row.released << ',' << row.coalition_size
         << ',' << fmt(row.interference_total) << ','
         << fmt(row.interference_in_desired_subspace) << '\n';
    }
  }
  return os.str();
}

std::string summary_csv_header() {
  return "parameter,value,strategy,avg_payoff_sue,avg_payoff_mue,"
         "avg_coalition_size,avg_coalition_count,"
         "interference_in_desired_subspace_pct\n";
}

std::string summary_csv_row(const std::string& parameter, double value,
                            sim::Strategy strategy,
                            const sim::MetricsReport& rep) {
  std::ostringstream os;
  os << (parameter.empty() ? "-" : parameter) << ',' << fmt(value) << ','
     << sim::strategy_name(strategy) << ',' << fmt(rep.avg_payoff_sue) << ','
     << fmt(rep.avg_payoff_mue) << ',' << fmt(rep.avg_coalition_size) << ','
     << fmt(rep.avg_coalition_count) << ','
     << fmt(rep.interference_in_desired_subspace_pct) << '\n';
  return os.str();
}

namespace {

std::string point_file_name(const ExperimentSpec& spec, double value,
                            sim::Strategy strategy) {
  std::ostringstream os;
  os << (spec.sweep_parameter.empty() ? "run" : spec.sweep_parameter) << '_'
     << fmt(value) << '_' << sim::strategy_name(strategy) << ".csv";
  return os.str();
}

}  // namespace

int run_experiment(const ExperimentSpec& spec, const RunOptions& opts,
                   std::ostream& log) {
  namespace fs = std::filesystem;
  const std::string out_dir =
      opts.output_dir.empty() ? spec.output_dir : opts.output_dir;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    log << "error: cannot create output directory " << out_dir << ": "
        << ec.message() << "\n";
    return 1;
  }

  std::vector<double> values = spec.sweep_values;
  if (values.empty()) {
    values.push_back(spec.sweep_parameter.empty()
                         ? 0.0
                         : params().at(spec.sweep_parameter).get(spec.base));
  }

  std::ostringstream summary;
  summary << summary_csv_header();
  json manifest;
  manifest["seed"] = opts.override_seed ? opts.seed : spec.base.seed;
  manifest["workers"] = opts.workers;
  manifest["sweep_parameter"] = spec.sweep_parameter;
  manifest["version"] = 1;
  json files = json::array();

  for (double value : values) {
    for (sim::Strategy strategy : spec.strategies) {
      sim::ScenarioConfig cfg = apply_sweep(spec, value);
      cfg.strategy = strategy;
      if (opts.override_seed) cfg.seed = opts.seed;

      std::vector<sim::TrialResult> trials;
      try {
        trials = sim::run_trials(cfg, opts.workers);
      } catch (const std::exception& e) {
        log << "error: simulation failed at " << spec.sweep_parameter << "="
            << fmt(value) << " strategy=" << sim::strategy_name(strategy)
            << ": " << e.what() << "\n";
        return 1;
      }
      const sim::MetricsReport rep = sim::aggregate(trials);
      summary << summary_csv_row(spec.sweep_parameter, value, strategy, rep);

      const std::string name = point_file_name(spec, value, strategy);
      std::ofstream csv(fs::path(out_dir) / name, std::ios::binary);
      csv << trial_csv(trials);
      if (!csv) {
        log << "error: cannot write " << name << "\n";
        return 1;
      }
      files.push_back(name);
      log << name << ": avg SUE " << fmt(rep.avg_payoff_sue) << " b/s/Hz, avg MUE "
          << fmt(rep.avg_payoff_mue) << " b/s/Hz\n";
    }
  }

  {
    std::ofstream out(fs::path(out_dir) / "summary.csv", std::ios::binary);
    out << summary.str();
  }
  {
    json base;
    for (const auto& [name, access] : params()) {
      base[name] = access.get(spec.base);
    }
    base["seed"] = spec.base.seed;
    base["compensate_path_loss"] = spec.base.compensate_path_loss;
    manifest["base"] = base;
    json strategies = json::array();
    for (auto s : spec.strategies) strategies.push_back(sim::strategy_name(s));
    manifest["strategies"] = strategies;
    manifest["sweep_values"] = values;
    manifest["files"] = files;
    std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << "\n";
  }
  return 0;
}

}  // namespace drainsim::experiment
