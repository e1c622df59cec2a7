#include "qsd/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "qsd/analysis.hpp"
#include "qsd/errors.hpp"

namespace qsd {

namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string resolve_output_dir(const ExperimentConfig& config, const CommandOptions& options) {
  if (options.out && !options.out->empty()) return *options.out;
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return "qsd-output";
}

std::vector<RunLog> run_replications(const RunSetup& setup, std::uint64_t seed, std::size_t replications,
                                     unsigned threads) {
  setup.validate();
  std::vector<RunLog> logs(replications);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t r = next++; r < replications; r = next++) {
      try {
        Rng rng(replication_seed(seed, r));
        logs[r] = setup.schedule.is_dynamic() ? run_dynamic(setup, rng) : run_deterministic(setup, rng);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(replications)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return logs;
}

OracleResult compute_oracle(const ExperimentConfig& config) {
  const Model model(config.model);
  UniformizationOptions options;
  options.truncation = config.oracle.truncation;
  options.tol = config.oracle.tol;
  const bool point_mass = config.initial.states.size() == 1;

  if (const auto* ti = std::get_if<TransientImmunity>(&config.model)) {
    if (config.oracle.target == "alpha") return {{}, ti_alpha(ti->beta, ti->gamma, ti->delta), "closed_form"};
    throw UnsupportedOracle("no exact limiting conditional distribution is available for transient immunity");
  }
  if (const auto* wf = std::get_if<WrightFisher>(&config.model)) {
    return wf_lcd_power_iteration(wf->population, wf->selection);
  }
  if (const auto* pd = std::get_if<PureDeath>(&config.model); pd && point_mass) {
    return pure_death_lcd(pd->rates, config.initial.states[0]);
  }
  if (const auto* bd = std::get_if<LinearBirthDeath>(&config.model); bd && !(bd->gamma > bd->beta)) {
    throw UnsupportedOracle("gamma <= beta: no limiting conditional distribution");
  }
  return lcd_uniformization(model, config.initial, options);
}

namespace {

std::ofstream open_csv(const fs::path& path, const std::string& header) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << header << '\n';
  return f;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current += c;
    }
  }
  fields.push_back(current);
  return fields;
}

void prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
}

ExperimentConfig with_seed(ExperimentConfig config, const CommandOptions& options) {
  if (options.seed) config.seed = *options.seed;
  return config;
}

void write_failures(const fs::path& path, const std::vector<RunLog>& logs) {
  auto f = open_csv(path, "replication,kind,time,region,message");
  for (std::size_t r = 0; r < logs.size(); ++r) {
    const auto& failure = logs[r].failure;
    if (!failure) continue;
    f << r << ',' << failure->kind << ',' << format_double(failure->time) << ','
      << (failure->region ? std::to_string(*failure->region) : std::string()) << ',' << csv_field(failure->message)
      << '\n';
  }
}

double mean_coordinate(const Distribution& d, const Model& model) {
  double m = 0.0;
  for (const auto& [s, p] : d) m += p * static_cast<double>(model.coordinate(s));
  return m;
}

}  // namespace

void write_histogram(const std::string& path, const Distribution& d, const Model& model) {
  auto f = open_csv(path, "state_code,state,probability");
  for (const auto& [code, p] : d) f << code << ',' << csv_field(model.describe(code)) << ',' << format_double(p) << '\n';
}

std::vector<HistogramRow> read_histogram(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open histogram '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"state_code", "state", "probability"}) {
    throw ConfigError(path + ": expected header state_code,state,probability");
  }
  std::vector<HistogramRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 3 fields");
    try {
      rows.push_back({std::stoull(fields[0]), fields[1], std::stod(fields[2])});
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  return rows;
}

int cmd_run(const ExperimentConfig& base, const CommandOptions& options, std::ostream& out, std::ostream& err) {
  const auto config = with_seed(base, options);
  const auto dir = resolve_output_dir(config, options);
  const auto setup = config.setup();
  const auto logs = run_replications(setup, config.seed, config.replications, options.threads);
  prepare_dir(dir);
  const fs::path root(dir);
  {
    std::ofstream f(root / "config.json", std::ios::binary);
    f << serialize_config(config) << '\n';
  }

  auto alpha_csv = open_csv(root / "alpha_trace.csv", "replication,time,alpha_hat");
  auto region_csv = open_csv(root / "region_trace.csv", "replication,time,region,count,weight");
  auto survivor_csv = open_csv(root / "survivor_trace.csv", "replication,time,before,after");
  auto summary_csv = open_csv(root / "summary.csv", "replication,status,resample_events,samples,pooled_alpha");
  std::vector<RunLog> good;
  for (std::size_t r = 0; r < logs.size(); ++r) {
    const auto& log = logs[r];
    for (const auto& s : log.samples) {
      alpha_csv << r << ',' << format_double(s.time) << ',' << format_double(decay_estimate(s, setup.model)) << '\n';
    }
    for (const auto& row : log.region_traces) {
      region_csv << r << ',' << format_double(row.time) << ',' << row.region << ',' << row.count << ','
                 << format_double(row.weight) << '\n';
    }
    for (const auto& row : log.survivor_trace) {
      survivor_csv << r << ',' << format_double(row.time) << ',' << row.before << ',' << row.after << '\n';
    }
    const std::string pooled = log.samples.empty() ? "" : format_double(alpha_trace(log, setup.model).pooled);
    summary_csv << r << ',' << (log.ok() ? "ok" : log.failure->kind) << ',' << log.resample_times.size() << ','
                << log.samples.size() << ',' << pooled << '\n';
    if (log.ok()) good.push_back(log);
  }
  write_failures(root / "failures.csv", logs);

  const std::size_t failures = logs.size() - good.size();
  if (!good.empty() && std::any_of(good.begin(), good.end(), [](const RunLog& l) { return !l.samples.empty(); })) {
    const auto pooled = collect_samples(good);
    write_histogram((root / "histogram.csv").string(), pooled, setup.model);
    out << "histogram: " << (root / "histogram.csv").string() << '\n';
    out << "alpha_hat: " << format_double(decay_estimate(pooled, setup.model)) << '\n';
  } else if (failures == 0) {
    err << "error: no samples were collected (burn-in too long?)\n";
    return kExitConfig;
  }
  out << "replications: " << logs.size() << ", failures: " << failures << '\n';
  if (failures > 0) {
    for (std::size_t r = 0; r < logs.size(); ++r) {
      if (const auto& f = logs[r].failure) {
        err << "{\"replication\":" << r << ",\"kind\":\"" << f->kind << "\",\"time\":" << format_double(f->time)
            << "}\n";
      }
    }
    return kExitSampler;
  }
  return kExitOk;
}

int cmd_oracle(const ExperimentConfig& base, const CommandOptions& options, std::ostream& out, std::ostream&) {
  const auto config = with_seed(base, options);
  const auto dir = resolve_output_dir(config, options);
  const Model model(config.model);
  const auto result = compute_oracle(config);
  prepare_dir(dir);
  const fs::path root(dir);
  if (!result.u.empty()) {
    write_histogram((root / "oracle.csv").string(), result.u, model);
    out << "oracle: " << (root / "oracle.csv").string() << '\n';
  }
  auto f = open_csv(root / "oracle_alpha.csv", "method,alpha");
  f << result.method << ',' << format_double(result.alpha) << '\n';
  out << "alpha: " << format_double(result.alpha) << " (" << result.method << ")\n";
  return kExitOk;
}

int compare_files(const std::string& run_csv, const std::string& oracle_csv, double threshold,
                  const std::string& report_path, std::ostream& out, std::ostream&) {
  const auto run_rows = read_histogram(run_csv);
  const auto oracle_rows = read_histogram(oracle_csv);
  std::map<StateCode, std::pair<std::string, std::pair<double, double>>> table;
  for (const auto& row : run_rows) table[row.code] = {row.state, {row.probability, 0.0}};
  for (const auto& row : oracle_rows) {
    auto [it, inserted] = table.try_emplace(row.code, row.state, std::pair{0.0, row.probability});
    if (!inserted) {
      if (it->second.first != row.state) {
        throw ConfigError("state encoding mismatch at code " + std::to_string(row.code) + ": '" + it->second.first +
                          "' vs '" + row.state + "'");
      }
      it->second.second.second = row.probability;
    }
  }
  Distribution p;
  Distribution q;
  for (const auto& [code, entry] : table) {
    if (entry.second.first != 0.0) p[code] = entry.second.first;
    if (entry.second.second != 0.0) q[code] = entry.second.second;
  }
  const double tv = tv_distance(p, q);
  if (!report_path.empty()) {
    auto f = open_csv(report_path, "state_code,state,run,oracle,error");
    for (const auto& [code, entry] : table) {
      const auto [a, b] = entry.second;
      f << code << ',' << csv_field(entry.first) << ',' << format_double(a) << ',' << format_double(b) << ','
        << format_double(a - b) << '\n';
    }
  }
  out << "tv_distance: " << format_double(tv) << " (threshold " << format_double(threshold) << ")\n";
  return tv > threshold ? kExitThreshold : kExitOk;
}

int cmd_compare(const ExperimentConfig& base, const CommandOptions& options, std::ostream& out, std::ostream& err) {
  const auto config = with_seed(base, options);
  const fs::path root(resolve_output_dir(config, options));
  const auto run_csv = options.run_csv ? fs::path(*options.run_csv) : root / "histogram.csv";
  const auto oracle_csv = options.oracle_csv ? fs::path(*options.oracle_csv) : root / "oracle.csv";
  if (!options.run_csv && !fs::exists(run_csv)) {
    if (const int code = cmd_run(config, options, out, err); code != kExitOk) return code;
  }
  if (!options.oracle_csv && !fs::exists(oracle_csv)) {
    if (const int code = cmd_oracle(config, options, out, err); code != kExitOk) return code;
  }
  prepare_dir(root.string());
  return compare_files(run_csv.string(), oracle_csv.string(), options.threshold.value_or(config.compare_threshold),
                       (root / "comparison.csv").string(), out, err);
}

int cmd_sweep(const ExperimentConfig& base, const CommandOptions& options, std::ostream& out, std::ostream& err) {
  const auto config = with_seed(base, options);
  if (!config.sweep) throw ConfigError("/sweep: missing sweep section");
  const auto& sweep = *config.sweep;
  const auto dir = resolve_output_dir(config, options);
  prepare_dir(dir);
  const fs::path root(dir);
  auto summary = open_csv(root / "sweep.csv", "parameter,value,statistic,result");
  auto per_rep = open_csv(root / "sweep_replications.csv", "parameter,value,replication,status,estimate,resample_events");
  std::size_t total_failures = 0;

  for (double value : sweep.values) {
    auto c = config;
    if (sweep.parameter == "lambda") {
      std::get<Dynamic>(c.schedule.mode).trigger_fraction = value;
    } else if (sweep.parameter == "t_max") {
      std::get<Dynamic>(c.schedule.mode).t_max = value;
    } else if (auto* ti = std::get_if<TransientImmunity>(&c.model)) {
      ti->beta = value;
    } else {
      std::get<LinearBirthDeath>(c.model).beta = value;
    }
    c.validate();
    const auto setup = c.setup();
    const auto logs = run_replications(setup, c.seed, c.replications, options.threads);

    std::vector<double> estimates;
    double events = 0.0;
    std::size_t failures = 0;
    for (std::size_t r = 0; r < logs.size(); ++r) {
      const auto& log = logs[r];
      events += static_cast<double>(log.resample_times.size());
      std::string estimate;
      if (log.ok() && !log.samples.empty()) {
        const double e = sweep.estimate == "alpha" ? alpha_trace(log, setup.model).pooled
                                                   : mean_coordinate(collect_samples(log), setup.model);
        estimates.push_back(e);
        estimate = format_double(e);
      }
      if (!log.ok()) ++failures;
      per_rep << sweep.parameter << ',' << format_double(value) << ',' << r << ','
              << (log.ok() ? "ok" : log.failure->kind) << ',' << estimate << ',' << log.resample_times.size() << '\n';
    }
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean = estimates.empty() ? NAN : mean / static_cast<double>(estimates.size());
    double var = 0.0;
    for (double e : estimates) var += (e - mean) * (e - mean);
    var = estimates.size() < 2 ? NAN : var / static_cast<double>(estimates.size() - 1);

    const std::string key = sweep.parameter + ',' + format_double(value) + ',';
    summary << key << "replications," << logs.size() << '\n';
    summary << key << "failures," << failures << '\n';
    summary << key << "estimate_mean," << format_double(mean) << '\n';
    summary << key << "estimate_variance," << format_double(var) << '\n';
    summary << key << "resample_events_mean," << format_double(events / static_cast<double>(logs.size())) << '\n';
    out << sweep.parameter << '=' << format_double(value) << ": mean " << format_double(mean) << ", variance "
        << format_double(var) << ", failures " << failures << '\n';
    total_failures += failures;
  }
  out << "sweep: " << (root / "sweep.csv").string() << '\n';
  if (total_failures > 0) {
    err << "{\"failures\":" << total_failures << "}\n";
    return kExitSampler;
  }
  return kExitOk;
}

}  // namespace qsd
