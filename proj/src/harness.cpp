#include "fedsched/harness.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

namespace fedsched {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& value) {
  if (value == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an unsigned integer, got '" +
                      value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + value + "'");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

int thread_cap() {
  if (const char* env = std::getenv("FEDSCHED_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

ModelSpec model_spec_for(const ExperimentConfig& cfg, int input_dim, int classes) {
  ModelSpec spec;
  spec.input_dim = input_dim;
  spec.num_classes = classes;
  spec.hidden = cfg.mlp_hidden;
  spec.svm_lambda = cfg.svm_lambda;
  if (cfg.model == "mlp") {
    spec.kind = ModelKind::Mlp;
  } else if (cfg.model == "logistic") {
    spec.kind = ModelKind::Logistic;
  } else if (cfg.model == "linreg") {
    spec.kind = ModelKind::LinearRegression;
  } else if (cfg.model == "svm") {
    spec.kind = ModelKind::SquaredSvm;
    if (classes != 2) {
      throw ConfigError("config: model svm needs exactly 2 classes, got " +
                        std::to_string(classes));
    }
  } else {
    throw ConfigError("config: unknown model '" + cfg.model + "'");
  }
  return spec;
}

void map_svm_labels(Dataset& data) {
  for (Eigen::Index r = 0; r < data.labels.size(); ++r) {
    data.labels[r] = data.labels[r] > 0.5 ? 1.0 : -1.0;
  }
}

Dataset concat(const std::vector<Dataset>& parts) {
  Eigen::Index rows = 0;
  for (const Dataset& p : parts) rows += p.size();
  Dataset out;
  out.features.resize(rows, parts.front().features.cols());
  out.labels.resize(rows);
  Eigen::Index at = 0;
  for (const Dataset& p : parts) {
    out.features.middleRows(at, p.size()) = p.features;
    out.labels.segment(at, p.size()) = p.labels;
    at += p.size();
  }
  return out;
}

double nan_mean(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> keys = {
      {"M", [&](const std::string& k, const std::string& v) { cfg.devices = parse_int(k, v); }},
      {"R_m", [&](const std::string& k, const std::string& v) { cfg.radius_m = parse_double(k, v); }},
      {"min_dist_m", [&](const std::string& k, const std::string& v) { cfg.min_dist_m = parse_double(k, v); }},
      {"alpha", [&](const std::string& k, const std::string& v) { cfg.path_loss_exp = parse_double(k, v); }},
      {"B_hz", [&](const std::string& k, const std::string& v) { cfg.bandwidth_hz = parse_double(k, v); }},
      {"N0_dbm_per_mhz", [&](const std::string& k, const std::string& v) { cfg.noise_dbm_per_mhz = parse_double(k, v); }},
      {"P_dbm", [&](const std::string& k, const std::string& v) { cfg.tx_power_dbm = parse_double(k, v); }},
      {"S_bits", [&](const std::string& k, const std::string& v) {
         cfg.upload_bits = (v == "auto") ? 0.0 : parse_double(k, v);
       }},
      {"T_s", [&](const std::string& k, const std::string& v) { cfg.time_budget_s = parse_double(k, v); }},
      {"tau", [&](const std::string& k, const std::string& v) { cfg.tau = parse_int(k, v); }},
      {"eta", [&](const std::string& k, const std::string& v) { cfg.eta = parse_double(k, v); }},
      {"batch_size", [&](const std::string& k, const std::string& v) { cfg.batch_size = parse_int(k, v); }},
      {"phi", [&](const std::string& k, const std::string& v) { cfg.phi = parse_double(k, v); }},
      {"epsilon_alloc", [&](const std::string& k, const std::string& v) { cfg.epsilon_alloc = parse_double(k, v); }},
      {"a_ms_per_sample", [&](const std::string& k, const std::string& v) { cfg.shift_ms_per_sample = parse_double(k, v); }},
      {"mu_per_ms", [&](const std::string& k, const std::string& v) {
         cfg.fluct_rate_per_ms = (v == "auto") ? 0.0 : parse_double(k, v);
       }},
      {"fading", [&](const std::string& k, const std::string& v) { cfg.fading = parse_bool(k, v); }},
      {"error_rel_std", [&](const std::string& k, const std::string& v) { cfg.error_rel_std = parse_double(k, v); }},
      {"remaining_budget_k_hat", [&](const std::string& k, const std::string& v) { cfg.remaining_budget_k_hat = parse_bool(k, v); }},
      {"max_rounds", [&](const std::string& k, const std::string& v) { cfg.max_rounds = parse_int(k, v); }},
      {"model", [&](const std::string&, const std::string& v) { cfg.model = v; }},
      {"mlp_hidden", [&](const std::string& k, const std::string& v) { cfg.mlp_hidden = parse_int(k, v); }},
      {"svm_lambda", [&](const std::string& k, const std::string& v) { cfg.svm_lambda = parse_double(k, v); }},
      {"data", [&](const std::string&, const std::string& v) { cfg.data = v; }},
      {"data_n", [&](const std::string& k, const std::string& v) { cfg.data_n = parse_int(k, v); }},
      {"data_dims", [&](const std::string& k, const std::string& v) { cfg.data_dims = parse_int(k, v); }},
      {"data_classes", [&](const std::string& k, const std::string& v) { cfg.data_classes = parse_int(k, v); }},
      {"data_spread", [&](const std::string& k, const std::string& v) { cfg.data_spread = parse_double(k, v); }},
      {"data_noise_std", [&](const std::string& k, const std::string& v) { cfg.data_noise_std = parse_double(k, v); }},
      {"test_n", [&](const std::string& k, const std::string& v) { cfg.test_n = parse_int(k, v); }},
      {"idx_train_images", [&](const std::string&, const std::string& v) { cfg.idx_train_images = v; }},
      {"idx_train_labels", [&](const std::string&, const std::string& v) { cfg.idx_train_labels = v; }},
      {"idx_test_images", [&](const std::string&, const std::string& v) { cfg.idx_test_images = v; }},
      {"idx_test_labels", [&](const std::string&, const std::string& v) { cfg.idx_test_labels = v; }},
      {"partition", [&](const std::string&, const std::string& v) { cfg.partition_kind = v; }},
      {"shards_per_device", [&](const std::string& k, const std::string& v) { cfg.shards_per_device = parse_int(k, v); }},
      {"policy", [&](const std::string&, const std::string& v) { cfg.policy = v; }},
      {"fixed_n", [&](const std::string& k, const std::string& v) { cfg.policy_n = parse_int(k, v); }},
      {"policy_threshold_s", [&](const std::string& k, const std::string& v) { cfg.policy_threshold_s = parse_double(k, v); }},
      {"trials", [&](const std::string& k, const std::string& v) { cfg.trials = parse_int(k, v); }},
      {"master_seed", [&](const std::string& k, const std::string& v) { cfg.master_seed = parse_u64(k, v); }},
  };

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    it->second(key, value);
  }

  if (cfg.devices < 1) throw ConfigError("config: key 'M' must be >= 1");
  if (cfg.trials < 1) throw ConfigError("config: key 'trials' must be >= 1");
  if (cfg.tau < 1) throw ConfigError("config: key 'tau' must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("config: key 'batch_size' must be >= 1");
  if (!(cfg.time_budget_s > 0.0)) throw ConfigError("config: key 'T_s' must be > 0");
  if (!(cfg.eta > 0.0)) throw ConfigError("config: key 'eta' must be > 0");
  if (!(cfg.phi > 0.0)) throw ConfigError("config: key 'phi' must be > 0");
  if (cfg.error_rel_std < 0.0) throw ConfigError("config: key 'error_rel_std' must be >= 0");
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

Rng seed_stream(std::uint64_t master_seed, int trial, SeedComponent component) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffu),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(trial),
                    static_cast<std::uint32_t>(component) + 0x9e3779b9u};
  return Rng(seq);
}

std::string csv_field(const std::string& raw) {
  if (raw.find_first_of(",\"\n\r") == std::string::npos) return raw;
  std::string out = "\"";
  for (char c : raw) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

PolicySpec parse_policy(const std::string& name, int n, double threshold_s) {
  PolicySpec p;
  p.n = n;
  p.threshold_s = threshold_s;
  if (name == "fc") {
    p.kind = PolicySpec::Kind::Fc;
  } else if (name == "fixed_n") {
    p.kind = PolicySpec::Kind::FixedN;
  } else if (name == "random") {
    p.kind = PolicySpec::Kind::Random;
  } else if (name == "best_channel") {
    p.kind = PolicySpec::Kind::BestChannel;
  } else if (name == "equal_split") {
    p.kind = PolicySpec::Kind::EqualSplit;
  } else if (name == "optimal_split") {
    p.kind = PolicySpec::Kind::OptimalSplit;
  } else {
    throw ConfigError("config: unknown policy '" + name + "'");
  }
  return p;
}

TrainSetup build_setup(const ExperimentConfig& cfg, int trial) {
  Rng data_rng = seed_stream(cfg.master_seed, trial, SeedComponent::Data);

  Dataset train, test;
  int classes = cfg.data_classes;
  if (cfg.data == "synth_classification") {
    Dataset all = synth_classification(data_rng, cfg.data_n + cfg.test_n, cfg.data_dims,
                                       cfg.data_classes, cfg.data_spread);
    train.features = all.features.topRows(cfg.data_n);
    train.labels = all.labels.head(cfg.data_n);
    test.features = all.features.bottomRows(cfg.test_n);
    test.labels = all.labels.tail(cfg.test_n);
  } else if (cfg.data == "synth_regression") {
    std::normal_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd w_true(cfg.data_dims);
    for (int d = 0; d < cfg.data_dims; ++d) {
      w_true[d] = unit(data_rng) / std::sqrt(static_cast<double>(cfg.data_dims));
    }
    train = synth_regression(data_rng, cfg.data_n, cfg.data_dims, w_true,
                             cfg.data_noise_std);
    test = synth_regression(data_rng, cfg.test_n, cfg.data_dims, w_true,
                            cfg.data_noise_std);
    classes = 0;
  } else if (cfg.data == "idx") {
    if (cfg.idx_train_images.empty() || cfg.idx_train_labels.empty()) {
      throw ConfigError("config: data idx needs idx_train_images and idx_train_labels");
    }
    train = load_idx_pair(cfg.idx_train_images, cfg.idx_train_labels);
    if (!cfg.idx_test_images.empty()) {
      test = load_idx_pair(cfg.idx_test_images, cfg.idx_test_labels);
    }
    classes = static_cast<int>(train.labels.maxCoeff()) + 1;
  } else {
    throw ConfigError("config: unknown data '" + cfg.data + "'");
  }

  TrainSetup setup;
  setup.model = model_spec_for(cfg, static_cast<int>(train.features.cols()), classes);

  PartitionSpec part;
  part.kind = cfg.partition_kind == "iid" ? PartitionSpec::Kind::Iid
                                          : PartitionSpec::Kind::Shards;
  if (cfg.partition_kind != "iid" && cfg.partition_kind != "shards") {
    throw ConfigError("config: unknown partition '" + cfg.partition_kind + "'");
  }
  if (part.kind == PartitionSpec::Kind::Shards &&
      setup.model.kind == ModelKind::LinearRegression) {
    throw ConfigError("config: shards partitioning needs class labels");
  }
  part.shards_per_device = cfg.shards_per_device;
  setup.locals = partition(train, cfg.devices, part, data_rng);
  // Partitioning needs class indices, so the SVM's +-1 convention is
  // applied afterwards.
  if (setup.model.kind == ModelKind::SquaredSvm) {
    for (Dataset& local : setup.locals) map_svm_labels(local);
    if (test.size() > 0) map_svm_labels(test);
  }
  setup.pooled_train = concat(setup.locals);
  setup.test = std::move(test);

  setup.radio.bandwidth_hz = cfg.bandwidth_hz;
  setup.radio.noise_w_per_hz = dbm_to_watts(cfg.noise_dbm_per_mhz) / 1e6;
  setup.radio.upload_bits = cfg.upload_bits > 0.0
                                ? cfg.upload_bits
                                : 32.0 * setup.model.parameter_count();

  const double fluct = cfg.fluct_rate_per_ms > 0.0 ? cfg.fluct_rate_per_ms
                                                   : 1.0 / cfg.shift_ms_per_sample;
  setup.devices.reserve(cfg.devices);
  for (int i = 0; i < cfg.devices; ++i) {
    DeviceProfile dev;
    dev.id = i;
    dev.dataset_size = setup.locals[i].size();
    dev.batch_size = std::min<int>(cfg.batch_size, static_cast<int>(setup.locals[i].size()));
    dev.shift_ms_per_sample = cfg.shift_ms_per_sample;
    dev.fluct_rate_per_ms = fluct;
    dev.tx_power_w = dbm_to_watts(cfg.tx_power_dbm);
    setup.devices.push_back(dev);
  }

  setup.sampling.radius_m = cfg.radius_m;
  setup.sampling.min_dist_m = cfg.min_dist_m;
  setup.sampling.path_loss_exp = cfg.path_loss_exp;
  setup.sampling.local_steps = cfg.tau;
  setup.sampling.error_rel_std = cfg.error_rel_std;
  setup.sampling.fading = cfg.fading;

  setup.policy = parse_policy(cfg.policy, cfg.policy_n, cfg.policy_threshold_s);
  setup.time_budget_s = cfg.time_budget_s;
  setup.tau = cfg.tau;
  setup.eta = cfg.eta;
  setup.phi = cfg.phi;
  setup.epsilon_alloc = cfg.epsilon_alloc;
  setup.max_rounds = cfg.max_rounds;
  setup.remaining_budget_k_hat = cfg.remaining_budget_k_hat;
  return setup;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result;
  result.trial_rounds.resize(cfg.trials);
  result.summaries.resize(cfg.trials);
  std::vector<std::exception_ptr> failures(cfg.trials);

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int trial = next.fetch_add(1);
      if (trial >= cfg.trials) return;
      try {
        TrainSetup setup = build_setup(cfg, trial);
        RngBundle rngs{seed_stream(cfg.master_seed, trial, SeedComponent::Placement),
                       seed_stream(cfg.master_seed, trial, SeedComponent::Channel),
                       seed_stream(cfg.master_seed, trial, SeedComponent::Compute),
                       seed_stream(cfg.master_seed, trial, SeedComponent::Sgd),
                       seed_stream(cfg.master_seed, trial, SeedComponent::Policy)};
        TrainingResult tr = run_training(setup, rngs);

        TrialSummary sum;
        sum.trial = trial;
        sum.policy = setup.policy.label();
        sum.rounds_completed = static_cast<int>(tr.rounds.size());
        std::vector<double> n_sched, t_star;
        double best_acc = std::numeric_limits<double>::quiet_NaN();
        for (const RoundRecord& r : tr.rounds) {
          n_sched.push_back(r.n_scheduled);
          t_star.push_back(r.t_star_s);
          if (!std::isnan(r.test_accuracy) &&
              (std::isnan(best_acc) || r.test_accuracy > best_acc)) {
            best_acc = r.test_accuracy;
          }
        }
        sum.best_accuracy = best_acc;
        sum.best_loss = tr.rounds.empty() ? std::numeric_limits<double>::quiet_NaN()
                                          : tr.best_loss;
        sum.mean_n_scheduled = nan_mean(n_sched);
        sum.mean_t_star_s = nan_mean(t_star);
        result.summaries[trial] = std::move(sum);
        result.trial_rounds[trial] = std::move(tr.rounds);
      } catch (...) {
        failures[trial] = std::current_exception();
        return;
      }
    }
  };

  const int workers = std::min(thread_cap(), cfg.trials);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  return result;
}

ExperimentResult run_and_write(const ExperimentConfig& cfg,
                               const std::filesystem::path& out_dir) {
  ExperimentResult result = run_experiment(cfg);
  std::filesystem::create_directories(out_dir);

  const PolicySpec policy = parse_policy(cfg.policy, cfg.policy_n, cfg.policy_threshold_s);
  const std::string policy_label = csv_field(policy.label());

  std::ofstream hist(out_dir / "history.csv");
  hist << "trial,round,policy,n_scheduled,t_star_s,cumulative_s,K_hat,C_value,"
          "global_loss,true_global_loss,test_accuracy,rho_hat,beta_hat,delta_hat\n";
  for (int trial = 0; trial < cfg.trials; ++trial) {
    for (const RoundRecord& r : result.trial_rounds[trial]) {
      hist << trial << ',' << r.round << ',' << policy_label << ',' << r.n_scheduled
           << ',' << fmt(r.t_star_s) << ',' << fmt(r.cumulative_s) << ',' << r.k_hat
           << ',' << fmt(r.c_value) << ',' << fmt(r.global_loss) << ','
           << fmt(r.true_global_loss) << ',' << fmt(r.test_accuracy) << ','
           << fmt(r.rho_hat) << ',' << fmt(r.beta_hat) << ',' << fmt(r.delta_hat)
           << '\n';
    }
  }
  hist.close();

  std::ofstream sum(out_dir / "summary.csv");
  sum << "trial,policy,best_accuracy,best_loss,rounds_completed,mean_n_scheduled,"
         "mean_t_star_s\n";
  for (const TrialSummary& s : result.summaries) {
    sum << s.trial << ',' << csv_field(s.policy) << ',' << fmt(s.best_accuracy) << ','
        << fmt(s.best_loss) << ',' << s.rounds_completed << ','
        << fmt(s.mean_n_scheduled) << ',' << fmt(s.mean_t_star_s) << '\n';
  }
  return result;
}

void sweep_and_write(const ExperimentConfig& base, const std::string& key,
                     const std::vector<std::string>& values,
                     const std::filesystem::path& out_dir) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  struct Row {
    std::string value;
    double mean_acc, std_acc, mean_n;
  };
  std::vector<Row> rows;

  for (const std::string& value : values) {
    ExperimentConfig cfg = base;
    if (key == "phi") {
      cfg.phi = parse_double(key, value);
    } else if (key == "R_m") {
      cfg.radius_m = parse_double(key, value);
    } else if (key == "policy") {
      cfg.policy = value;
    } else if (key == "error_rel_std") {
      cfg.error_rel_std = parse_double(key, value);
    } else if (key == "fixed_n") {
      cfg.policy = "fixed_n";
      cfg.policy_n = parse_int(key, value);
    } else {
      throw ConfigError("sweep: unsupported key '" + key +
                        "' (phi, R_m, policy, error_rel_std, fixed_n)");
    }
    parse_policy(cfg.policy, cfg.policy_n, cfg.policy_threshold_s);  // validate early

    const ExperimentResult result = run_and_write(cfg, out_dir / (key + "=" + value));
    std::vector<double> accs, ns;
    for (const TrialSummary& s : result.summaries) {
      accs.push_back(s.best_accuracy);
      ns.push_back(s.mean_n_scheduled);
    }
    const double mean_acc = nan_mean(accs);
    double var = 0.0;
    for (double a : accs) var += (a - mean_acc) * (a - mean_acc);
    const double std_acc =
        accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1)) : 0.0;
    rows.push_back({value, mean_acc, std_acc, nan_mean(ns)});
  }

  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir / "sweep.csv");
  out << "key,value,mean_best_accuracy,std_best_accuracy,mean_n_scheduled\n";
  for (const Row& r : rows) {
    out << csv_field(key) << ',' << csv_field(r.value) << ',' << fmt(r.mean_acc) << ','
        << fmt(r.std_acc) << ',' << fmt(r.mean_n) << '\n';
  }
}

}  // namespace fedsched
