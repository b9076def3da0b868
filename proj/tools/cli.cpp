#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "deepsep/csv.hpp"
#include "deepsep/error.hpp"
#include "deepsep/oracle.hpp"
#include "deepsep/rng.hpp"

namespace deepsep::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Rls: return "rls";
    case Algorithm::Easi: return "easi";
    case Algorithm::DeepRls: return "deep_rls";
    case Algorithm::DeepEasi: return "deep_easi";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "rls") return Algorithm::Rls;
  if (name == "easi") return Algorithm::Easi;
  if (name == "deep_rls") return Algorithm::DeepRls;
  if (name == "deep_easi") return Algorithm::DeepEasi;
  throw ConfigError("unknown algorithm '" + name + "'");
}

namespace {

bool is_deep(Algorithm a) { return a == Algorithm::DeepRls || a == Algorithm::DeepEasi; }

// Typed access to one config object that rejects keys nobody asked for.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("'" + path_ + "' must be an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : obj_.items())
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + name(key) + "'");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + name(key) + "' has the wrong type");
    }
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(obj_.contains(key) ? obj_.at(key) : empty, name(key));
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

MlpSpec read_mlp(Section s, MlpSpec d) {
  d.hidden = s.get("hidden", d.hidden);
  d.activation = activation_from_string(s.get("activation", to_string(d.activation)));
  const std::string init = s.get<std::string>("init", d.init == MlpInit::Identity ? "identity" : "cubic");
  if (init != "identity" && init != "cubic") throw ConfigError("unknown MLP init '" + init + "'");
  d.init = init == "identity" ? MlpInit::Identity : MlpInit::Cubic;
  d.fit_scale = s.get("fit_scale", d.fit_scale);
  return d;
}

ordered_json mlp_json(const MlpSpec& s) {
  ordered_json j;
  j["hidden"] = s.hidden;
  j["activation"] = to_string(s.activation);
  j["init"] = s.init == MlpInit::Identity ? "identity" : "cubic";
  j["fit_scale"] = s.fit_scale;
  return j;
}

Nonlinearity read_nonlinearity(Section& s, const Nonlinearity& d) {
  const std::string kind = s.get<std::string>("nonlinearity", to_string(d));
  const double scale = s.get("tanh_scale", d.scale);
  return nonlinearity_from_string(kind, scale);
}

std::string curve_mode_name(CurveMode m) { return m == CurveMode::Cumulative ? "cumulative" : "per_step"; }

CurveMode curve_mode_from_string(const std::string& s) {
  if (s == "cumulative") return CurveMode::Cumulative;
  if (s == "per_step") return CurveMode::PerStep;
  throw ConfigError("unknown curve mode '" + s + "'");
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::optional<fs::path>& output_root) {
  ExperimentConfig c;
  {
    Section root(doc, "");
    {
      Section g = root.sub("generator");
      c.generator.m = g.get("m", c.generator.m);
      c.generator.l = g.get("l", c.generator.l);
      c.generator.T = g.get("T", c.generator.T);
      c.generator.source_dist =
          source_distribution_from_string(g.get("source_dist", to_string(c.generator.source_dist)));
      if (c.generator.source_dist == SourceDistribution::Custom)
        throw ConfigError("custom source distributions are only available through the library");
      c.generator.noise_var = g.get("noise_var", c.generator.noise_var);
      c.generator.seed = g.get("seed", c.generator.seed);
    }
    {
      Section d = root.sub("dataset");
      c.dataset.train = d.get("train", c.dataset.train);
      c.dataset.test = d.get("test", c.dataset.test);
    }
    if (root.has("dataset_dir")) c.dataset_dir = fs::path(root.get<std::string>("dataset_dir", ""));
    c.algorithm = algorithm_from_string(root.get<std::string>("algorithm", "rls"));
    c.label = root.get<std::string>("label", to_string(c.algorithm));

    InitSpec init;
    {
      Section s = root.sub("init");
      init.delta = s.get("delta", init.delta);
    }
    {
      Section s = root.sub("rls");
      c.rls.beta = s.get("beta", c.rls.beta);
      c.rls.nonlinearity = read_nonlinearity(s, c.rls.nonlinearity);
    }
    {
      Section s = root.sub("easi");
      c.easi.step_size = s.get("step_size", c.easi.step_size);
      c.easi.schedule = s.get("schedule", c.easi.schedule);
      c.easi.nonlinearity = read_nonlinearity(s, c.easi.nonlinearity);
    }
    c.rls.init = c.easi.init = c.train.init = init;

    c.deep_rls.m = c.generator.m;
    c.deep_rls.depth = c.generator.T;
    {
      Section s = root.sub("deep_rls");
      c.deep_rls.shared = s.get("shared", c.deep_rls.shared);
      c.deep_rls.depth = s.get("depth", c.deep_rls.depth);
      c.deep_rls.omega_init = s.get("omega_init", c.deep_rls.omega_init);
      c.deep_rls.seed = s.get("seed", c.deep_rls.seed);
      c.deep_rls.mlp = read_mlp(s.sub("mlp"), c.deep_rls.mlp);
    }
    c.deep_easi.m = c.generator.m;
    c.deep_easi.depth = c.generator.T;
    {
      Section s = root.sub("deep_easi");
      c.deep_easi.shared = s.get("shared", c.deep_easi.shared);
      c.deep_easi.depth = s.get("depth", c.deep_easi.depth);
      c.deep_easi.lambda_init = s.get("lambda_init", c.deep_easi.lambda_init);
      c.deep_easi.seed = s.get("seed", c.deep_easi.seed);
      const std::string nl = s.get<std::string>("nonlinearity", "mlp");
      if (nl != "mlp" && nl != "cubic") throw ConfigError("unknown Deep EASI nonlinearity '" + nl + "'");
      c.deep_easi.nonlinearity = nl == "mlp" ? EasiNonlinearity::Mlp : EasiNonlinearity::Cubic;
      c.deep_easi.mlp = read_mlp(s.sub("mlp"), c.deep_easi.mlp);
    }
    {
      Section s = root.sub("train");
      auto& t = c.train;
      t.epochs = s.get("epochs", t.epochs);
      t.batch_size = s.get("batch_size", t.batch_size);
      t.learning_rate = s.get("learning_rate", t.learning_rate);
      t.loss.kind = loss_kind_from_string(s.get("loss", to_string(t.loss.kind)));
      t.loss.lambda_reg = s.get("lambda_reg", t.loss.lambda_reg);
      t.seed = s.get("seed", t.seed);
      t.clip_norm = s.get("clip_norm", t.clip_norm);
      t.checkpoint_every = s.get("checkpoint_every", t.checkpoint_every);
      t.jobs = s.get("jobs", t.jobs);
      t.divergence = divergence_rule_from_string(s.get("divergence", to_string(t.divergence)));
      Section a = s.sub("adam");
      t.adam.beta1 = a.get("beta1", t.adam.beta1);
      t.adam.beta2 = a.get("beta2", t.adam.beta2);
      t.adam.eps = a.get("eps", t.adam.eps);
    }
    {
      Section s = root.sub("eval");
      c.curve_mode = curve_mode_from_string(s.get("curve_mode", curve_mode_name(c.curve_mode)));
      if (s.has("checkpoint")) c.checkpoint = fs::path(s.get<std::string>("checkpoint", ""));
    }
    c.output_dir = root.get<std::string>("output_dir", "runs/" + c.label);
  }

  if (c.generator.m < 1 || c.generator.l < c.generator.m || c.generator.T < 1)
    throw ConfigError("generator needs 1 <= m <= l and T >= 1");
  if (!(c.generator.noise_var >= 0.0)) throw ConfigError("noise_var must be non-negative");
  if (c.dataset.train < 0 || c.dataset.test < 0) throw ConfigError("dataset sizes must be >= 0");
  if (!(c.rls.beta > 0.0)) throw ConfigError("rls.beta must be positive");
  if (!(c.easi.step_size >= 0.0)) throw ConfigError("easi.step_size must be non-negative");
  if (!(c.rls.init.delta > 0.0)) throw ConfigError("init.delta must be positive");
  if (c.deep_rls.depth < 1 || c.deep_easi.depth < 1) throw ConfigError("depth must be positive");
  c.train.validate();
  if (c.output_dir.is_relative() && output_root) c.output_dir = *output_root / c.output_dir;
  return c;
}

ordered_json ExperimentConfig::to_json() const {
  ordered_json j;
  j["generator"] = {{"m", generator.m},
                    {"l", generator.l},
                    {"T", generator.T},
                    {"source_dist", deepsep::to_string(generator.source_dist)},
                    {"noise_var", generator.noise_var},
                    {"seed", generator.seed}};
  j["dataset"] = {{"train", dataset.train}, {"test", dataset.test}};
  if (dataset_dir) j["dataset_dir"] = dataset_dir->string();
  j["algorithm"] = cli::to_string(algorithm);
  j["label"] = label;
  j["init"] = {{"delta", rls.init.delta}};
  j["rls"] = {{"beta", rls.beta},
              {"nonlinearity", deepsep::to_string(rls.nonlinearity)},
              {"tanh_scale", rls.nonlinearity.scale}};
  j["easi"] = {{"step_size", easi.step_size},
               {"schedule", easi.schedule},
               {"nonlinearity", deepsep::to_string(easi.nonlinearity)},
               {"tanh_scale", easi.nonlinearity.scale}};
  j["deep_rls"] = {{"shared", deep_rls.shared},
                   {"depth", deep_rls.depth},
                   {"omega_init", deep_rls.omega_init},
                   {"seed", deep_rls.seed},
                   {"mlp", mlp_json(deep_rls.mlp)}};
  j["deep_easi"] = {{"shared", deep_easi.shared},
                    {"depth", deep_easi.depth},
                    {"lambda_init", deep_easi.lambda_init},
                    {"seed", deep_easi.seed},
                    {"nonlinearity", deep_easi.nonlinearity == EasiNonlinearity::Mlp ? "mlp" : "cubic"},
                    {"mlp", mlp_json(deep_easi.mlp)}};
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"loss", deepsep::to_string(train.loss.kind)},
                {"lambda_reg", train.loss.lambda_reg},
                {"seed", train.seed},
                {"clip_norm", train.clip_norm},
                {"checkpoint_every", train.checkpoint_every},
                {"jobs", train.jobs},
                {"divergence", deepsep::to_string(train.divergence)},
                {"adam", {{"beta1", train.adam.beta1}, {"beta2", train.adam.beta2}, {"eps", train.adam.eps}}}};
  ordered_json ev = {{"curve_mode", curve_mode_name(curve_mode)}};
  if (checkpoint) ev["checkpoint"] = checkpoint->string();
  j["eval"] = ev;
  j["output_dir"] = output_dir.string();
  return j;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

ExperimentConfig load_config(const fs::path& path, const std::vector<std::string>& overrides,
                             const std::optional<fs::path>& output_root) {
  const std::string text = read_text(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(doc, output_root);
}

std::uint64_t instance_seed(std::uint64_t base, int split, int index) {
  return mix_seed(base, static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(index));
}

namespace {

const char* split_name(int split) { return split == 0 ? "train" : "test"; }

std::string instance_dir_name(int index) {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << index;
  return os.str();
}

}  // namespace

std::vector<MixtureInstance> make_split(const ExperimentConfig& cfg, int split) {
  std::vector<MixtureInstance> out;
  if (cfg.dataset_dir) {
    const fs::path manifest_path = *cfg.dataset_dir / "manifest.json";
    json manifest;
    try {
      manifest = json::parse(read_text(manifest_path));
    } catch (const json::exception& e) {
      throw IoError(manifest_path.string() + " is not valid JSON: " + e.what());
    }
    if (!manifest.contains(split_name(split))) throw IoError("manifest lacks the " + std::string(split_name(split)) + " split");
    for (const auto& rel : manifest.at(split_name(split)))
      out.push_back(load_instance(*cfg.dataset_dir / rel.get<std::string>()));
    return out;
  }
  const int n = split == 0 ? cfg.dataset.train : cfg.dataset.test;
  for (int i = 0; i < n; ++i) {
    GeneratorConfig g = cfg.generator;
    g.seed = instance_seed(cfg.generator.seed, split, i);
    out.push_back(generate(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output bookkeeping

namespace {

class OutputDir {
 public:
  OutputDir(fs::path dir, const ExperimentConfig& cfg) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create " + dir_.string() + ": " + ec.message());
    config_text_ = cfg.to_json().dump(2) + "\n";
    write("config.json", config_text_);
  }

  void write(const std::string& rel, const std::string& text) {
    const fs::path p = dir_ / rel;
    if (p.has_parent_path()) {
      std::error_code ec;
      fs::create_directories(p.parent_path(), ec);
      if (ec) throw IoError("cannot create " + p.parent_path().string());
    }
    write_text(p, text);
    digests_[rel] = digest_hex(text);
  }

  const std::string& config_digest_source() const { return config_text_; }

  CommandResult finish() {
    ordered_json j;
    j["config_digest"] = digest_hex(config_text_);
    ordered_json files = ordered_json::object();
    for (const auto& [name, d] : digests_) files[name] = d;
    j["files"] = files;
    write_text(dir_ / "digest.json", j.dump(2) + "\n");
    CommandResult r;
    r.output_dir = dir_;
    for (const auto& [name, _] : digests_) r.files.push_back(dir_ / name);
    r.files.push_back(dir_ / "digest.json");
    return r;
  }

 private:
  fs::path dir_;
  std::string config_text_;
  std::map<std::string, std::string> digests_;
};

std::string table_text(const CsvTable& t) { return table_to_csv(t); }

void write_records(OutputDir& out, const std::vector<RunRecord>& records, ErrorKind primary,
                   CurveMode mode) {
  double raw = 0.0;
  double aligned = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.write("runs/test_" + instance_dir_name(static_cast<int>(i)) + ".csv",
              table_text(run_record_table(records[i])));
    double r = 0.0;
    double a = 0.0;
    for (double v : records[i].sq_err) r += v;
    for (double v : records[i].aligned_sq_err) a += v;
    raw += r / records[i].T();
    aligned += a / records[i].T();
  }
  if (!records.empty()) {
    out.write("curve.csv", table_text(convergence_curve(records, mode, primary).to_csv_table()));
    out.write("curve_raw.csv",
              table_text(convergence_curve(records, mode, ErrorKind::Raw).to_csv_table()));
    out.write("curve_aligned.csv",
              table_text(convergence_curve(records, mode, ErrorKind::Aligned).to_csv_table()));
  }
  ordered_json s;
  s["instances"] = records.size();
  const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
  s["mean_mse"] = records.empty() ? json(nullptr) : json(raw / n);
  s["mean_aligned_mse"] = records.empty() ? json(nullptr) : json(aligned / n);
  out.write("summary.json", s.dump(2) + "\n");
}

std::vector<RunRecord> run_baselines(const ExperimentConfig& cfg,
                                     const std::vector<MixtureInstance>& test,
                                     const std::string& digest) {
  std::vector<RunRecord> records;
  for (const auto& inst : test) {
    RunRecord rec = cfg.algorithm == Algorithm::Rls ? rls_run(inst, cfg.rls) : easi_run(inst, cfg.easi);
    rec.algorithm = cfg.label;
    rec.config_digest = digest;
    records.push_back(std::move(rec));
  }
  return records;
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

void verify_rls(const ExperimentConfig& cfg, const std::vector<MixtureInstance>& test,
                std::ostream& report) {
  const std::size_t n = std::min<std::size_t>(test.size(), 5);
  if (n == 0) {
    report << "verify: no test instances\n";
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& inst = test[i];
    SeparatorState fin;
    const RunRecord rec = rls_run(inst, cfg.rls, fin);
    const Matrix G0 = cfg.rls.init.initial_g(inst.m());
    const Matrix W0 = cfg.rls.init.initial_w(inst.l(), inst.m());
    const Matrix G_direct = oracle::direct_gain(rec.y, cfg.rls.beta, G0);
    OracleStats stats = OracleStats::from_initial(W0, G0);
    for (int t = 0; t < inst.T(); ++t) stats.accumulate(inst.X.col(t), rec.y.col(t), cfg.rls.beta);
    const Matrix W_closed = closed_form_w(stats);
    report << "verify rls instance " << i << ": gain rel err "
           << sci((fin.G - G_direct).norm() / G_direct.norm()) << ", W vs closed form rel err "
           << sci((fin.W - W_closed).norm() / W_closed.norm()) << "\n";
  }
}

template <class Params>
void verify_gradient(const Params& params, const ExperimentConfig& cfg,
                     const std::vector<MixtureInstance>& data, std::ostream& report) {
  if (data.empty()) {
    report << "verify: no training instances\n";
    return;
  }
  if (!params.shared) {
    report << "verify: gradient check needs shared parameters (depth is fixed to T otherwise)\n";
    return;
  }
  MixtureInstance inst = data.front();
  const int T = std::min(inst.T(), 5);
  inst.S = Matrix(inst.S.leftCols(T));
  inst.X = Matrix(inst.X.leftCols(T));
  auto loss_at = [&](const Params& p) {
    if constexpr (std::is_same_v<Params, DeepEasiParams>)
      return sequence_loss(p, inst, cfg.train.loss, cfg.train.init, cfg.train.divergence);
    else
      return sequence_loss(p, inst, cfg.train.loss, cfg.train.init);
  };
  LossAndGradient lg;
  if constexpr (std::is_same_v<Params, DeepEasiParams>)
    lg = loss_and_gradient(params, inst, cfg.train.loss, cfg.train.init, cfg.train.divergence);
  else
    lg = loss_and_gradient(params, inst, cfg.train.loss, cfg.train.init);
  const std::vector<double> point = flatten(params);
  const auto fd = oracle::fd_gradient(
      [&](std::span<const double> x) {
        Params p = params;
        unflatten(p, x);
        return loss_at(p);
      },
      point);
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double err = std::abs(lg.gradient[i] - fd[i]) / std::max(std::abs(fd[i]), 1e-7);
    worst = std::max(worst, err);
  }
  report << "verify gradient (T=" << T << ", " << fd.size() << " parameters): max rel err "
         << sci(worst) << "\n";
}

std::vector<RunRecord> run_network(const ExperimentConfig& cfg, const std::string& checkpoint_text,
                                   const std::vector<MixtureInstance>& test,
                                   const std::string& digest) {
  std::vector<RunRecord> records;
  const std::string kind = checkpoint_network(checkpoint_text);
  if (kind != to_string(cfg.algorithm))
    throw ConfigError("checkpoint holds a " + kind + " network but the config asks for " +
                      to_string(cfg.algorithm));
  std::optional<DeepRlsParams> rls;
  std::optional<DeepEasiParams> easi;
  if (cfg.algorithm == Algorithm::DeepRls)
    rls = deep_rls_from_checkpoint(checkpoint_text);
  else
    easi = deep_easi_from_checkpoint(checkpoint_text);
  for (const auto& inst : test) {
    RunRecord rec;
    rec.algorithm = cfg.label;
    rec.config_digest = digest;
    rec.y = rls ? deep_rls_outputs(*rls, inst.X, cfg.train.init)
                : deep_easi_outputs(*easi, inst.X, cfg.train.init);
    attach_errors(rec, inst.S);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

CommandResult cmd_gen(const ExperimentConfig& cfg) {
  OutputDir out(cfg.output_dir, cfg);
  ordered_json manifest;
  manifest["generator"] = cfg.to_json()["generator"];
  for (int split = 0; split < 2; ++split) {
    const int n = split == 0 ? cfg.dataset.train : cfg.dataset.test;
    ordered_json list = ordered_json::array();
    for (int i = 0; i < n; ++i) {
      GeneratorConfig g = cfg.generator;
      g.seed = instance_seed(cfg.generator.seed, split, i);
      const MixtureInstance inst = generate(g);
      const std::string rel = std::string(split_name(split)) + "/" + instance_dir_name(i);
      save_instance(cfg.output_dir / rel, inst);
      for (const char* f : {"S.csv", "A.csv", "X.csv", "meta.json"})
        out.write(rel + "/" + f, read_text(cfg.output_dir / rel / f));
      list.push_back(rel);
    }
    manifest[split_name(split)] = list;
  }
  out.write("manifest.json", manifest.dump(2) + "\n");
  return out.finish();
}

CommandResult cmd_baseline(const ExperimentConfig& cfg, bool verify, std::ostream& report) {
  if (is_deep(cfg.algorithm))
    throw ConfigError("baseline runs need algorithm rls or easi, not " + to_string(cfg.algorithm));
  const auto test = make_split(cfg, 1);
  OutputDir out(cfg.output_dir, cfg);
  const std::string digest = digest_hex(out.config_digest_source());
  const auto records = run_baselines(cfg, test, digest);
  const ErrorKind primary = ErrorKind::Aligned;
  write_records(out, records, primary, cfg.curve_mode);
  if (verify) {
    if (cfg.algorithm == Algorithm::Rls)
      verify_rls(cfg, test, report);
    else
      report << "verify: EASI has no closed-form reference; nothing to compare\n";
  }
  return out.finish();
}

CommandResult cmd_train(const ExperimentConfig& cfg, bool verify, std::ostream& report) {
  if (!is_deep(cfg.algorithm))
    throw ConfigError("training needs algorithm deep_rls or deep_easi, not " + to_string(cfg.algorithm));
  if (cfg.algorithm == Algorithm::DeepRls && cfg.train.loss.kind == LossKind::Sure)
    throw UnsupportedError("SURE loss is not supported for deep_rls (use deep_easi)");
  const auto data = make_split(cfg, 0);
  const auto test = make_split(cfg, 1);
  OutputDir out(cfg.output_dir, cfg);
  const std::string digest = digest_hex(out.config_digest_source());
  auto save_checkpoint = [&](int epoch, const std::string& text) {
    out.write("checkpoint_epoch_" + instance_dir_name(epoch) + ".json", text);
  };
  std::string final_checkpoint;
  TrainHistory history;
  if (cfg.algorithm == Algorithm::DeepRls) {
    const DeepRlsParams init = init_deep_rls(cfg.deep_rls);
    if (verify) verify_gradient(init, cfg, data, report);
    auto result = train(init, data, test, cfg.train, save_checkpoint);
    final_checkpoint = to_checkpoint_json(result.params);
    history = std::move(result.history);
  } else {
    const DeepEasiParams init = init_deep_easi(cfg.deep_easi);
    if (verify) verify_gradient(init, cfg, data, report);
    auto result = train(init, data, test, cfg.train, save_checkpoint);
    final_checkpoint = to_checkpoint_json(result.params);
    history = std::move(result.history);
  }
  out.write("checkpoint.json", final_checkpoint);
  out.write("history.csv", table_text(history.to_csv_table()));
  write_records(out, run_network(cfg, final_checkpoint, test, digest), ErrorKind::Raw, cfg.curve_mode);
  return out.finish();
}

CommandResult cmd_eval(const ExperimentConfig& cfg) {
  const auto test = make_split(cfg, 1);
  OutputDir out(cfg.output_dir / "eval", cfg);
  const std::string digest = digest_hex(out.config_digest_source());
  if (!is_deep(cfg.algorithm)) {
    write_records(out, run_baselines(cfg, test, digest), ErrorKind::Aligned, cfg.curve_mode);
    return out.finish();
  }
  const fs::path ckpt = cfg.checkpoint ? *cfg.checkpoint : cfg.output_dir / "checkpoint.json";
  if (!fs::exists(ckpt))
    throw IoError("no checkpoint at " + ckpt.string() + " (run train first or set eval.checkpoint)");
  write_records(out, run_network(cfg, read_text(ckpt), test, digest), ErrorKind::Raw, cfg.curve_mode);
  return out.finish();
}

CurveTable merge_curves(const std::vector<CurveTable>& curves) {
  if (curves.empty()) throw ConfigError("nothing to compare");
  bool same = true;
  for (const auto& c : curves) same = same && c.length() == curves.front().length();
  if (!same) {
    std::string lengths;
    for (const auto& c : curves) lengths += (lengths.empty() ? "" : ", ") + std::to_string(c.length());
    throw ConfigError("curves have different lengths: " + lengths);
  }
  CurveTable merged;
  std::map<std::string, int> uses;
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.algorithms.size(); ++i) {
      std::string name = c.algorithms[i];
      const int n = ++uses[name];
      if (n > 1) name += "_" + std::to_string(n);
      merged.algorithms.push_back(name);
      merged.columns.push_back(c.columns[i]);
    }
  }
  return merged;
}

// ---------------------------------------------------------------------------

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const SingularError*>(&e) ||
      dynamic_cast<const DegenerateSignalError*>(&e))
    return kExitNumerical;
  return kExitConfig;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Unrolled RLS/EASI source separation experiments"};
  app.require_subcommand(1);

  std::vector<std::string> overrides;
  bool verify = false;
  int jobs = 0;
  std::string output_root_flag;
  std::string config_path;
  std::vector<std::string> compare_inputs;
  std::string compare_output;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--set", overrides, "override a config field, e.g. --set train.epochs=5");
    sub->add_option("--output-root", output_root_flag, "prefix for relative output directories");
  };
  auto* gen = app.add_subcommand("gen", "generate a dataset");
  add_common(gen);
  auto* base = app.add_subcommand("baseline", "run RLS or EASI on the test split");
  add_common(base);
  base->add_flag("--verify", verify, "print oracle comparisons");
  auto* tr = app.add_subcommand("train", "train Deep RLS or Deep EASI");
  add_common(tr);
  tr->add_flag("--verify", verify, "print a finite-difference gradient check");
  tr->add_option("--jobs", jobs, "workers for per-sequence passes");
  auto* ev = app.add_subcommand("eval", "evaluate a baseline or trained network");
  add_common(ev);
  auto* cmp = app.add_subcommand("compare", "merge curve CSVs or configs into one table");
  cmp->add_option("inputs", compare_inputs, "curve CSV files or configs")->required();
  cmp->add_option("-o,--output", compare_output, "merged CSV path");
  cmp->add_option("--set", overrides, "override applied to every config input");
  cmp->add_option("--output-root", output_root_flag, "prefix for relative output directories");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  std::optional<fs::path> output_root;
  if (!output_root_flag.empty()) {
    output_root = output_root_flag;
  } else if (const char* env = std::getenv("DEEPSEP_OUTPUT_ROOT"); env && *env) {
    output_root = fs::path(env);
  }

  try {
    auto load = [&](const std::string& path) {
      auto cfg = load_config(path, overrides, output_root);
      if (jobs > 0) cfg.train.jobs = jobs;
      return cfg;
    };
    CommandResult result;
    if (gen->parsed()) {
      result = cmd_gen(load(config_path));
    } else if (base->parsed()) {
      result = cmd_baseline(load(config_path), verify, std::cout);
    } else if (tr->parsed()) {
      result = cmd_train(load(config_path), verify, std::cout);
    } else if (ev->parsed()) {
      result = cmd_eval(load(config_path));
    } else {
      std::vector<CurveTable> curves;
      for (const auto& input : compare_inputs) {
        if (fs::path(input).extension() == ".csv") {
          curves.push_back(curve_from_csv_table(table_from_csv(read_text(input))));
        } else {
          const auto r = cmd_eval(load(input));
          curves.push_back(curve_from_csv_table(table_from_csv(read_text(r.output_dir / "curve.csv"))));
        }
      }
      const CurveTable merged = merge_curves(curves);
      fs::path target = compare_output.empty() ? fs::path("compare.csv") : fs::path(compare_output);
      if (target.is_relative() && output_root) target = *output_root / target;
      if (target.has_parent_path()) fs::create_directories(target.parent_path());
      write_text(target, table_to_csv(merged.to_csv_table()));
      std::cout << target.string() << "\n";
      return kExitOk;
    }
    std::cout << result.output_dir.string() << "\n";
    return kExitOk;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace deepsep::cli
