#include "pdenetpp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "pdenetpp/classical_schemes.hpp"
#include "pdenetpp/parallel.hpp"
#include "pdenetpp/pdnx.hpp"
#include "pdenetpp/training.hpp"

namespace pdenetpp::experiment {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---- config reading ----------------------------------------------------------

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + " is not valid JSON: " + e.what());
  }
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path.string());
}

/// A JSON object with a fixed set of accepted keys.
class Section {
 public:
  Section(const json& j, std::string where, std::initializer_list<std::string_view> allowed)
      : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + " must be a JSON object");
    for (const auto& item : j.items()) {
      if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
        throw ConfigError("unknown key '" + item.key() + "' in " + where_);
      }
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing key '" + key + "' in " + where_);
    return j_.at(key);
  }

  template <class T>
  T require(const std::string& key) const {
    return convert<T>(key, raw(key));
  }

  template <class T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? convert<T>(key, j_.at(key)) : fallback;
  }

  std::size_t count(const std::string& key, std::optional<std::size_t> fallback = std::nullopt) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      raw(key);
    }
    const json& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError("key '" + key + "' in " + where_ + " must be a non-negative integer");
    }
    return v.get<std::size_t>();
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError("key '" + key + "' in " + where_ + " must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  const std::string& where() const { return where_; }

 private:
  template <class T>
  T convert(const std::string& key, const json& v) const {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, int>) {
        if (!v.is_number_integer()) throw ConfigError("");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' in " + where_ + " has the wrong type (" + v.dump() + ")");
    }
  }

  const json& j_;
  std::string where_;
};

fs::path resolve(const Options& o, const fs::path& p) {
  if (p.is_absolute()) return p;
  return o.config.parent_path() / p;
}

fs::path output_dir(const Options& o, const Section& s) {
  fs::path out = o.out ? *o.out : resolve(o, s.get<std::string>("out", "out"));
  fs::create_directories(out);
  return out;
}

std::uint64_t effective_seed(const Options& o, const Section& s) { return o.seed ? *o.seed : s.seed("seed", 0); }

fs::path existing(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
  return p;
}

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(const fs::path& path, const json& j) { pdnx::write_atomic(path, j.dump(2) + "\n"); }

// ---- PDE configuration -----------------------------------------------------

json pde_config_to_json(const PdeConfig& c) {
  return json{{"pde", std::string(to_string(c.pde))},
              {"length", c.length},
              {"coefficient", c.coefficient},
              {"alpha", c.alpha},
              {"beta", c.beta},
              {"fine_grid", c.fine_grid},
              {"coarse_grid", c.coarse_grid},
              {"fine_dt", c.fine_dt},
              {"substeps", c.substeps},
              {"coarse_dt", c.coarse_dt()},
              {"forced", c.forced},
              {"forcing_seed", c.forcing_seed}};
}

PdeConfig pde_config_from_json(const json& j, const std::string& where) {
  const Section s(j, where,
                  {"pde", "length", "coefficient", "alpha", "beta", "fine_grid", "coarse_grid", "fine_dt", "substeps",
                   "coarse_dt", "forced", "forcing_seed"});
  PdeConfig c = PdeConfig::defaults(parse_pde(s.require<std::string>("pde")));
  c.length = s.require<double>("length");
  c.coefficient = s.require<double>("coefficient");
  c.alpha = s.require<double>("alpha");
  c.beta = s.require<double>("beta");
  c.fine_grid = s.count("fine_grid");
  c.coarse_grid = s.count("coarse_grid");
  c.fine_dt = s.require<double>("fine_dt");
  c.substeps = s.count("substeps");
  c.forced = s.require<bool>("forced");
  c.forcing_seed = s.seed("forcing_seed", 0);
  c.validate();
  return c;
}

PdeConfig load_metadata(const fs::path& data_dir) {
  const json meta = read_json(existing(data_dir / "metadata.json", "dataset metadata"));
  if (!meta.contains("pde_config")) throw ConfigError("metadata.json has no pde_config");
  return pde_config_from_json(meta.at("pde_config"), "metadata pde_config");
}

// ---- model configuration -----------------------------------------------------

json backbone_to_json(const BackboneConfig& b) {
  return json{{"kind", std::string(to_string(b.kind))},
              {"width", b.width},
              {"depth", b.depth},
              {"modes", b.modes},
              {"nonlinearity", b.nonlinearity}};
}

BackboneConfig backbone_from_json(const json& j, BackboneConfig b) {
  const Section s(j, "backbone", {"kind", "width", "depth", "modes", "nonlinearity"});
  if (s.has("kind")) b.kind = parse_backbone_kind(s.require<std::string>("kind"));
  b.width = s.count("width", b.width);
  b.depth = s.count("depth", b.depth);
  b.modes = s.count("modes", b.modes);
  b.nonlinearity = s.get<bool>("nonlinearity", b.nonlinearity);
  if (b.width == 0) throw ConfigError("backbone width must be positive");
  return b;
}

json hybrid_to_json(const HybridConfig& c) {
  return json{{"pde", std::string(to_string(c.pde))},
              {"method", std::string(to_string(c.method))},
              {"coefficient", c.coefficient},
              {"dt", c.dt},
              {"length", c.length},
              {"grid", c.grid},
              {"half_width", c.half_width},
              {"r_first", c.r_first},
              {"r_second", c.r_second},
              {"hyper_hidden", c.hyper_hidden},
              {"use_backbone", c.use_backbone},
              {"backbone", backbone_to_json(c.backbone)},
              {"seed", c.seed}};
}

HybridConfig hybrid_from_json(const json& j) {
  const Section s(j, "model config",
                  {"pde", "method", "coefficient", "dt", "length", "grid", "half_width", "r_first", "r_second",
                   "hyper_hidden", "use_backbone", "backbone", "seed"});
  HybridConfig c;
  c.pde = parse_pde(s.require<std::string>("pde"));
  c.method = parse_method(s.require<std::string>("method"));
  c.coefficient = s.require<double>("coefficient");
  c.dt = s.require<double>("dt");
  c.length = s.require<double>("length");
  c.grid = s.count("grid");
  c.half_width = s.require<int>("half_width");
  c.r_first = s.require<int>("r_first");
  c.r_second = s.require<int>("r_second");
  c.hyper_hidden = s.count("hyper_hidden");
  c.use_backbone = s.require<bool>("use_backbone");
  c.backbone = backbone_from_json(s.raw("backbone"), c.backbone);
  c.seed = s.seed("seed", 0);
  return c;
}

void check_dataset(const Tensor& data, const HybridConfig& c, const std::string& what) {
  const Shape& s = data.shape();
  if (s.size() != 5 || s[2] != state_channels(c.pde) || s[3] != c.grid || s[4] != c.grid) {
    throw ConfigError(what + " has shape " + to_string(s) + " but the model expects [N, M+1, " +
                      std::to_string(state_channels(c.pde)) + ", " + std::to_string(c.grid) + ", " +
                      std::to_string(c.grid) + "]");
  }
  if (s[1] < 2) throw ConfigError(what + " needs at least two snapshots per trajectory");
}

// ---- schemes -------------------------------------------------------------------

std::vector<double> scheme_initial(const std::string& kind, std::size_t n, std::uint64_t seed) {
  std::vector<double> u(n, 0.0);
  if (kind == "square") {
    std::fill(u.begin() + static_cast<std::ptrdiff_t>(n / 4), u.begin() + static_cast<std::ptrdiff_t>(n / 2), 1.0);
  } else if (kind == "sine") {
    for (std::size_t j = 0; j < n; ++j) u[j] = std::sin(2.0 * 3.14159265358979323846 * static_cast<double>(j) / n);
  } else if (kind == "random_steps") {
    Rng rng(seed);
    std::uniform_real_distribution<double> level(-1.0, 1.0);
    std::bernoulli_distribution jump(0.1);
    double v = level(rng);
    for (std::size_t j = 0; j < n; ++j) {
      if (jump(rng)) v = level(rng);
      u[j] = v;
    }
  } else {
    throw ConfigError("unknown initial profile '" + kind + "' (expected square, sine or random_steps)");
  }
  return u;
}

double rms(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

}  // namespace

// ---- checkpoints ---------------------------------------------------------------

std::string hybrid_config_to_json(const HybridConfig& config) { return hybrid_to_json(config).dump(2); }

HybridConfig hybrid_config_from_json(std::string_view text) {
  return hybrid_from_json(parse_json(std::string(text), "model config"));
}

void save_checkpoint(const HybridModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  const ParamStore& store = model.params();
  json params = json::array();
  std::vector<double> blob;
  for (std::size_t p = 0; p < store.size(); ++p) {
    const Tensor& v = store.value(p);
    params.push_back({{"name", store.name(p)}, {"shape", v.shape()}, {"offset", blob.size()}});
    blob.insert(blob.end(), v.begin(), v.end());
  }
  const std::size_t total = blob.size();
  pdnx::write(dir / "parameters.pdnx", Tensor({total}, std::move(blob)));
  write_json(dir / "checkpoint.json", json{{"format", "pdenetpp-checkpoint"},
                                           {"version", 1},
                                           {"model", hybrid_to_json(model.config())},
                                           {"blob", "parameters.pdnx"},
                                           {"parameters", params}});
}

HybridModel load_checkpoint(const fs::path& manifest) {
  const json j = read_json(existing(manifest, "checkpoint"));
  const Section s(j, "checkpoint", {"format", "version", "model", "blob", "parameters"});
  if (s.require<std::string>("format") != "pdenetpp-checkpoint" || s.require<int>("version") != 1) {
    throw ConfigError(manifest.string() + " is not a version 1 checkpoint");
  }
  HybridModel model(hybrid_from_json(s.raw("model")));
  const Tensor blob = pdnx::read(existing(manifest.parent_path() / s.require<std::string>("blob"), "parameter blob"));
  const json& params = s.raw("parameters");
  ParamStore& store = model.params();
  if (!params.is_array() || params.size() != store.size()) {
    throw ConfigError("checkpoint lists " + std::to_string(params.size()) + " parameters, the model has " +
                      std::to_string(store.size()));
  }
  for (std::size_t p = 0; p < store.size(); ++p) {
    const Section e(params[p], "checkpoint parameter", {"name", "shape", "offset"});
    const auto shape = e.raw("shape").get<Shape>();
    if (e.require<std::string>("name") != store.name(p) || shape != store.value(p).shape()) {
      throw ConfigError("checkpoint parameter " + std::to_string(p) + " does not match " + store.name(p) + " " +
                        to_string(store.value(p).shape()));
    }
    const std::size_t off = e.count("offset"), n = store.value(p).size();
    if (off + n > blob.size()) throw ConfigError("parameter blob is too short");
    store.set(p, Tensor(shape, std::vector<double>(blob.begin() + off, blob.begin() + off + n)));
  }
  return model;
}

std::string encode_pgm(const Tensor& field) {
  if (field.rank() != 2) throw ShapeError("encode_pgm expects [H,W], got " + to_string(field.shape()));
  const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
  std::string out = "P5\n" + std::to_string(field.dim(1)) + " " + std::to_string(field.dim(0)) + "\n255\n";
  for (double v : field) {
    int g = 128;
    if (*hi > *lo) g = static_cast<int>(std::lround(255.0 * (v - *lo) / (*hi - *lo)));
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::clamp(g, 0, 255))));
  }
  return out;
}

// ---- commands --------------------------------------------------------------------

fs::path cmd_generate(const Options& o) {
  const json cfg = read_json(o.config);
  const Section s(cfg, "generate config",
                  {"pde", "preset", "length", "coefficient", "alpha", "beta", "fine_grid", "coarse_grid", "fine_dt",
                   "substeps", "forced", "forcing_seed", "train", "test", "noise", "seed", "out"});
  const std::uint64_t seed = effective_seed(o, s);
  const Pde pde = parse_pde(s.require<std::string>("pde"));
  const std::string preset = s.get<std::string>("preset", "default");
  PdeConfig pc;
  if (preset == "default") {
    pc = PdeConfig::defaults(pde);
  } else if (preset == "ns_hard") {
    if (pde != Pde::NavierStokes) throw ConfigError("preset ns_hard requires pde ns");
    pc = PdeConfig::ns_hard();
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected default or ns_hard)");
  }
  pc.length = s.get<double>("length", pc.length);
  pc.coefficient = s.get<double>("coefficient", pc.coefficient);
  pc.alpha = s.get<double>("alpha", pc.alpha);
  pc.beta = s.get<double>("beta", pc.beta);
  pc.fine_grid = s.count("fine_grid", pc.fine_grid);
  pc.coarse_grid = s.count("coarse_grid", pc.coarse_grid);
  pc.fine_dt = s.get<double>("fine_dt", pc.fine_dt);
  pc.substeps = s.count("substeps", pc.substeps);
  pc.forced = s.get<bool>("forced", pc.forced);
  pc.forcing_seed = s.seed("forcing_seed", seed);
  pc.validate();
  const Section train(s.raw("train"), "train section", {"trajectories", "steps"});
  const std::size_t n = train.count("trajectories"), m = train.count("steps");
  if (n == 0 || m == 0) throw ConfigError("the training set needs at least one trajectory and one step");
  const double noise = s.get<double>("noise", 0.001);
  if (!(noise >= 0.0)) throw ConfigError("noise amplitude must be non-negative");

  const fs::path out = output_dir(o, s);
  const std::uint64_t test_seed = derive_seed(seed, 1), noise_seed = derive_seed(seed, 2);
  const Dataset ds = generate_dataset(pc, n, m, seed);
  pdnx::write(out / "train_clean.pdnx", ds.data);
  pdnx::write(out / "train_noisy.pdnx", add_noise(ds.data, noise, noise_seed));
  json files = {{"train_clean", "train_clean.pdnx"}, {"train_noisy", "train_noisy.pdnx"}};
  json meta = {{"pde_config", pde_config_to_json(pc)},
               {"seed", seed},
               {"noise", noise},
               {"noise_seed", noise_seed},
               {"train", {{"trajectories", n}, {"steps", m}, {"seed", seed}, {"shape", ds.data.shape()}}}};
  if (s.has("test")) {
    const Section test(s.raw("test"), "test section", {"trajectories", "steps"});
    const std::size_t nt = test.count("trajectories"), mt = test.count("steps");
    if (nt == 0 || mt == 0) throw ConfigError("the test set needs at least one trajectory and one step");
    const Dataset td = generate_dataset(pc, nt, mt, test_seed);
    pdnx::write(out / "test.pdnx", td.data);
    files["test"] = "test.pdnx";
    meta["test"] = {{"trajectories", nt}, {"steps", mt}, {"seed", test_seed}, {"shape", td.data.shape()}};
  }
  if (ds.forcing) {
    pdnx::write(out / "forcing.pdnx", *ds.forcing);
    files["forcing"] = "forcing.pdnx";
  }
  meta["files"] = files;
  write_json(out / "metadata.json", meta);
  return out;
}

fs::path cmd_train(const Options& o) {
  const json cfg = read_json(o.config);
  const Section s(cfg, "train config",
                  {"data", "dataset", "method", "backbone", "use_backbone", "half_width", "r_first", "r_second",
                   "hyper_hidden", "epochs", "batch_size", "learning_rate", "decay_every", "lambda", "seed", "out"});
  const std::uint64_t seed = effective_seed(o, s);
  const fs::path data_dir = resolve(o, s.require<std::string>("data"));
  const PdeConfig pc = load_metadata(data_dir);
  const Tensor data =
      pdnx::read(existing(data_dir / s.get<std::string>("dataset", "train_noisy.pdnx"), "training dataset"));

  HybridConfig hc;
  hc.pde = pc.pde;
  hc.method = parse_method(s.require<std::string>("method"));
  hc.coefficient = pc.coefficient;
  hc.dt = pc.coarse_dt();
  hc.length = pc.length;
  hc.grid = pc.coarse_grid;
  hc.half_width = s.get<int>("half_width", hc.half_width);
  hc.r_first = s.get<int>("r_first", hc.r_first);
  hc.r_second = s.get<int>("r_second", hc.r_second);
  hc.hyper_hidden = s.count("hyper_hidden", hc.hyper_hidden);
  hc.use_backbone = s.get<bool>("use_backbone", true);
  if (s.has("backbone")) hc.backbone = backbone_from_json(s.raw("backbone"), hc.backbone);
  hc.seed = seed;
  check_dataset(data, hc, "training dataset");
  HybridModel model(hc);

  TrainConfig tc;
  tc.epochs = s.count("epochs", tc.epochs);
  tc.batch_size = s.count("batch_size", tc.batch_size);
  tc.learning_rate = s.get<double>("learning_rate", tc.learning_rate);
  tc.decay_every = s.count("decay_every", tc.decay_every);
  tc.lambda = s.get<double>("lambda", tc.lambda);
  tc.seed = derive_seed(seed, 3);
  if (tc.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(tc.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(tc.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");

  const fs::path out = output_dir(o, s);
  std::string csv = "epoch,loss,pred_loss,reg_loss\n";
  train(model, data, tc, [&](const EpochRecord& r) {
    csv += std::to_string(r.epoch) + "," + number(r.loss) + "," + number(r.pred_loss) + "," + number(r.reg_loss) + "\n";
    if (o.progress) *o.progress << "epoch " << r.epoch << " loss " << number(r.loss) << "\n" << std::flush;
  });
  save_checkpoint(model, out);
  pdnx::write_atomic(out / "loss_history.csv", csv);
  return out;
}

fs::path cmd_evaluate(const Options& o) {
  const json cfg = read_json(o.config);
  const Section s(cfg, "evaluate config", {"checkpoint", "oracle", "data", "dataset", "threshold", "out"});
  const Tensor data = pdnx::read(existing(resolve(o, s.require<std::string>("dataset")), "test dataset"));
  const double threshold = s.get<double>("threshold", 1.0);
  if (data.rank() != 5 || data.dim(1) < 2) throw ConfigError("test dataset must be [N, M+1, C, n, n] with M >= 1");

  std::optional<HybridModel> model;
  std::optional<PdeConfig> oracle;
  std::optional<SpectralSolver> solver;
  std::optional<Tensor> forcing;
  StepFn step;
  if (s.get<bool>("oracle", false)) {
    if (s.has("checkpoint")) throw ConfigError("evaluate takes either a checkpoint or the oracle, not both");
    const fs::path data_dir = resolve(o, s.require<std::string>("data"));
    oracle = load_metadata(data_dir);
    if (data.dim(2) != state_channels(oracle->pde) || data.dim(3) != data.dim(4) || data.dim(3) % 2 != 0) {
      throw ConfigError("test dataset shape " + to_string(data.shape()) + " does not fit the oracle");
    }
    solver.emplace(data.dim(3), oracle->length);
    if (oracle->pde == Pde::NavierStokes) {
      const Tensor f = pdnx::read(existing(data_dir / "forcing.pdnx", "forcing field"));
      forcing = downsample(f.reshaped({f.dim(0), f.dim(1)}), data.dim(3));
    }
    step = [&](const Tensor& u) {
      const PdeConfig& c = *oracle;
      Rhs rhs;
      switch (c.pde) {
        case Pde::Burgers: rhs = [&](const Tensor& x) { return solver->burgers_rhs(x, c.coefficient, c.forced); }; break;
        case Pde::FitzHughNagumo: rhs = [&](const Tensor& x) { return solver->fn_rhs(x, c.coefficient, c.alpha, c.beta); }; break;
        case Pde::NavierStokes: rhs = [&](const Tensor& x) { return solver->ns_rhs(x, c.coefficient, forcing); }; break;
      }
      Tensor x = u;
      for (std::size_t k = 0; k < c.substeps; ++k) x = rk4_step(x, rhs, c.fine_dt);
      return x;
    };
  } else {
    model.emplace(load_checkpoint(resolve(o, s.require<std::string>("checkpoint"))));
    check_dataset(data, model->config(), "test dataset");
    step = [&](const Tensor& u) { return model->step(u); };
  }

  const EvalReport rep = evaluate(step, data, threshold);
  const fs::path out = output_dir(o, s);
  std::string csv = "trajectory,step,rel_error,failed_flag\n";
  json failed = json::array();
  for (std::size_t i = 0; i < rep.errors.size(); ++i) {
    if (rep.failed_step[i]) failed.push_back(i);
    for (std::size_t j = 0; j < rep.errors[i].size(); ++j) {
      const bool flag = rep.failed_step[i] && j + 1 >= *rep.failed_step[i];
      csv += std::to_string(i) + "," + std::to_string(j + 1) + "," + number(rep.errors[i][j]) + "," + (flag ? "1" : "0") + "\n";
    }
  }
  pdnx::write_atomic(out / "errors.csv", csv);
  write_json(out / "report.json", json{{"avg_l2_error", finite_or_null(rep.avg_l2_error)},
                                       {"sr_percent", rep.sr_percent},
                                       {"n_failed", rep.n_failed},
                                       {"failed_trajectories", failed},
                                       {"trajectories", data.dim(0)},
                                       {"steps", data.dim(1) - 1},
                                       {"threshold", threshold}});
  return out;
}

fs::path cmd_rollout(const Options& o) {
  const json cfg = read_json(o.config);
  const Section s(cfg, "rollout config", {"checkpoint", "initial", "trajectory", "steps", "frames", "channel", "out"});
  const HybridModel model = load_checkpoint(resolve(o, s.require<std::string>("checkpoint")));
  const Tensor source = pdnx::read(existing(resolve(o, s.require<std::string>("initial")), "initial condition"));
  Tensor initial;
  if (source.rank() == 5) {
    initial = snapshot(source, s.count("trajectory", 0), 0);
  } else if (source.rank() == 3) {
    initial = source;
  } else {
    throw ConfigError("initial condition must be [C,n,n] or a [N,M+1,C,n,n] dataset, got " + to_string(source.shape()));
  }
  const int requested = s.require<int>("steps");
  if (requested < 0) throw ConfigError("steps must be non-negative");
  const auto steps = static_cast<std::size_t>(requested);
  std::vector<std::size_t> frames;
  if (s.has("frames")) {
    const json& f = s.raw("frames");
    if (!f.is_array()) throw ConfigError("frames must be a list of step indices");
    for (const auto& v : f) {
      if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<std::size_t>() > steps) {
        throw ConfigError("frame " + v.dump() + " is outside 0.." + std::to_string(steps));
      }
      frames.push_back(v.get<std::size_t>());
    }
  } else {
    for (std::size_t j = 0; j <= steps; ++j) frames.push_back(j);
  }
  const std::size_t channel = s.count("channel", 0);
  if (channel >= model.channels()) throw ConfigError("channel " + std::to_string(channel) + " out of range");
  if (initial.shape() != Shape{model.channels(), model.config().grid, model.config().grid}) {
    throw ConfigError("initial condition " + to_string(initial.shape()) + " does not match the model");
  }

  const Rollout r = rollout([&](const Tensor& u) { return model.step(u); }, initial, steps);
  const fs::path out = output_dir(o, s);
  std::vector<double> traj;
  for (const auto& st : r.states) traj.insert(traj.end(), st.begin(), st.end());
  Shape ts = initial.shape();
  ts.insert(ts.begin(), r.states.size());
  pdnx::write(out / "trajectory.pdnx", Tensor(ts, std::move(traj)));

  fs::create_directories(out / "frames");
  const std::size_t n = model.config().grid, plane = n * n;
  json list = json::array();
  for (std::size_t f : frames) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%06zu.pgm", f);
    if (f >= r.states.size()) {
      list.push_back({{"step", f}, {"file", nullptr}, {"min", nullptr}, {"max", nullptr}});
      continue;
    }
    const Tensor& st = r.states[f];
    const Tensor field({n, n}, std::vector<double>(st.begin() + channel * plane, st.begin() + (channel + 1) * plane));
    const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
    pdnx::write_atomic(out / "frames" / name, encode_pgm(field));
    list.push_back({{"step", f}, {"file", std::string("frames/") + name}, {"min", *lo}, {"max", *hi}});
  }
  write_json(out / "frames.json", json{{"channel", channel},
                                       {"steps", steps},
                                       {"failed_step", r.failed_step ? json(*r.failed_step) : json(nullptr)},
                                       {"normalization", "per-frame min-max to 0..255; constant frames are 128"},
                                       {"frames", list}});
  return out;
}

fs::path cmd_schemes(const Options& o) {
  const json cfg = read_json(o.config);
  const Section s(cfg, "schemes config", {"cells", "steps", "mu", "initial", "schemes", "seed", "out"});
  const std::size_t n = s.count("cells", 100), steps = s.count("steps", 100);
  if (n < 5) throw ConfigError("at least 5 cells are needed");
  const double mu = s.get<double>("mu", 0.5);
  const std::vector<double> u0 = scheme_initial(s.get<std::string>("initial", "square"), n, effective_seed(o, s));
  std::vector<std::string> names = {"upwind1", "upwind2", "minmod", "vanleer", "weno3"};
  if (s.has("schemes")) {
    try {
      names = s.raw("schemes").get<std::vector<std::string>>();
    } catch (const json::exception&) {
      throw ConfigError("schemes must be a list of names");
    }
  }
  const fs::path out = output_dir(o, s);
  json summary = {{"cells", n}, {"steps", steps}, {"mu", mu}, {"initial", s.get<std::string>("initial", "square")}};
  summary["warning"] = std::abs(mu) > 1.0 ? json("|mu| > 1: the CFL condition is violated and explicit schemes are unstable")
                                          : json(nullptr);
  json results = json::object();
  for (const auto& name : names) {
    std::function<std::vector<double>(const std::vector<double>&)> step;
    std::string skip;
    if (name == "upwind1") {
      step = [&](const std::vector<double>& u) { return schemes::upwind_step_1(u, mu); };
    } else if (name == "upwind2") {
      step = [&](const std::vector<double>& u) { return schemes::upwind_step_2(u, mu); };
    } else if (name == "minmod" || name == "vanleer") {
      const auto lim = name == "minmod" ? schemes::Limiter::Minmod : schemes::Limiter::VanLeer;
      if (mu > 0.0 && mu <= 1.0) {
        step = [&, lim](const std::vector<double>& u) { return schemes::flux_limited_step(u, mu, lim); };
      } else {
        skip = "flux-limited schemes need 0 < mu <= 1";
      }
    } else if (name == "weno3") {
      if (mu > 0.0) {
        step = [&](const std::vector<double>& u) { return schemes::weno3_step(u, mu); };
      } else {
        skip = "weno3 needs mu > 0";
      }
    } else {
      throw ConfigError("unknown scheme '" + name + "' (expected upwind1, upwind2, minmod, vanleer or weno3)");
    }
    if (!skip.empty()) {
      results[name] = {{"skipped", skip}};
      continue;
    }
    std::string csv = "step,tv,l2_error\n";
    std::vector<double> u = u0;
    bool tv_monotone = true;
    double tv_prev = schemes::total_variation(u);
    for (std::size_t j = 0; j <= steps; ++j) {
      if (j > 0) u = step(u);
      const double tv = schemes::total_variation(u);
      if (j > 0 && tv > tv_prev + 1e-12) tv_monotone = false;
      tv_prev = tv;
      const double err = rms(u, schemes::shifted(u0, mu * static_cast<double>(j)));
      csv += std::to_string(j) + "," + number(tv) + "," + number(err) + "\n";
    }
    pdnx::write_atomic(out / (name + ".csv"), csv);
    results[name] = {{"file", name + ".csv"},
                     {"final_tv", finite_or_null(tv_prev)},
                     {"final_l2_error", finite_or_null(rms(u, schemes::shifted(u0, mu * static_cast<double>(steps))))},
                     {"tv_non_increasing", tv_monotone}};
  }
  summary["schemes"] = results;
  write_json(out / "summary.json", summary);
  return out;
}

int run(std::string_view command, const Options& options, std::ostream& log, std::ostream& err) {
  try {
    fs::path out;
    if (command == "generate") {
      out = cmd_generate(options);
    } else if (command == "train") {
      out = cmd_train(options);
    } else if (command == "evaluate") {
      out = cmd_evaluate(options);
    } else if (command == "rollout") {
      out = cmd_rollout(options);
    } else if (command == "schemes") {
      out = cmd_schemes(options);
    } else {
      throw ConfigError("unknown command '" + std::string(command) +
                        "' (expected generate, train, evaluate, rollout or schemes)");
    }
    log << command << ": wrote " << out.string() << "\n";
    return kSuccess;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const pdnx::FormatError& e) {
    err << "bad data file: " << e.what() << "\n";
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::out_of_range& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace pdenetpp::experiment
