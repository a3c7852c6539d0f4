#include "optrank/serialize.hpp"

#include <fstream>

namespace optrank {

using nlohmann::json;

namespace {

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr) {
  Vector v(static_cast<Index>(arr.size()));
  Index i = 0;
  for (const auto& x : arr) v[i++] = x.get<Scalar>();
  return v;
}

}  // namespace

void to_json(json& j, const ModelFamily& fam) {
  j = json{{"kind", kind_name(fam.kind)}, {"d", fam.d}};
  switch (fam.kind) {
    case Kind::DeepDiagonal:
      j["L"] = fam.L;
      j["squared"] = fam.squared;
      break;
    case Kind::TwoLayerTanhFC:
      j["m"] = fam.m;
      j["with_bias"] = fam.with_bias;
      break;
    case Kind::TwoLayerTanhCNN:
    case Kind::TwoLayerTanhCNNNoShare:
      j["m_c"] = fam.m_c;
      j["s"] = fam.s;
      j["conv_dims"] = fam.conv_dims;
      j["with_bias"] = fam.with_bias;
      break;
    default:
      break;
  }
}

void from_json(const json& j, ModelFamily& fam) {
  fam = ModelFamily{};
  fam.kind = kind_from_name(j.at("kind").get<std::string>());
  fam.d = j.value("d", 2);
  fam.L = j.value("L", 2);
  fam.squared = j.value("squared", false);
  fam.m = j.value("m", 0);
  fam.m_c = j.value("m_c", 0);
  fam.s = j.value("s", 0);
  fam.conv_dims = j.value("conv_dims", 1);
  fam.with_bias = j.value("with_bias", false);
  validate_family(fam);
}

void to_json(json& j, const TargetSpec& t) {
  j = json{{"schema_version", 1},
           {"id", t.id},
           {"generator", t.generator},
           {"params", vector_to_json(t.params)}};
  json desc = json::object();
  if (t.sparsity) desc["sparsity"] = *t.sparsity;
  if (t.matrix_rank) desc["matrix_rank"] = *t.matrix_rank;
  if (t.intrinsic_width) desc["intrinsic_width"] = *t.intrinsic_width;
  if (t.intrinsic_kernels) desc["intrinsic_kernels"] = *t.intrinsic_kernels;
  j["descriptor"] = desc;
}

void from_json(const json& j, TargetSpec& t) {
  t = TargetSpec{};
  t.id = j.at("id").get<std::string>();
  t.generator = j.at("generator").get<ModelFamily>();
  t.params = vector_from_json(j.at("params"));
  const json desc = j.value("descriptor", json::object());
  if (desc.contains("sparsity")) t.sparsity = desc["sparsity"].get<int>();
  if (desc.contains("matrix_rank")) t.matrix_rank = desc["matrix_rank"].get<int>();
  if (desc.contains("intrinsic_width")) t.intrinsic_width = desc["intrinsic_width"].get<int>();
  if (desc.contains("intrinsic_kernels"))
    t.intrinsic_kernels = desc["intrinsic_kernels"].get<int>();
  validate_target(t);
}

void to_json(json& j, const TrainConfig& cfg) {
  j = json{{"init_std", cfg.init_std},
           {"learning_rate", cfg.learning_rate},
           {"stop_train_mse", cfg.stop_train_mse},
           {"max_iters", cfg.max_iters},
           {"seed", cfg.seed},
           {"trace_every", cfg.trace_every}};
}

void from_json(const json& j, TrainConfig& cfg) {
  cfg = TrainConfig{};
  cfg.init_std = j.value("init_std", cfg.init_std);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.stop_train_mse = j.value("stop_train_mse", cfg.stop_train_mse);
  cfg.max_iters = j.value("max_iters", cfg.max_iters);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.trace_every = j.value("trace_every", cfg.trace_every);
  validate_config(cfg);
}

namespace {

const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::Targets: return "targets";
    case SweepAxis::Widths: return "widths";
    case SweepAxis::InitStds: return "init_stds";
  }
  return "targets";
}

SweepAxis axis_from_name(const std::string& s) {
  if (s == "targets") return SweepAxis::Targets;
  if (s == "widths") return SweepAxis::Widths;
  if (s == "init_stds") return SweepAxis::InitStds;
  throw ConfigError("unknown sweep axis: " + s);
}

}  // namespace

void to_json(json& j, const SweepSpec& spec) {
  j = json{{"schema_version", spec.schema_version},
           {"name", spec.name},
           {"family", spec.family},
           {"axis", axis_name(spec.axis)},
           {"targets", spec.targets},
           {"sample_sizes", spec.sample_sizes},
           {"trials", spec.trials},
           {"train", spec.train},
           {"fit_threshold", spec.fit_threshold},
           {"test_size", spec.test_size},
           {"seed", spec.seed},
           {"mf_sampling", spec.mf_sampling == MfSampling::PivotCross ? "pivot_cross" : "uniform"},
           {"train_sets", spec.train_sets == TrainSets::PerCell ? "per_cell" : "per_trial"}};
  if (!spec.widths.empty()) j["widths"] = spec.widths;
  if (!spec.init_stds.empty()) j["init_stds"] = spec.init_stds;
  if (!spec.lr_grid.empty()) j["lr_grid"] = spec.lr_grid;
}

void from_json(const json& j, SweepSpec& spec) {
  spec = SweepSpec{};
  spec.schema_version = j.value("schema_version", 1);
  if (spec.schema_version != 1)
    throw ConfigError("unsupported sweep spec schema_version " +
                      std::to_string(spec.schema_version));
  spec.name = j.value("name", "sweep");
  spec.family = j.at("family").get<ModelFamily>();
  spec.axis = axis_from_name(j.value("axis", "targets"));
  spec.targets = j.at("targets").get<std::vector<std::string>>();
  spec.widths = j.value("widths", std::vector<int>{});
  spec.init_stds = j.value("init_stds", std::vector<Scalar>{});
  spec.sample_sizes = j.at("sample_sizes").get<std::vector<int>>();
  spec.trials = j.value("trials", 1);
  if (j.contains("train")) spec.train = j["train"].get<TrainConfig>();
  spec.lr_grid = j.value("lr_grid", std::vector<Scalar>{});
  spec.fit_threshold = j.value("fit_threshold", spec.fit_threshold);
  spec.test_size = j.value("test_size", spec.test_size);
  spec.seed = j.value("seed", spec.seed);
  const std::string sampling = j.value("mf_sampling", "pivot_cross");
  if (sampling == "pivot_cross") spec.mf_sampling = MfSampling::PivotCross;
  else if (sampling == "uniform") spec.mf_sampling = MfSampling::Uniform;
  else throw ConfigError("unknown mf_sampling mode: " + sampling);
  const std::string sets = j.value("train_sets", "per_trial");
  if (sets == "per_trial") spec.train_sets = TrainSets::PerTrial;
  else if (sets == "per_cell") spec.train_sets = TrainSets::PerCell;
  else throw ConfigError("unknown train_sets mode: " + sets);
  validate_spec(spec);
}

void to_json(json& j, const RankReport& rep) {
  j = json{{"rank", rep.rank},
           {"singular_values", vector_to_json(rep.singular_values)},
           {"tolerance", rep.tolerance},
           {"ambiguous", rep.ambiguous()}};
  if (std::isfinite(rep.gap_ratio)) j["gap_ratio"] = rep.gap_ratio;
  else j["gap_ratio"] = nullptr;
}

void to_json(json& j, const TrainResult& res) {
  j = json{{"train_mse", res.train_mse}, {"test_mse", res.test_mse},
           {"iterations", res.iterations}, {"converged", res.converged},
           {"diverged", res.diverged},     {"learning_rate", res.learning_rate}};
}

SweepSpec load_spec_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec file: " + path.string());
  json j;
  try {
    in >> j;
    return j.get<SweepSpec>();
  } catch (const json::exception& e) {
    throw ConfigError("malformed spec file " + path.string() + ": " + e.what());
  }
}

}  // namespace optrank
