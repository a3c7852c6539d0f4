#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "optrank/harness.hpp"
#include "optrank/model_zoo.hpp"
#include "optrank/rank_engine.hpp"
#include "optrank/report.hpp"
#include "optrank/rng.hpp"
#include "optrank/serialize.hpp"
#include "optrank/trainer.hpp"

using nlohmann::json;
using namespace optrank;

namespace {

struct FamilyFlags {
  std::string name;
  int d = 2, m = 0, m_c = 0, s = 0, L = 2, conv_dims = 0;
  bool with_bias = false, squared = false;
};

void add_family_flags(CLI::App* cmd, FamilyFlags& f) {
  cmd->add_option("--family", f.name,
                  "model family: linear3 | rl4 | deepdiag | mf | fc | cnn1d | cnn2d | "
                  "cnn1d-ns | cnn2d-ns")
      ->required();
  cmd->add_option("--d", f.d, "input dimension (matrix side for mf)");
  cmd->add_option("--m", f.m, "hidden width (fc)");
  cmd->add_option("--mc", f.m_c, "kernel count (cnn)");
  cmd->add_option("--s", f.s, "kernel size (cnn)");
  cmd->add_option("--L", f.L, "depth (deepdiag)");
  cmd->add_flag("--squared", f.squared, "use the squared depth-2 form (deepdiag)");
  cmd->add_flag("--with-bias", f.with_bias, "add bias terms (fc/cnn)");
}

ModelFamily family_from_flags(const FamilyFlags& f) {
  if (f.name == "linear3") return linear3();
  if (f.name == "rl4" || f.name == "reparam4") return reparam_linear4();
  if (f.name == "deepdiag") return deep_diagonal(f.d, f.L, f.squared);
  if (f.name == "mf") return matrix_factorization(f.d);
  if (f.name == "fc") return two_layer_tanh_fc(f.d, f.m, f.with_bias);
  if (f.name == "cnn1d") return two_layer_tanh_cnn(f.d, f.m_c, f.s, 1, f.with_bias);
  if (f.name == "cnn2d") return two_layer_tanh_cnn(f.d, f.m_c, f.s, 2, f.with_bias);
  if (f.name == "cnn1d-ns") return two_layer_tanh_cnn_noshare(f.d, f.m_c, f.s, 1, f.with_bias);
  if (f.name == "cnn2d-ns") return two_layer_tanh_cnn_noshare(f.d, f.m_c, f.s, 2, f.with_bias);
  try {
    ModelFamily fam;
    fam.kind = kind_from_name(f.name);
    fam.d = f.d;
    fam.m = f.m;
    fam.m_c = f.m_c;
    fam.s = f.s;
    fam.L = f.L;
    fam.squared = f.squared;
    fam.with_bias = f.with_bias;
    if (fam.kind == Kind::TwoLayerTanhCNN || fam.kind == Kind::TwoLayerTanhCNNNoShare)
      fam.conv_dims = f.conv_dims > 0 ? f.conv_dims : 1;
    validate_family(fam);
    return fam;
  } catch (const ConfigError&) {
    throw ConfigError("unknown family name: " + f.name);
  }
}

Vector theta_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open theta file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed theta file: " + std::string(e.what()));
  }
  const json& arr = j.is_object() && j.contains("theta") ? j["theta"] : j;
  if (!arr.is_array()) throw ConfigError("theta file must hold an array (or {\"theta\": [..]})");
  Vector theta(static_cast<Index>(arr.size()));
  Index i = 0;
  for (const auto& x : arr) theta[i++] = x.get<Scalar>();
  return theta;
}

TargetSpec target_from_arg(const std::string& arg) {
  if (is_builtin_target(arg)) return builtin_target(arg);
  std::ifstream in(arg);
  if (!in) throw ConfigError("'" + arg + "' is neither a known target id nor a readable file");
  json j;
  try {
    in >> j;
    return j.get<TargetSpec>();
  } catch (const json::exception& e) {
    throw ConfigError("malformed target file " + arg + ": " + e.what());
  }
}

std::uint64_t seed_override(std::uint64_t seed) {
  if (const char* env = std::getenv("OPTRANK_SEED")) return std::stoull(env);
  return seed;
}

int cmd_rank(const FamilyFlags& fams, const std::string& theta_file, bool random_point,
             Scalar tol, int probes, std::uint64_t seed) {
  const ModelFamily fam = family_from_flags(fams);
  Vector theta;
  if (!theta_file.empty()) {
    theta = theta_from_file(theta_file);
  } else if (random_point) {
    auto rng = make_rng(mix_seed(seed, {0x7a}));
    theta = normal_vector(rng, param_count(fam));
  } else {
    throw ConfigError("provide --theta-file or --random-point");
  }
  const RankReport rep = rank_at_point(fam, theta, tol, probes, seed);
  if (rep.ambiguous())
    std::cerr << "warning: spectral gap ratio " << rep.gap_ratio
              << " is below 1e3; the rank estimate is ambiguous\n";
  json out = rep;
  out["family"] = fam;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_predict(const FamilyFlags& fams, const std::string& target_arg, int rank_flag,
                int k_flag) {
  const ModelFamily fam = family_from_flags(fams);
  json out;
  out["family"] = fam;
  int optimistic = 0;
  if (!target_arg.empty()) {
    const TargetSpec t = target_from_arg(target_arg);
    optimistic = closed_form_optimistic(fam, t);
    out["target"] = t.id;
  } else if (rank_flag >= 0 || k_flag >= 0) {
    optimistic = optimistic_from_complexity(fam, rank_flag >= 0 ? rank_flag : k_flag);
  } else {
    throw ConfigError("provide --target, --rank or --k");
  }
  out["optimistic_sample_size"] = optimistic;
  const bool width_known = (fam.kind != Kind::TwoLayerTanhFC || fam.m > 0) &&
                           ((fam.kind != Kind::TwoLayerTanhCNN &&
                             fam.kind != Kind::TwoLayerTanhCNNNoShare) ||
                            fam.m_c > 0);
  if (width_known) out["max_rank"] = max_rank_closed_form(fam);
  else out["max_rank"] = nullptr;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_train(const FamilyFlags& fams, const std::string& target_arg, int n, int test_size,
              const TrainConfig& cfg, const std::string& sampling, const std::string& trace_csv,
              const std::string& theta_out) {
  const ModelFamily fam = family_from_flags(fams);
  const TargetSpec target = target_from_arg(target_arg);
  const MfSampling mode = sampling == "uniform" ? MfSampling::Uniform : MfSampling::PivotCross;
  TrainConfig run_cfg = cfg;
  run_cfg.seed = seed_override(cfg.seed);
  if (!trace_csv.empty() && run_cfg.trace_every == 0) run_cfg.trace_every = 100;
  const Dataset train =
      sample_dataset(target, n, mix_seed(run_cfg.seed, {0x10}), Split::Train, mode);
  const Dataset test =
      sample_dataset(target, test_size, mix_seed(run_cfg.seed, {0x30}), Split::Test, mode);
  const TrainResult res = gd_fit(fam, train, test, run_cfg);
  if (!trace_csv.empty()) {
    std::ofstream out(trace_csv);
    if (!out) throw RuntimeFailure("cannot write trace file: " + trace_csv);
    out << "iter,train_mse\n";
    char buf[48];
    for (const auto& [it, l] : res.trace) {
      std::snprintf(buf, sizeof buf, "%ld,%.17g\n", it, l);
      out << buf;
    }
  }
  if (!theta_out.empty()) {
    std::ofstream out(theta_out);
    if (!out) throw RuntimeFailure("cannot write theta file: " + theta_out);
    json j;
    j["theta"] = std::vector<Scalar>(res.theta.data(), res.theta.data() + res.theta.size());
    out << j.dump() << "\n";
  }
  json out = res;
  out["target"] = target.id;
  out["n"] = n;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const std::string& spec_file, const std::string& out_dir, int workers,
              bool quiet) {
  SweepSpec spec = load_spec_file(spec_file);
  spec.seed = seed_override(spec.seed);
  std::function<void(std::size_t, std::size_t)> progress;
  if (!quiet)
    progress = [](std::size_t done, std::size_t total) {
      if (done % 64 == 0 || done == total)
        std::cerr << "\r" << done << "/" << total << " cells" << std::flush;
    };
  const SweepGrid grid = run_sweep(spec, workers, progress);
  if (!quiet) std::cerr << "\n";
  persist(grid, out_dir);
  const TransitionReport report = detect_transitions(grid);
  std::cout << "sweep '" << spec.name << "' -> " << out_dir << "\n"
            << format_transition_table(report);
  return 0;
}

int cmd_report(const std::string& run_dir, const std::string& format, std::string out_path) {
  const SweepGrid grid = load_grid(run_dir);
  if (format == "svg") {
    if (out_path.empty()) out_path = (std::filesystem::path(run_dir) / "report.svg").string();
    std::ofstream out(out_path);
    if (!out) throw RuntimeFailure("cannot write " + out_path);
    out << render_heatmap_svg(grid);
    std::cout << "wrote " << out_path << "\n"
              << format_transition_table(detect_transitions(grid));
    return 0;
  }
  if (format == "csv") {
    const TransitionReport report = detect_transitions(grid);
    std::cout << "row_id,optimistic_n,empirical_n,gap\n";
    for (std::size_t r = 0; r < report.rows.size(); ++r) {
      const TransitionRow& row = report.rows[r];
      std::cout << r << ',';
      if (row.optimistic_n) std::cout << *row.optimistic_n;
      std::cout << ',';
      if (row.empirical_n) std::cout << *row.empirical_n;
      std::cout << ',';
      if (row.gap) std::cout << *row.gap;
      std::cout << '\n';
    }
    return 0;
  }
  throw ConfigError("unknown report format: " + format);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimistic sample size toolkit"};
  app.require_subcommand(1);

  FamilyFlags rank_fam, predict_fam, train_fam;
  std::string theta_file, predict_target, train_target, spec_file, out_dir, run_dir;
  std::string report_format = "svg", report_out, trace_csv, theta_out, sampling = "pivot_cross";
  bool random_point = false, quiet = false;
  Scalar tol = kDefaultRankTol;
  int probes = 0, rank_flag = -1, k_flag = -1, n = 0, test_size = 1000, workers = 1;
  std::uint64_t rank_seed = 0;
  TrainConfig train_cfg;

  CLI::App* rank = app.add_subcommand("rank", "numerical model rank at a parameter point");
  add_family_flags(rank, rank_fam);
  rank->add_option("--theta-file", theta_file, "JSON file with the parameter vector");
  rank->add_flag("--random-point", random_point, "use a standard-normal parameter point");
  rank->add_option("--tol", tol, "relative singular value tolerance");
  rank->add_option("--probes", probes, "probe count (default max(4M, 64))");
  rank->add_option("--seed", rank_seed, "probe / random point seed");

  CLI::App* predict = app.add_subcommand("predict", "closed-form optimistic sample size");
  add_family_flags(predict, predict_fam);
  predict->add_option("--target", predict_target, "target id or TargetSpec JSON file");
  predict->add_option("--rank", rank_flag, "target matrix rank (mf)");
  predict->add_option("--k", k_flag, "intrinsic width / kernel count / sparsity");

  CLI::App* train = app.add_subcommand("train", "single gradient-descent fit");
  add_family_flags(train, train_fam);
  train->add_option("--target", train_target, "target id or TargetSpec JSON file")->required();
  train->add_option("--n", n, "training sample size")->required();
  train->add_option("--test-size", test_size, "test set size (functions; mf uses all entries)");
  train->add_option("--lr", train_cfg.learning_rate, "learning rate");
  train->add_option("--init-std", train_cfg.init_std, "initialization standard deviation");
  train->add_option("--stop", train_cfg.stop_train_mse, "stop threshold on train MSE");
  train->add_option("--max-iters", train_cfg.max_iters, "iteration cap");
  train->add_option("--seed", train_cfg.seed, "master seed (OPTRANK_SEED overrides)");
  train->add_option("--mf-sampling", sampling, "pivot_cross | uniform");
  train->add_option("--trace-csv", trace_csv, "write (iter, train_mse) trace CSV");
  train->add_option("--trace-every", train_cfg.trace_every, "trace stride (default 100)");
  train->add_option("--theta-out", theta_out, "write the final parameters as JSON");

  CLI::App* sweep = app.add_subcommand("sweep", "run a sweep spec and persist the grid");
  sweep->add_option("--spec", spec_file, "sweep spec JSON file")->required();
  sweep->add_option("--out", out_dir, "run directory to write")->required();
  sweep->add_option("--workers", workers, "concurrent cell workers");
  sweep->add_flag("--quiet", quiet, "suppress progress output");

  CLI::App* report = app.add_subcommand("report", "render a persisted run directory");
  report->add_option("--run", run_dir, "run directory")->required();
  report->add_option("--format", report_format, "svg | csv");
  report->add_option("--out", report_out, "output path (default <run>/report.svg)");

  try {
    app.parse(argc, argv);
    if (rank->parsed()) return cmd_rank(rank_fam, theta_file, random_point, tol, probes, rank_seed);
    if (predict->parsed()) return cmd_predict(predict_fam, predict_target, rank_flag, k_flag);
    if (train->parsed())
      return cmd_train(train_fam, train_target, n, test_size, train_cfg, sampling, trace_csv,
                       theta_out);
    if (sweep->parsed()) return cmd_sweep(spec_file, out_dir, workers, quiet);
    if (report->parsed()) return cmd_report(run_dir, report_format, report_out);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
}
