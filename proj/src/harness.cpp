#include "optrank/harness.hpp"

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "optrank/rank_engine.hpp"
#include "optrank/rng.hpp"
#include "optrank/serialize.hpp"

namespace optrank {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

std::string fmt_double(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ModelFamily strip_bias(ModelFamily fam) {
  fam.with_bias = false;
  return fam;
}

std::optional<int> optimistic_for(const ModelFamily& fam, const TargetSpec& target) {
  try {
    return closed_form_optimistic(strip_bias(fam), target);
  } catch (const ConfigError&) {
    return std::nullopt;
  }
}

}  // namespace

void validate_spec(const SweepSpec& spec) {
  if (spec.schema_version != 1) fail("unsupported spec schema_version");
  validate_family(spec.family);
  validate_config(spec.train);
  if (spec.trials < 1) fail("trials must be >= 1");
  if (spec.sample_sizes.empty()) fail("sample_sizes must be non-empty");
  for (std::size_t i = 0; i < spec.sample_sizes.size(); ++i) {
    if (spec.sample_sizes[i] < 0) fail("sample sizes must be non-negative");
    if (i > 0 && spec.sample_sizes[i] <= spec.sample_sizes[i - 1])
      fail("sample_sizes must be strictly increasing");
  }
  if (!(spec.fit_threshold > 0)) fail("fit_threshold must be positive");
  if (spec.test_size < 1) fail("test_size must be >= 1");
  for (Scalar lr : spec.lr_grid)
    if (!(lr >= 0)) fail("learning rates must be non-negative");
  switch (spec.axis) {
    case SweepAxis::Targets:
      if (spec.targets.empty()) fail("a target sweep needs at least one target");
      break;
    case SweepAxis::Widths:
      if (spec.targets.size() != 1) fail("a width sweep uses exactly one target");
      if (spec.widths.empty()) fail("a width sweep needs widths");
      if (spec.family.kind != Kind::TwoLayerTanhFC && spec.family.kind != Kind::TwoLayerTanhCNN &&
          spec.family.kind != Kind::TwoLayerTanhCNNNoShare)
        fail("width sweeps apply to the two-layer tanh families");
      for (int w : spec.widths)
        if (w < 1) fail("widths must be >= 1");
      break;
    case SweepAxis::InitStds:
      if (spec.targets.size() != 1) fail("an init-std sweep uses exactly one target");
      if (spec.init_stds.empty()) fail("an init-std sweep needs init_stds");
      for (Scalar s : spec.init_stds)
        if (!(s > 0)) fail("init stds must be positive");
      break;
  }
}

std::vector<SweepRow> resolve_rows(const SweepSpec& spec) {
  validate_spec(spec);
  std::vector<SweepRow> rows;
  switch (spec.axis) {
    case SweepAxis::Targets:
      for (const auto& id : spec.targets) {
        SweepRow row;
        row.target = builtin_target(id);
        row.label = id;
        row.family = spec.family;
        row.init_std = spec.train.init_std;
        row.optimistic = optimistic_for(row.family, row.target);
        rows.push_back(std::move(row));
      }
      break;
    case SweepAxis::Widths: {
      const TargetSpec target = builtin_target(spec.targets.front());
      for (int w : spec.widths) {
        SweepRow row;
        row.target = target;
        row.family = spec.family;
        if (row.family.kind == Kind::TwoLayerTanhFC) row.family.m = w;
        else row.family.m_c = w;
        validate_family(row.family);
        row.label = (row.family.kind == Kind::TwoLayerTanhFC ? "m=" : "m_c=") + std::to_string(w);
        row.init_std = spec.train.init_std;
        row.optimistic = optimistic_for(row.family, row.target);
        rows.push_back(std::move(row));
      }
      break;
    }
    case SweepAxis::InitStds: {
      const TargetSpec target = builtin_target(spec.targets.front());
      for (Scalar s : spec.init_stds) {
        SweepRow row;
        row.target = target;
        row.family = spec.family;
        row.label = "std=" + fmt_double(s);
        row.init_std = s;
        row.optimistic = optimistic_for(row.family, row.target);
        rows.push_back(std::move(row));
      }
      break;
    }
  }
  return rows;
}

int SweepGrid::diverged_count(Index row, Index ni) const {
  int count = 0;
  for (int t = 0; t < spec.trials; ++t) count += cell(row, ni, t).diverged;
  return count;
}

namespace {

void compute_means(SweepGrid& grid) {
  grid.mean_test_error.resize(grid.row_count(), grid.n_count());
  for (Index r = 0; r < grid.row_count(); ++r)
    for (Index ni = 0; ni < grid.n_count(); ++ni) {
      Scalar sum = 0;
      for (int t = 0; t < grid.spec.trials; ++t) sum += grid.cell(r, ni, t).test_mse;
      grid.mean_test_error(r, ni) = sum / grid.spec.trials;
    }
}

}  // namespace

SweepGrid run_sweep(const SweepSpec& spec, int workers,
                    const std::function<void(std::size_t, std::size_t)>& progress) {
  SweepGrid grid;
  grid.spec = spec;
  grid.spec.train.trace_every = 0;  // traces are a single-run facility
  grid.rows = resolve_rows(spec);
  const Index R = grid.row_count(), N = grid.n_count();
  const std::size_t total = static_cast<std::size_t>(R * N * spec.trials);
  grid.cells.assign(total, SweepCell{});

  // per-row fixed test sets
  std::vector<Dataset> tests(static_cast<std::size_t>(R));
  for (Index r = 0; r < R; ++r)
    tests[static_cast<std::size_t>(r)] =
        sample_dataset(grid.rows[static_cast<std::size_t>(r)].target, spec.test_size,
                       mix_seed(spec.seed, {0x30, static_cast<std::uint64_t>(r)}), Split::Test,
                       spec.mf_sampling);

  std::atomic<std::size_t> next{0}, done{0};
  std::mutex progress_mutex;
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto work = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= total) return;
      try {
        const Index trial = static_cast<Index>(c) % spec.trials;
        const Index ni = (static_cast<Index>(c) / spec.trials) % N;
        const Index r = static_cast<Index>(c) / (spec.trials * N);
        const SweepRow& row = grid.rows[static_cast<std::size_t>(r)];
        const int n = spec.sample_sizes[static_cast<std::size_t>(ni)];
        const std::uint64_t rr = static_cast<std::uint64_t>(r);
        const std::uint64_t nn = static_cast<std::uint64_t>(n);
        const std::uint64_t tt = static_cast<std::uint64_t>(trial);
        const std::uint64_t data_seed =
            spec.train_sets == TrainSets::PerCell ? mix_seed(spec.seed, {0x10, rr, nn})
                                                  : mix_seed(spec.seed, {0x10, rr, nn, tt});
        const Dataset train =
            sample_dataset(row.target, n, data_seed, Split::Train, spec.mf_sampling);
        TrainConfig cfg = grid.spec.train;
        cfg.init_std = row.init_std;
        cfg.seed = mix_seed(spec.seed, {0x20, rr, nn, tt});
        const Dataset& test = tests[static_cast<std::size_t>(r)];
        TrainResult res = spec.lr_grid.empty() ? gd_fit(row.family, train, test, cfg)
                                               : lr_search(row.family, train, test, cfg, spec.lr_grid);
        SweepCell& cell = grid.cell(r, ni, trial);
        cell.test_mse = res.test_mse;
        cell.converged = res.converged;
        cell.diverged = res.diverged;
        cell.iterations = res.iterations;
        cell.learning_rate = res.learning_rate;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
      const std::size_t d = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(d, total);
      }
    }
  };

  workers = std::max(1, workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  compute_means(grid);
  return grid;
}

TransitionReport detect_transitions(const SweepGrid& grid,
                                    const std::vector<std::optional<int>>& optimistic) {
  if (optimistic.size() != static_cast<std::size_t>(grid.row_count()))
    fail("one optimistic value per row required");
  TransitionReport report;
  report.fit_threshold = grid.spec.fit_threshold;
  for (Index r = 0; r < grid.row_count(); ++r) {
    TransitionRow row;
    row.label = grid.rows[static_cast<std::size_t>(r)].label;
    row.optimistic_n = optimistic[static_cast<std::size_t>(r)];
    for (Index ni = 0; ni < grid.n_count(); ++ni)
      if (grid.mean_test_error(r, ni) < grid.spec.fit_threshold) {
        row.empirical_n = grid.spec.sample_sizes[static_cast<std::size_t>(ni)];
        break;
      }
    if (row.empirical_n && row.optimistic_n) row.gap = *row.empirical_n - *row.optimistic_n;
    report.rows.push_back(std::move(row));
  }
  return report;
}

TransitionReport detect_transitions(const SweepGrid& grid) {
  std::vector<std::optional<int>> optimistic;
  for (const auto& row : grid.rows) optimistic.push_back(row.optimistic);
  return detect_transitions(grid, optimistic);
}

// --- persistence -------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

json row_to_json(const SweepRow& row) {
  json j{{"label", row.label},
         {"target", row.target},
         {"family", row.family},
         {"init_std", row.init_std}};
  if (row.optimistic) j["optimistic"] = *row.optimistic;
  else j["optimistic"] = nullptr;
  return j;
}

SweepRow row_from_json(const json& j) {
  SweepRow row;
  row.label = j.at("label").get<std::string>();
  row.target = j.at("target").get<TargetSpec>();
  row.family = j.at("family").get<ModelFamily>();
  row.init_std = j.at("init_std").get<Scalar>();
  if (!j.at("optimistic").is_null()) row.optimistic = j["optimistic"].get<int>();
  return row;
}

}  // namespace

void persist(const SweepGrid& grid, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create run directory " + dir.string());

  json manifest{{"schema_version", 1}, {"spec", grid.spec}};
  json rows = json::array();
  for (const auto& row : grid.rows) rows.push_back(row_to_json(row));
  manifest["rows"] = rows;
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw RuntimeFailure("cannot write manifest.json");
    out << manifest.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "grid.csv");
    if (!out) throw RuntimeFailure("cannot write grid.csv");
    out << "row_id,n,trial,test_mse,converged,diverged,iters,lr\n";
    for (Index r = 0; r < grid.row_count(); ++r)
      for (Index ni = 0; ni < grid.n_count(); ++ni)
        for (int t = 0; t < grid.spec.trials; ++t) {
          const SweepCell& c = grid.cell(r, ni, t);
          out << r << ',' << grid.spec.sample_sizes[static_cast<std::size_t>(ni)] << ',' << t
              << ',' << fmt_double(c.test_mse) << ',' << int(c.converged) << ','
              << int(c.diverged) << ',' << c.iterations << ',' << fmt_double(c.learning_rate)
              << '\n';
        }
  }
  {
    std::ofstream out(dir / "mean.csv");
    if (!out) throw RuntimeFailure("cannot write mean.csv");
    out << "row_id,n,mean_test_mse,diverged_count\n";
    for (Index r = 0; r < grid.row_count(); ++r)
      for (Index ni = 0; ni < grid.n_count(); ++ni)
        out << r << ',' << grid.spec.sample_sizes[static_cast<std::size_t>(ni)] << ','
            << fmt_double(grid.mean_test_error(r, ni)) << ',' << grid.diverged_count(r, ni)
            << '\n';
  }
  {
    const TransitionReport report = detect_transitions(grid);
    std::ofstream out(dir / "transitions.csv");
    if (!out) throw RuntimeFailure("cannot write transitions.csv");
    out << "row_id,optimistic_n,empirical_n,gap\n";
    for (std::size_t r = 0; r < report.rows.size(); ++r) {
      const TransitionRow& row = report.rows[r];
      out << r << ',';
      if (row.optimistic_n) out << *row.optimistic_n;
      out << ',';
      if (row.empirical_n) out << *row.empirical_n;
      out << ',';
      if (row.gap) out << *row.gap;
      out << '\n';
    }
  }
}

SweepGrid load_grid(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw RuntimeFailure("missing manifest.json in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw RuntimeFailure("malformed manifest.json: " + std::string(e.what()));
  }
  SweepGrid grid;
  try {
    grid.spec = manifest.at("spec").get<SweepSpec>();
    for (const auto& j : manifest.at("rows")) grid.rows.push_back(row_from_json(j));
  } catch (const json::exception& e) {
    throw RuntimeFailure("malformed manifest.json: " + std::string(e.what()));
  }
  const std::size_t total =
      static_cast<std::size_t>(grid.row_count() * grid.n_count() * grid.spec.trials);
  grid.cells.assign(total, SweepCell{});

  std::ifstream gin(dir / "grid.csv");
  if (!gin) throw RuntimeFailure("missing grid.csv in " + dir.string());
  std::string line;
  std::getline(gin, line);  // header
  std::size_t seen = 0;
  while (std::getline(gin, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw RuntimeFailure("malformed grid.csv line: " + line);
    const Index r = std::stol(f[0]);
    const int n = std::stoi(f[1]);
    const int trial = std::stoi(f[2]);
    const auto it =
        std::find(grid.spec.sample_sizes.begin(), grid.spec.sample_sizes.end(), n);
    if (r < 0 || r >= grid.row_count() || it == grid.spec.sample_sizes.end() || trial < 0 ||
        trial >= grid.spec.trials)
      throw RuntimeFailure("grid.csv cell out of range: " + line);
    const Index ni = it - grid.spec.sample_sizes.begin();
    SweepCell& c = grid.cell(r, ni, trial);
    c.test_mse = std::strtod(f[3].c_str(), nullptr);
    c.converged = f[4] == "1";
    c.diverged = f[5] == "1";
    c.iterations = std::stol(f[6]);
    c.learning_rate = std::strtod(f[7].c_str(), nullptr);
    ++seen;
  }
  if (seen != total)
    throw RuntimeFailure("grid.csv holds " + std::to_string(seen) + " cells, expected " +
                         std::to_string(total));
  compute_means(grid);

  // cross-check the persisted means against the recomputation
  std::ifstream min(dir / "mean.csv");
  if (!min) throw RuntimeFailure("missing mean.csv in " + dir.string());
  std::getline(min, line);
  while (std::getline(min, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw RuntimeFailure("malformed mean.csv line: " + line);
    const Index r = std::stol(f[0]);
    const int n = std::stoi(f[1]);
    const auto it = std::find(grid.spec.sample_sizes.begin(), grid.spec.sample_sizes.end(), n);
    if (r < 0 || r >= grid.row_count() || it == grid.spec.sample_sizes.end())
      throw RuntimeFailure("mean.csv cell out of range: " + line);
    const Index ni = it - grid.spec.sample_sizes.begin();
    const Scalar stored = std::strtod(f[2].c_str(), nullptr);
    const Scalar recomputed = grid.mean_test_error(r, ni);
    if (stored != recomputed && std::abs(stored - recomputed) > 1e-12)
      throw RuntimeFailure("mean.csv disagrees with grid.csv at row " + f[0] + ", n " + f[1]);
  }
  return grid;
}

}  // namespace optrank
