#include "klgame/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "klgame/game.hpp"
#include "klgame/io.hpp"
#include "klgame/rng.hpp"

namespace klgame {

void validate_experiment_config(const ExperimentConfig& config) {
  if (config.num_contexts <= 0 || config.num_actions <= 0)
    throw std::invalid_argument("config: dimensions must be positive");
  if (!(config.eta > 0)) throw std::invalid_argument("config: eta must be positive");
  if (config.noise_sigma < 0) throw std::invalid_argument("config: noise_sigma must be >= 0");
  if (config.class_size < 1) throw std::invalid_argument("config: class_size must be >= 1");
  if (config.perturbation_scale < 0)
    throw std::invalid_argument("config: perturbation_scale must be >= 0");
  if (!(config.delta > 0) || !(config.delta < 1))
    throw std::invalid_argument("config: delta must be in (0, 1)");
  if (config.num_seeds < 1) throw std::invalid_argument("config: num_seeds must be >= 1");
  if (config.n_grid.empty() || config.t_grid.empty())
    throw std::invalid_argument("config: grids must be nonempty");
  for (std::size_t i = 0; i < config.n_grid.size(); ++i)
    if (config.n_grid[i] < 1 || (i > 0 && config.n_grid[i] <= config.n_grid[i - 1]))
      throw std::invalid_argument("config: n_grid must be strictly increasing and positive");
  for (std::size_t i = 0; i < config.t_grid.size(); ++i)
    if (config.t_grid[i] < 0 || (i > 0 && config.t_grid[i] <= config.t_grid[i - 1]))
      throw std::invalid_argument("config: t_grid must be strictly increasing and nonnegative");
  if (config.n_fixed < 1) throw std::invalid_argument("config: n_fixed must be >= 1");
  if (config.dataset_n < 0) throw std::invalid_argument("config: dataset_n must be >= 0");
  if (config.selfplay_iters < 0) throw std::invalid_argument("config: selfplay_iters must be >= 0");
  if (!(config.oracle_tol > 0) || !(config.oracle_tol_truth > 0))
    throw std::invalid_argument("config: oracle tolerances must be positive");
  if (config.oracle_max_iters < 1) throw std::invalid_argument("config: oracle_max_iters must be >= 1");
  if (config.workers < 0) throw std::invalid_argument("config: workers must be >= 0");
  const std::vector<std::string> known = {"uniform", "reference", "skewed", "custom"};
  if (std::find(known.begin(), known.end(), config.behavior_policy) == known.end())
    throw std::invalid_argument("config: unknown behavior_policy '" + config.behavior_policy + "'");
}

GameInstance random_game(Index num_contexts, Index num_actions, std::uint64_t seed) {
  if (num_contexts <= 0 || num_actions <= 0)
    throw std::invalid_argument("random_game: dimensions must be positive");
  Rng rng(seed);
  GameInstance game;
  game.num_contexts = num_contexts;
  game.num_actions = num_actions;
  game.rho.resize(num_contexts);
  for (Index x = 0; x < num_contexts; ++x) game.rho[x] = -std::log(rng.uniform_open());
  game.rho /= game.rho.sum();
  game.payoff.reserve(num_contexts);
  for (Index x = 0; x < num_contexts; ++x) {
    Matrix gx(num_actions, num_actions);
    for (Index a1 = 0; a1 < num_actions; ++a1)
      for (Index a2 = 0; a2 < num_actions; ++a2) gx(a1, a2) = rng.uniform_in(-1.0, 1.0);
    game.payoff.push_back(std::move(gx));
  }
  return game;
}

FunctionClass build_function_class(const PayoffTable& g_true, std::size_t size,
                                   Scalar perturbation_scale, std::uint64_t seed) {
  if (size < 1) throw std::invalid_argument("build_function_class: size must be >= 1");
  if (g_true.empty()) throw std::invalid_argument("build_function_class: empty payoff table");
  FunctionClass cls;
  cls.members.reserve(size);
  cls.members.push_back(g_true);

  const Index nx = static_cast<Index>(g_true.size());
  const Index na = g_true[0].rows();
  // Amplitudes descend geometrically over a fixed span so that at every sample
  // size in the default grid some members sit below the resolution limit.
  constexpr Scalar kAmplitudeSpan = 115.0;
  const Scalar ratio =
      size >= 3 ? std::pow(1.0 / kAmplitudeSpan, 1.0 / static_cast<Scalar>(size - 2)) : 1.0;
  Rng rng(seed);
  const auto unit_profile = [&rng](Index n) {
    Vector u(n);
    for (Index i = 0; i < n; ++i) u[i] = rng.uniform_in(-1.0, 1.0);
    const Scalar m = u.cwiseAbs().maxCoeff();
    if (m > 0) u /= m; else u[0] = 1.0;
    return u;
  };

  Scalar amplitude = perturbation_scale;
  for (std::size_t k = 1; k < size; ++k) {
    // The perturbation is constant along one opponent axis (alternating per
    // member), so the member's marginal-averaged error equals its amplitude
    // regardless of the averaging policy.
    PayoffTable member(nx);
    for (Index x = 0; x < nx; ++x) {
      const Vector w = unit_profile(na);
      const Matrix pert = k % 2 == 1 ? Matrix(amplitude * w * RowVector::Ones(na))
                                     : Matrix(amplitude * Vector::Ones(na) * w.transpose());
      member[x] = (g_true[x] + pert).cwiseMax(-1.0).cwiseMin(1.0);
    }
    cls.members.push_back(std::move(member));
    amplitude *= ratio;
  }
  return cls;
}

GameConfig make_game_config(const ExperimentConfig& config) {
  return GameConfig::uniform(config.eta, config.num_contexts, config.num_actions);
}

JointPolicy make_behavior_policy(const ExperimentConfig& config, const GameConfig& cfg) {
  const Index nx = config.num_contexts;
  const Index na = config.num_actions;
  if (config.behavior_policy == "uniform")
    return {Policy::uniform(nx, na), Policy::uniform(nx, na)};
  if (config.behavior_policy == "reference") return {cfg.ref1, cfg.ref2};
  if (config.behavior_policy == "skewed") {
    // Strongly tilted but floored at 1e-3, so coverage stays finite while the
    // concentrability blows up.
    RowVector row(na);
    for (Index a = 0; a < na; ++a) row[a] = std::pow(10.0, -static_cast<Scalar>(a));
    row /= row.sum();
    row = row.cwiseMax(1e-3);
    row /= row.sum();
    Policy p;
    p.probs = row.replicate(nx, 1);
    return {p, p};
  }
  // custom
  Policy p1{config.behavior_custom_p1};
  Policy p2{config.behavior_custom_p2};
  validate_policy(p1, "behavior_custom_p1");
  validate_policy(p2, "behavior_custom_p2");
  if (p1.num_contexts() != nx || p1.num_actions() != na || p2.num_contexts() != nx ||
      p2.num_actions() != na)
    throw std::invalid_argument("config: custom behavior shape mismatch");
  return {std::move(p1), std::move(p2)};
}

InstanceBundle build_instance(const ExperimentConfig& config) {
  validate_experiment_config(config);
  InstanceBundle bundle;
  bundle.game = random_game(config.num_contexts, config.num_actions,
                            derive_seed(config.master_seed, {hash_tag("game")}));
  bundle.cfg = make_game_config(config);
  bundle.cls = build_function_class(bundle.game.payoff, config.class_size,
                                    config.perturbation_scale,
                                    derive_seed(config.master_seed, {hash_tag("class")}));
  bundle.behavior = make_behavior_policy(config, bundle.cfg);
  return bundle;
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  std::size_t threads = workers > 0 ? static_cast<std::size_t>(workers)
                                    : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

using Clock = std::chrono::steady_clock;

Scalar elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<Scalar, std::milli>(Clock::now() - start).count();
}

bool row_less(const SweepRow& a, const SweepRow& b) {
  if (a.method != b.method) return a.method < b.method;
  if (a.n != b.n) return a.n < b.n;
  const long ta = a.T.value_or(-1), tb = b.T.value_or(-1);
  if (ta != tb) return ta < tb;
  return a.seed_index < b.seed_index;
}

}  // namespace

std::vector<SweepRow> sweep_n(const ExperimentConfig& config) {
  const InstanceBundle bundle = build_instance(config);
  const JointPolicy star = nash_oracle(bundle.game.payoff, bundle.cfg, config.oracle_tol_truth,
                                       config.oracle_max_iters);
  const Scalar c_uni =
      unilateral_concentrability(bundle.cls, bundle.behavior, bundle.game.rho, star);

  std::vector<std::string> methods = {"minimax"};
  if (config.baseline) methods.push_back("baseline");

  struct Cell {
    std::string method;
    long n;
    long seed_index;
  };
  std::vector<Cell> cells;
  for (const std::string& method : methods)
    for (long n : config.n_grid)
      for (long s = 0; s < config.num_seeds; ++s) cells.push_back({method, n, s});

  std::vector<SweepRow> rows(cells.size());
  parallel_for(cells.size(), config.workers, [&](std::size_t i) {
    const Cell& cell = cells[i];
    SweepRow& row = rows[i];
    row.method = cell.method;
    row.n = cell.n;
    row.seed_index = cell.seed_index;
    row.c_uni = c_uni;
    const std::uint64_t seed = derive_seed(
        config.master_seed, {static_cast<std::uint64_t>(cell.n),
                             static_cast<std::uint64_t>(cell.seed_index), hash_tag(cell.method)});
    const auto start = Clock::now();
    try {
      const CellResult result =
          cell.method == "minimax"
              ? run_minimax_cell(bundle.game, bundle.cls, bundle.behavior, bundle.cfg, cell.n,
                                 config.noise_sigma, seed, config.oracle_tol,
                                 config.oracle_max_iters)
              : run_baseline_cell(bundle.game, bundle.cls, bundle.behavior, bundle.cfg, cell.n,
                                  config.noise_sigma, config.delta, seed, config.oracle_tol,
                                  config.oracle_max_iters);
      row.dual_gap = result.dual_gap;
      row.payoff_mse = result.payoff_mse;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.wall_time_ms = elapsed_ms(start);
  });
  std::sort(rows.begin(), rows.end(), row_less);
  return rows;
}

std::vector<SweepRow> sweep_t(const ExperimentConfig& config) {
  const InstanceBundle bundle = build_instance(config);
  const JointPolicy star = nash_oracle(bundle.game.payoff, bundle.cfg, config.oracle_tol_truth,
                                       config.oracle_max_iters);
  const Scalar c_uni =
      unilateral_concentrability(bundle.cls, bundle.behavior, bundle.game.rho, star);

  std::vector<std::vector<SweepRow>> per_seed(config.num_seeds);
  parallel_for(static_cast<std::size_t>(config.num_seeds), config.workers, [&](std::size_t s) {
    const std::uint64_t seed = derive_seed(
        config.master_seed, {static_cast<std::uint64_t>(config.n_fixed),
                             static_cast<std::uint64_t>(s), hash_tag("selfplay")});
    const auto start = Clock::now();
    std::vector<SweepRow>& rows = per_seed[s];
    try {
      const SelfPlayCellResult cell = run_selfplay_cell(
          bundle.game, bundle.cls, bundle.behavior, bundle.cfg, config.n_fixed,
          config.noise_sigma, seed, config.t_grid, config.oracle_tol, config.oracle_max_iters);
      const Scalar ms = elapsed_ms(start);
      SweepRow ref_row;
      ref_row.method = "minimax";
      ref_row.n = config.n_fixed;
      ref_row.seed_index = static_cast<long>(s);
      ref_row.dual_gap = cell.gap_hat;
      ref_row.payoff_mse = cell.payoff_mse;
      ref_row.c_uni = c_uni;
      ref_row.wall_time_ms = ms;
      rows.push_back(ref_row);
      for (std::size_t i = 0; i < config.t_grid.size(); ++i) {
        SweepRow row;
        row.method = "selfplay";
        row.n = config.n_fixed;
        row.T = config.t_grid[i];
        row.seed_index = static_cast<long>(s);
        row.dual_gap = cell.gap_at[i];
        row.v_t = cell.v_at[i];
        row.payoff_mse = cell.payoff_mse;
        row.c_uni = c_uni;
        row.wall_time_ms = ms;
        rows.push_back(row);
      }
    } catch (const std::exception& e) {
      SweepRow row;
      row.method = "selfplay";
      row.n = config.n_fixed;
      row.seed_index = static_cast<long>(s);
      row.error = e.what();
      row.wall_time_ms = elapsed_ms(start);
      rows.push_back(row);
    }
  });

  std::vector<SweepRow> rows;
  for (const auto& chunk : per_seed) rows.insert(rows.end(), chunk.begin(), chunk.end());
  std::sort(rows.begin(), rows.end(), row_less);
  return rows;
}

namespace {

std::optional<Scalar> row_value(const SweepRow& row, const std::string& value_column) {
  if (value_column == "dual_gap") return row.dual_gap;
  if (value_column == "payoff_mse") return row.payoff_mse;
  if (value_column == "v_t") return row.v_t;
  throw std::invalid_argument("unknown value column '" + value_column + "'");
}

std::map<long, std::vector<Scalar>> group_values(const std::vector<SweepRow>& rows,
                                                 const std::string& value_column,
                                                 const std::string& method,
                                                 const std::string& x_column) {
  if (x_column != "n" && x_column != "T")
    throw std::invalid_argument("unknown x column '" + x_column + "'");
  std::map<long, std::vector<Scalar>> groups;
  for (const SweepRow& row : rows) {
    if (row.method != method || !row.error.empty()) continue;
    long x = row.n;
    if (x_column == "T") {
      if (!row.T) continue;
      x = *row.T;
    }
    const std::optional<Scalar> value = row_value(row, value_column);
    if (!value || !std::isfinite(*value)) continue;
    groups[x].push_back(*value);
  }
  return groups;
}

}  // namespace

SlopeFit fit_loglog_slope(const std::vector<SweepRow>& rows, const std::string& value_column,
                          const std::string& method, const std::string& x_column) {
  const auto groups = group_values(rows, value_column, method, x_column);
  if (groups.size() < 4)
    throw std::domain_error("fit_loglog_slope: need at least 4 grid points, have " +
                            std::to_string(groups.size()));
  std::vector<Scalar> lx, ly;
  std::string offending;
  for (const auto& [x, values] : groups) {
    const Scalar med = median(values);
    if (med <= 0) {
      if (!offending.empty()) offending += ", ";
      offending += x_column + "=" + std::to_string(x);
      continue;
    }
    if (x <= 0) continue;  // log undefined; T=0 rows carry no rate information
    lx.push_back(std::log2(static_cast<Scalar>(x)));
    ly.push_back(std::log2(med));
  }
  if (!offending.empty())
    throw std::domain_error("fit_loglog_slope: nonpositive medians at " + offending);
  return ols_fit(lx, ly);
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows, bool record_timings) {
  std::string out = "method,n,T,seed,dual_gap,payoff_mse,c_uni,wall_time_ms\n";
  const auto opt_field = [&](const std::optional<Scalar>& v, const SweepRow& row) {
    if (v) return format_float(*v);
    return std::string(row.error.empty() ? "" : "nan");
  };
  for (const SweepRow& row : rows) {
    out += row.method;
    out += ',';
    out += std::to_string(row.n);
    out += ',';
    if (row.T) out += std::to_string(*row.T);
    out += ',';
    out += std::to_string(row.seed_index);
    out += ',';
    out += opt_field(row.dual_gap, row);
    out += ',';
    out += opt_field(row.payoff_mse, row);
    out += ',';
    out += opt_field(row.c_uni, row);
    out += ',';
    out += record_timings ? format_float(row.wall_time_ms) : std::string("0");
    out += '\n';
  }
  return out;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("sweep csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "method,n,T,seed,dual_gap,payoff_mse,c_uni,wall_time_ms")
    throw std::runtime_error("sweep csv: unexpected header");

  const auto parse_opt = [](const std::string& s) -> std::optional<Scalar> {
    if (s.empty()) return std::nullopt;
    const Scalar v = std::strtod(s.c_str(), nullptr);
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  };

  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(field);
        field.clear();
      } else {
        field += c;
      }
    }
    fields.push_back(field);
    if (fields.size() != 8) throw std::runtime_error("sweep csv: expected 8 fields");
    SweepRow row;
    row.method = fields[0];
    row.n = std::strtol(fields[1].c_str(), nullptr, 10);
    if (!fields[2].empty()) row.T = std::strtol(fields[2].c_str(), nullptr, 10);
    row.seed_index = std::strtol(fields[3].c_str(), nullptr, 10);
    row.dual_gap = parse_opt(fields[4]);
    row.payoff_mse = parse_opt(fields[5]);
    row.c_uni = parse_opt(fields[6]);
    row.wall_time_ms = fields[7].empty() ? 0 : std::strtod(fields[7].c_str(), nullptr);
    rows.push_back(std::move(row));
  }
  return rows;
}

void emit_report(const std::vector<SweepRow>& rows, const std::vector<BoundReport>& reports,
                 const std::filesystem::path& out_dir, bool record_timings) {
  std::vector<SweepRow> sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(), row_less);
  std::filesystem::create_directories(out_dir);
  atomic_write_file(out_dir / "sweep.csv", sweep_to_csv(sorted, record_timings));
  atomic_write_file(out_dir / "bounds.json", bounds_to_json(reports));
  emit_plotdata(sorted, out_dir);
}

void emit_plotdata(const std::vector<SweepRow>& rows, const std::filesystem::path& out_dir) {
  std::vector<SweepRow> sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(), row_less);
  std::filesystem::create_directories(out_dir);

  std::vector<std::string> methods;
  for (const SweepRow& row : sorted)
    if (std::find(methods.begin(), methods.end(), row.method) == methods.end())
      methods.push_back(row.method);
  std::sort(methods.begin(), methods.end());

  for (const std::string& method : methods) {
    bool has_t = false;
    for (const SweepRow& row : sorted)
      if (row.method == method && row.T) has_t = true;
    const std::string x_column = has_t ? "T" : "n";

    const auto write_plot = [&](const std::string& value_column, const std::string& suffix) {
      const auto groups = group_values(sorted, value_column, method, x_column);
      std::string csv = "log2_" + x_column + ",log2_median_" + value_column + "\n";
      std::size_t lines = 0;
      for (const auto& [x, values] : groups) {
        if (x <= 0) continue;
        const Scalar med = median(values);
        if (med <= 0) continue;
        csv += format_float(std::log2(static_cast<Scalar>(x)));
        csv += ',';
        csv += format_float(std::log2(med));
        csv += '\n';
        ++lines;
      }
      if (lines > 0)
        atomic_write_file(out_dir / ("plotdata_" + method + suffix + ".csv"), csv);
    };
    write_plot("dual_gap", "");
    if (has_t) write_plot("v_t", "_vt");
  }
}

namespace {

BoundReport merge_reports(const std::string& name, Scalar tolerance,
                          const std::vector<BoundReport>& parts) {
  BoundReport merged;
  merged.name = name;
  merged.tolerance = tolerance;
  for (const BoundReport& part : parts) {
    merged.instances_checked += part.instances_checked;
    if (part.max_violation > merged.max_violation) merged.max_violation = part.max_violation;
    for (const SlackRecord& rec : part.details)
      if (rec.violation > tolerance) merged.details.push_back(rec);
  }
  return merged.finalize();
}

std::vector<Scalar> medians_by(const std::vector<SweepRow>& rows, const std::string& method,
                               const std::vector<long>& grid, const std::string& value_column,
                               const std::string& x_column) {
  const auto groups = group_values(rows, value_column, method, x_column);
  std::vector<Scalar> out;
  out.reserve(grid.size());
  for (long x : grid) {
    const auto it = groups.find(x);
    if (it == groups.end())
      throw std::runtime_error("missing sweep cells at " + x_column + "=" + std::to_string(x));
    out.push_back(median(it->second));
  }
  return out;
}

Scalar expected_sq_l1(const JointPolicy& a, const JointPolicy& b, const Vector& rho) {
  Scalar total = 0;
  for (Index x = 0; x < rho.size(); ++x) {
    const Scalar d = joint_l1_distance(a, b, x);
    total += rho[x] * d * d;
  }
  return total;
}

}  // namespace

std::vector<SuiteStep> verification_steps(const ExperimentConfig& config) {
  validate_experiment_config(config);
  std::vector<SuiteStep> steps;

  // Closed-form identities: best-response headroom as a KL divergence, and the
  // two-sided gap decomposition, on random desk-scale instances.
  steps.emplace_back("identities", [config]() {
    const Scalar etas[3] = {0.5, 1.0, 2.0};
    std::vector<BoundReport> br_parts, gap_parts;
    for (long i = 0; i < 200; ++i) {
      const std::uint64_t seed =
          derive_seed(config.master_seed, {static_cast<std::uint64_t>(i), hash_tag("identity")});
      const Index nx = 1 + static_cast<Index>(i % 4);
      const Index na = 2 + static_cast<Index>((i / 4) % 4);
      const GameInstance game = random_game(nx, na, seed);
      const GameConfig cfg = GameConfig::uniform(etas[i % 3], nx, na);
      br_parts.push_back(check_br_suboptimality_identity(game.payoff, cfg, game.rho, 1,
                                                         mix64(seed), 1e-9));
      Rng rng(mix64(seed ^ 0x5eedULL));
      JointPolicy pi_hat{random_policy(nx, na, rng), random_policy(nx, na, rng)};
      const PayoffTable* g_hat = nullptr;
      FunctionClass perturbed;
      if (i % 4 == 0) {
        // Every fourth instance also exercises the smoothness upper bounds,
        // which require pi_hat to be the equilibrium of a perturbed table.
        perturbed = build_function_class(game.payoff, 2, 0.2, mix64(seed ^ 0xabcdULL));
        g_hat = &perturbed.members[1];
        pi_hat = nash_oracle(*g_hat, cfg, 1e-12, config.oracle_max_iters);
      }
      gap_parts.push_back(
          check_gap_kl_identities(game.payoff, cfg, game.rho, pi_hat, g_hat, 1e-12, 1e-8));
    }
    return std::vector<BoundReport>{merge_reports("br_suboptimality_identity", 1e-8, br_parts),
                                    merge_reports("gap_kl_identities", 1e-8, gap_parts)};
  });

  steps.emplace_back("kl_logit_bound", [config]() {
    return std::vector<BoundReport>{
        check_kl_logit_bound(10000, derive_seed(config.master_seed, {hash_tag("logit")}))};
  });

  // Equilibrium stability under payoff perturbation, oracle equilibria at 1e-12.
  steps.emplace_back("stability", [config]() {
    const Scalar etas[3] = {0.5, 1.0, 2.0};
    std::vector<BoundReport> parts;
    for (long i = 0; i < 50; ++i) {
      const std::uint64_t seed =
          derive_seed(config.master_seed, {static_cast<std::uint64_t>(i), hash_tag("stability")});
      const Index nx = 1 + static_cast<Index>(i % 4);
      const Index na = 2 + static_cast<Index>((i / 4) % 4);
      const GameInstance game = random_game(nx, na, seed);
      const GameConfig cfg = GameConfig::uniform(etas[i % 3], nx, na);
      const Scalar scale = 0.05 + 0.3 * static_cast<Scalar>(i % 7) / 6.0;
      const FunctionClass perturbed = build_function_class(game.payoff, 2, scale, mix64(seed));
      parts.push_back(
          check_stability_bound(game.payoff, perturbed.members[1], cfg, game.rho, 1e-12));
    }
    return std::vector<BoundReport>{merge_reports("stability_bound", 0, parts)};
  });

  // Last-iterate envelope of the decaying schedule, plus its Pinsker corollary.
  steps.emplace_back("selfplay_convergence", [config]() {
    const Scalar etas[3] = {0.5, 1.0, 2.0};
    constexpr long kIters = 10000;
    std::vector<BoundReport> parts(20);
    parallel_for(parts.size(), config.workers, [&](std::size_t i) {
      const std::uint64_t seed =
          derive_seed(config.master_seed, {static_cast<std::uint64_t>(i), hash_tag("convergence")});
      const Index nx = 1 + static_cast<Index>(i % 4);
      const Index na = 2 + static_cast<Index>((i / 4) % 4);
      const GameInstance game = random_game(nx, na, seed);
      const GameConfig cfg = GameConfig::uniform(etas[i % 3], nx, na);
      const JointPolicy anchor = nash_oracle(game.payoff, cfg, 1e-12, config.oracle_max_iters);
      SelfPlayOptions options;
      options.anchor = &anchor;
      const auto [final_pi, trace] = selfplay_run(game.payoff, cfg, game.rho, kIters, options);
      BoundReport part = check_opt_convergence(trace, cfg.eta, 1e-10);
      const Scalar pinsker = expected_sq_l1(anchor, final_pi, game.rho) -
                             32.0 * cfg.eta * cfg.eta / static_cast<Scalar>(kIters + 1);
      part.record("pinsker corollary game " + std::to_string(i), pinsker);
      parts[i] = part;
    });
    return std::vector<BoundReport>{merge_reports("selfplay_convergence", 1e-10, parts)};
  });

  // Monte-Carlo concentration: in-sample error bound and the pairwise
  // generalization bound at the stated frequency threshold.
  steps.emplace_back("concentration", [config]() {
    const GameInstance game =
        random_game(4, 4, derive_seed(config.master_seed, {hash_tag("conc_game")}));
    const FunctionClass cls = build_function_class(
        game.payoff, 8, 0.3, derive_seed(config.master_seed, {hash_tag("conc_class")}));
    const JointPolicy behavior{Policy::uniform(4, 4), Policy::uniform(4, 4)};
    ConcentrationOptions opts;
    opts.n = 500;
    opts.noise_sigma = 0.5;
    opts.delta = 0.1;
    opts.trials = 500;
    opts.master_seed = derive_seed(config.master_seed, {hash_tag("concentration")});
    return std::vector<BoundReport>{
        check_insample_bound(game, cls, behavior, opts),
        check_generalization_bound(game, cls, behavior, {opts.n}, opts)};
  });

  // Full n-sweep: fast rate of the pipeline and the conservative-baseline
  // contrast on the same instance.
  steps.emplace_back("rate_sweep", [config]() {
    ExperimentConfig sweep_config = config;
    sweep_config.baseline = true;
    const std::vector<SweepRow> rows = sweep_n(sweep_config);
    Scalar c_uni = 0;
    for (const SweepRow& row : rows)
      if (row.c_uni) {
        c_uni = *row.c_uni;
        break;
      }
    const std::vector<Scalar> main_medians =
        medians_by(rows, "minimax", sweep_config.n_grid, "dual_gap", "n");
    const std::vector<Scalar> baseline_medians =
        medians_by(rows, "baseline", sweep_config.n_grid, "dual_gap", "n");
    RateOptions opts;
    opts.n_grid = sweep_config.n_grid;
    opts.num_seeds = sweep_config.num_seeds;
    opts.delta = sweep_config.delta;
    opts.noise_sigma = sweep_config.noise_sigma;
    opts.master_seed = sweep_config.master_seed;
    return std::vector<BoundReport>{
        minimax_rate_report(sweep_config.n_grid, main_medians, c_uni, sweep_config.eta,
                            sweep_config.class_size, opts),
        baseline_contrast_report(sweep_config.n_grid, main_medians, baseline_medians, -0.75, -0.3)};
  });

  // Fixed-n T-sweep: decrease-then-plateau of the self-play gap, its envelope,
  // and the anchor-divergence envelope along the way.
  steps.emplace_back("selfplay_rate", [config]() {
    const std::vector<SweepRow> rows = sweep_t(config);
    Scalar c_uni = 0;
    for (const SweepRow& row : rows)
      if (row.c_uni) {
        c_uni = *row.c_uni;
        break;
      }
    const std::vector<Scalar> medians =
        medians_by(rows, "selfplay", config.t_grid, "dual_gap", "T");
    std::vector<Scalar> gap_hats;
    for (const SweepRow& row : rows)
      if (row.method == "minimax" && row.dual_gap) gap_hats.push_back(*row.dual_gap);
    SelfPlayRateOptions opts;
    opts.n = config.n_fixed;
    opts.t_grid = config.t_grid;
    opts.num_seeds = config.num_seeds;
    opts.delta = config.delta;
    opts.noise_sigma = config.noise_sigma;
    opts.master_seed = config.master_seed;
    opts.oracle_tol = config.oracle_tol;
    BoundReport report = selfplay_rate_report(config.t_grid, medians, median(std::move(gap_hats)),
                                              c_uni, config.eta, config.class_size, opts);
    // Anchor-divergence envelope 16 eta^2/(T+1) per seed, with oracle slack.
    const Scalar eta = config.eta;
    for (const SweepRow& row : rows) {
      if (row.method != "selfplay" || !row.v_t || !row.T || *row.T < 1) continue;
      const Scalar envelope = 16.0 * eta * eta / static_cast<Scalar>(*row.T + 1);
      report.record(*row.v_t - envelope - 4.0 * config.oracle_tol);
    }
    report.finalize();
    return std::vector<BoundReport>{report};
  });

  // Oracle contracts: residual at its own tolerance, and a 1e-12 oracle whose
  // duality gap is below 1e-8.
  steps.emplace_back("oracle_validity", [config]() {
    const Scalar etas[3] = {0.5, 1.0, 2.0};
    std::vector<BoundReport> parts(50);
    parallel_for(parts.size(), config.workers, [&](std::size_t i) {
      const std::uint64_t seed =
          derive_seed(config.master_seed, {static_cast<std::uint64_t>(i), hash_tag("oracle")});
      const Index nx = 1 + static_cast<Index>(i % 4);
      const Index na = 2 + static_cast<Index>((i / 4) % 4);
      const GameInstance game = random_game(nx, na, seed);
      const GameConfig cfg = GameConfig::uniform(etas[i % 3], nx, na);
      BoundReport part;
      const JointPolicy pi = nash_oracle(game.payoff, cfg, config.oracle_tol,
                                         config.oracle_max_iters);
      part.record(fixed_point_residual(game.payoff, pi, cfg) - config.oracle_tol);
      const JointPolicy tight = nash_oracle(game.payoff, cfg, 1e-12, config.oracle_max_iters);
      part.record(duality_gap(game.payoff, tight, cfg, game.rho) - 1e-8);
      parts[i] = part;
    });
    return std::vector<BoundReport>{merge_reports("oracle_validity", 0, parts)};
  });

  // Byte-level determinism of the sweep outputs on a reduced instance.
  steps.emplace_back("reproducibility", [config]() {
    ExperimentConfig reduced = config;
    reduced.n_grid = {128, 256};
    reduced.t_grid = {1, 4, 16};
    reduced.num_seeds = 3;
    reduced.baseline = true;
    reduced.record_timings = false;
    const std::string n1 = sweep_to_csv(sweep_n(reduced), false);
    const std::string n2 = sweep_to_csv(sweep_n(reduced), false);
    const std::string t1 = sweep_to_csv(sweep_t(reduced), false);
    const std::string t2 = sweep_to_csv(sweep_t(reduced), false);
    BoundReport report;
    report.name = "reproducibility";
    report.tolerance = 0;
    report.record("sweep_n rerun identical", n1 == n2 ? -1.0 : 1.0);
    report.record("sweep_t rerun identical", t1 == t2 ? -1.0 : 1.0);
    return std::vector<BoundReport>{report.finalize()};
  });

  return steps;
}

std::vector<BoundReport> run_step_guarded(const std::string& name,
                                          const std::function<std::vector<BoundReport>()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    BoundReport failed;
    failed.name = name + "_error";
    failed.tolerance = 0;
    failed.record(std::string(e.what()), 1.0);
    return {failed.finalize()};
  }
}

std::vector<BoundReport> run_verification_suite(const ExperimentConfig& config) {
  std::vector<BoundReport> reports;
  for (auto& [name, fn] : verification_steps(config)) {
    std::vector<BoundReport> produced = run_step_guarded(name, fn);
    reports.insert(reports.end(), produced.begin(), produced.end());
  }
  return reports;
}

}  // namespace klgame
