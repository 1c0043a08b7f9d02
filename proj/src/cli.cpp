#include "bubbletower/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bubbletower/bubble.hpp"
#include "bubbletower/circulant.hpp"
#include "bubbletower/configuration.hpp"
#include "bubbletower/error_field.hpp"
#include "bubbletower/errors.hpp"
#include "bubbletower/interaction.hpp"
#include "bubbletower/kernel_basis.hpp"
#include "bubbletower/nondegeneracy.hpp"
#include "bubbletower/reduction.hpp"

namespace bt {

namespace {

const std::vector<std::string> kCommands = {"construct",       "error-scan", "solve-reduced", "check-kernel",
                                            "circulant-check", "certify"};

const char* kHelpFooter = R"(Commands:
  construct        sites and scales of the configuration -> configuration.json, sites.csv
  error-scan       weighted error norms over a list of k (h = k unless --h) -> error_scan.csv, exponents.csv
  solve-reduced    root of the two projected coefficients in (delta, eps) -> reduced.json
  check-kernel     Gram rank, decomposition identities, residual norms -> kernel.json
  circulant-check  interaction blocks, beta table, kernel relations, block solves -> circulant.json
  certify          full nondegeneracy report (solves the root unless --delta/--eps) -> report.json

CSV columns (lines starting with # carry the resolved parameters):
  sites.csv        site,kind,index,scale,sign,y1..yn
  error_scan.csv   k,h,mu,lambda,exterior_norm,interior_ring1_norm,interior_ring2_norm,converged
  exponents.csv    region,fitted,predicted

Environment:
  BUBBLETOWER_THREADS  caps the number of worker threads

Exit codes: 0 success, 1 failed check or numerical failure, 2 configuration error.)";

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("k must be an integer or a comma-separated list of integers: " + text);
    }
    if (used != item.size()) throw ConfigError("k must be an integer or a comma-separated list of integers: " + text);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("k list is empty");
  return out;
}

nlohmann::ordered_json scheme_json(const QuadratureScheme& s) {
  return {{"q", s.q},
          {"alpha_bar", s.alpha_bar},
          {"alpha_hat", s.alpha_hat},
          {"rel_tol", s.rel_tol},
          {"radial_nodes", s.radial_nodes},
          {"angular_degree", s.angular_degree},
          {"max_refine", s.max_refine}};
}

std::filesystem::path prepare_out(const RunConfig& rc) {
  std::filesystem::path dir(rc.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + rc.out + ": " + ec.message());
  std::ofstream(dir / "run_config.json") << rc.to_json().dump(2) << '\n';
  return dir;
}

void write_json(const std::filesystem::path& file, const RunConfig& rc, nlohmann::ordered_json body) {
  nlohmann::ordered_json j;
  j["run_config"] = rc.to_json();
  for (auto& [key, value] : body.items()) j[key] = value;
  std::ofstream f(file);
  if (!f) throw ConfigError("cannot write " + file.string());
  f << j.dump(2) << '\n';
}

std::ofstream open_csv(const std::filesystem::path& file, const RunConfig& rc) {
  std::ofstream f(file);
  if (!f) throw ConfigError("cannot write " + file.string());
  f.precision(17);
  f << "# run_config " << rc.to_json().dump() << '\n';
  return f;
}

TowerConfiguration base_configuration(const RunConfig& rc) {
  return make_configuration(rc.n, rc.k.front(), rc.ring2(rc.k.front()), rc.delta.value_or(1.0), rc.eps.value_or(1.0));
}

int cmd_construct(const RunConfig& rc) {
  const TowerConfiguration cfg = base_configuration(rc);
  const auto dir = prepare_out(rc);
  nlohmann::ordered_json sites = nlohmann::ordered_json::array();
  auto f = open_csv(dir / "sites.csv", rc);
  f << "site,kind,index,scale,sign";
  for (int i = 1; i <= cfg.n; ++i) f << ",y" << i;
  f << '\n';
  for (int s = 0; s < cfg.num_sites(); ++s) {
    const Site st = cfg.site(s);
    const char* kind = st.kind == SiteKind::Center ? "center" : st.kind == SiteKind::Ring1 ? "ring1" : "ring2";
    std::vector<double> c(st.c.begin(), st.c.begin() + cfg.n);
    f << s << ',' << kind << ',' << st.index << ',' << st.scale << ',' << st.sign;
    for (double x : c) f << ',' << x;
    f << '\n';
    sites.push_back({{"kind", kind}, {"index", st.index}, {"scale", st.scale}, {"sign", st.sign}, {"center", c}});
  }
  const auto [s1, s2, cross] = min_separation(cfg);
  write_json(dir / "configuration.json", rc,
             {{"n", cfg.n},
              {"k", cfg.k},
              {"h", cfg.h},
              {"delta", cfg.delta},
              {"eps", cfg.eps},
              {"mu", cfg.mu},
              {"lambda", cfg.lambda},
              {"xi_norm", cfg.xi_norm()},
              {"eta_norm", cfg.eta_norm()},
              {"ring1_spacing", s1},
              {"ring2_spacing", s2},
              {"cross_distance", cross},
              {"in_admissible_box", cfg.in_admissible_box},
              {"small_ring_warning", cfg.small_ring_warning},
              {"sites", sites}});
  std::cout << "construct: n=" << cfg.n << " k=" << cfg.k << " h=" << cfg.h << " mu=" << cfg.mu
            << " lambda=" << cfg.lambda << " sites=" << cfg.num_sites() << '\n';
  return 0;
}

int cmd_error_scan(const RunConfig& rc) {
  const auto dir = prepare_out(rc);
  auto f = open_csv(dir / "error_scan.csv", rc);
  f << "k,h,mu,lambda,exterior_norm,interior_ring1_norm,interior_ring2_norm,converged\n";
  std::vector<double> ks, ext, in1, in2;
  bool all_converged = true;
  double predicted_ext = 0.0, predicted_int = 0.0;
  for (int k : rc.k) {
    const TowerConfiguration cfg = make_configuration(rc.n, k, rc.ring2(k), rc.delta.value_or(1.0), rc.eps.value_or(1.0));
    const ErrorBreakdown b = error_breakdown(cfg, rc.quad, false);
    f << k << ',' << cfg.h << ',' << cfg.mu << ',' << cfg.lambda << ',' << b.exterior_norm << ','
      << b.interior_ring1_norm.front() << ',' << b.interior_ring2_norm.front() << ',' << (b.converged ? 1 : 0) << '\n';
    ks.push_back(k);
    ext.push_back(b.exterior_norm);
    in1.push_back(b.interior_ring1_norm.front());
    in2.push_back(b.interior_ring2_norm.front());
    all_converged = all_converged && b.converged;
    predicted_ext = b.predicted_exterior_exponent;
    predicted_int = b.predicted_interior_exponent;
  }
  auto g = open_csv(dir / "exponents.csv", rc);
  g << "region,fitted,predicted\n";
  if (ks.size() >= 2) {
    const double se = loglog_slope(ks, ext), s1 = loglog_slope(ks, in1), s2 = loglog_slope(ks, in2);
    g << "exterior," << se << ',' << predicted_ext << '\n';
    g << "interior_ring1," << s1 << ',' << predicted_int << '\n';
    g << "interior_ring2," << s2 << ',' << predicted_int << '\n';
    std::cout << "error-scan: exterior slope " << se << " (predicted " << predicted_ext << "), interior slope " << s1
              << " (predicted " << predicted_int << ")" << (all_converged ? "" : ", some norms unconverged") << '\n';
  } else {
    std::cout << "error-scan: exterior " << ext.front() << ", interior " << in1.front()
              << " (one k value, no slope fitted)\n";
  }
  return 0;
}

nlohmann::ordered_json samples_json(const std::vector<CoefficientSample>& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (const auto& s : v) a.push_back({{"delta", s.delta}, {"eps", s.eps}, {"cbar0", s.cbar0}, {"chat0", s.chat0}});
  return a;
}

int cmd_solve_reduced(const RunConfig& rc) {
  const auto dir = prepare_out(rc);
  const int k = rc.k.front(), h = rc.ring2(k);
  try {
    const ReducedSolution s = solve_reduced(rc.n, k, h, rc.quad);
    write_json(dir / "reduced.json", rc,
               {{"n", s.n},
                {"k", s.k},
                {"h", s.h},
                {"q", s.q},
                {"delta_star", s.delta_star},
                {"eps_star", s.eps_star},
                {"a1", s.fit_bar.a1},
                {"a2", s.fit_bar.a2},
                {"b1", s.fit_hat.a1},
                {"b2", s.fit_hat.a2},
                {"residuals", {{"cbar0", s.cbar0}, {"chat0", s.chat0}}},
                {"iterations", s.iterations},
                {"method", s.method},
                {"half_delta_cbar0", s.half_delta_cbar0},
                {"scan", samples_json(s.scan)}});
    std::cout << "solve-reduced: delta*=" << s.delta_star << " eps*=" << s.eps_star << " residuals " << s.cbar0 << ", "
              << s.chat0 << " (" << s.method << ", " << s.iterations << " iterations)\n";
    return 0;
  } catch (const NoRootError& e) {
    write_json(dir / "reduced.json", rc, {{"error", e.what()}, {"scan", samples_json(e.table)}});
    throw;
  }
}

// Root of the reduced system unless both parameters are given.
TowerConfiguration certificate_configuration(const RunConfig& rc) {
  const int k = rc.k.front(), h = rc.ring2(k);
  if (rc.delta && rc.eps) return make_configuration(rc.n, k, h, *rc.delta, *rc.eps);
  const ReducedSolution s = solve_reduced(rc.n, k, h, rc.quad);
  return make_configuration(rc.n, k, h, rc.delta.value_or(s.delta_star), rc.eps.value_or(s.eps_star));
}

int cmd_check_kernel(const RunConfig& rc) {
  const auto dir = prepare_out(rc);
  const TowerConfiguration cfg = certificate_configuration(rc);
  const NondegeneracyReport r = certify(cfg, rc.quad, rc.seed);
  std::vector<double> family(kDecompositionFamilies, 0.0);
  for (int beta = 0; beta < r.N0; ++beta) {
    const int f = decomposition_family(beta, cfg.n);
    family[f] = std::max(family[f], r.decomposition_residuals[beta]);
  }
  const bool ok = r.gram_rank == r.N0 && r.decomposition_max_residual <= 1e-8;
  write_json(dir / "kernel.json", rc,
             {{"delta", cfg.delta},
              {"eps", cfg.eps},
              {"N0", r.N0},
              {"script_N", r.script_N},
              {"rank", r.gram_rank},
              {"min_singular_ratio", r.min_singular_ratio},
              {"singular_values", r.singular_values},
              {"rank_thresholds", r.rank_thresholds},
              {"rank_at_threshold", r.rank_at_threshold},
              {"decomposition_max_residuals", family},
              {"kelvin_identity_residual", r.kelvin_identity_residual},
              {"L_residual_norms", r.L_residual_table},
              {"caveat", r.caveat}});
  std::cout << "check-kernel: rank " << r.gram_rank << " of N0=" << r.N0 << ", decomposition residual "
            << r.decomposition_max_residual << (ok ? "" : " FAILED") << '\n';
  return ok ? 0 : 1;
}

int cmd_circulant_check(const RunConfig& rc) {
  const auto dir = prepare_out(rc);
  const TowerConfiguration cfg = base_configuration(rc);
  const InteractionBlocks b = assemble_interaction(cfg, rc.quad);

  nlohmann::ordered_json norms;
  const char* letters = "ABCDEFGHIJKLMNP";
  int idx = 0;
  for (int a = 0; a <= 4; ++a)
    for (int c = a; c <= 4; ++c, ++idx) {
      const std::string name(1, letters[idx]);
      norms[name + "bar"] = b.sub(a, 1, c, 1).norm();
      norms[name + "hat"] = b.sub(a, 2, c, 2).norm();
      norms[name + "1"] = b.sub(a, 1, c, 2).norm();
      norms[name + "2"] = b.sub(a, 2, c, 1).norm();
    }
  const auto beta = beta_table(b);
  nlohmann::ordered_json beta_rows = nlohmann::ordered_json::array();
  for (int i = 0; i < 5; ++i) {
    std::vector<double> row;
    for (int j = 0; j < 5; ++j) row.push_back(beta(i, j));
    beta_rows.push_back(row);
  }
  auto checks_json = [](const std::vector<BlockCheck>& v) {
    nlohmann::ordered_json j;
    for (const auto& c : v) j[c.name] = {{"deviation", c.deviation}, {"scale", c.scale}};
    return j;
  };
  nlohmann::ordered_json kernel;
  kernel["m1_kernel_vectors"] = m1_kernel_residuals(b);
  std::vector<double> rows;
  for (int alpha = 5; alpha <= cfg.n; ++alpha) rows.push_back(row_sum_residual(b.htilde(alpha)));
  kernel["row_sum"] = rows;
  const OrthogonalityReport orth = check_orthogonality_conditions(b, rc.seed);
  nlohmann::ordered_json orth_json;
  for (std::size_t i = 0; i < orth.names.size(); ++i) orth_json[orth.names[i]] = orth.values[i];

  bool ok = true;
  nlohmann::ordered_json solves = nlohmann::ordered_json::array();
  for (int alpha = 0; alpha <= cfg.n; ++alpha) {
    nlohmann::ordered_json s{{"alpha", alpha}};
    try {
      const BlockInteractionSystem sys = block_system(b, alpha, rc.seed + alpha);
      const ContractionResult res = solve_block_contraction(sys);
      Eigen::VectorXd w(cfg.k + cfg.h);
      w << res.wbar, res.what;
      const Eigen::VectorXd dense = dense_block_solve(sys);
      const double diff = (w - dense).norm() / std::max(dense.norm(), 1e-300);
      s["gamma"] = sys.gamma;
      s["factor"] = res.factor;
      s["sweep_rate"] = res.sweep_rate;
      s["iterations"] = res.iterations;
      s["bound_ratio"] = res.bound_ratio;
      s["dense_relative_difference"] = diff;
      ok = ok && diff <= 1e-8;
    } catch (const NumericalError& e) {
      s["error"] = e.what();
    }
    solves.push_back(s);
  }
  write_json(dir / "circulant.json", rc,
             {{"noise", b.noise()},
              {"converged", b.converged()},
              {"block_norms", norms},
              {"beta", beta_rows},
              {"kernel_residuals", kernel},
              {"factored_forms", checks_json(factored_form_checks(b))},
              {"block_identities", checks_json(block_identity_checks(b))},
              {"circulant_property", checks_json(circulant_property_checks(b))},
              {"orthogonality", orth_json},
              {"block_solves", solves}});
  std::cout << "circulant-check: beta00=" << beta(0, 0) << " noise=" << b.noise() << ", block solves "
            << (ok ? "agree with the dense oracle" : "DISAGREE with the dense oracle") << '\n';
  return ok ? 0 : 1;
}

int cmd_certify(const RunConfig& rc) {
  const auto dir = prepare_out(rc);
  const TowerConfiguration cfg = certificate_configuration(rc);
  const NondegeneracyReport r = certify(cfg, rc.quad, rc.seed);
  write_json(dir / "report.json", rc, r.to_json());
  std::cout << "certify: N0=" << r.N0 << " script_N=" << r.script_N << " maximal=" << (r.maximal ? "true" : "false")
            << " gram_rank=" << r.gram_rank << " pass=" << (r.pass ? "true" : "false") << '\n';
  return r.pass ? 0 : 1;
}

template <class T>
T get_value(const nlohmann::json& v, const char* key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key ") + key + " has the wrong type");
  }
}

}  // namespace

void RunConfig::validate() const {
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
    throw ConfigError("unknown command: " + command);
  if (n < 4) throw ConfigError("n must be ≥ 4");
  if (n > kMaxDim) throw ConfigError("n must be ≤ " + std::to_string(kMaxDim));
  if (k.empty()) throw ConfigError("k list is empty");
  for (int v : k)
    if (v < 3) throw ConfigError("ring sizes k and h must be ≥ 3");
  if (h != 0 && h < 3) throw ConfigError("ring sizes k and h must be ≥ 3");
  if (delta && !(*delta > 0.0)) throw ConfigError("delta and eps must be positive");
  if (eps && !(*eps > 0.0)) throw ConfigError("delta and eps must be positive");
  quad.validate(n);
  if (out.empty()) throw ConfigError("output directory is empty");
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["n"] = n;
  if (k.size() == 1)
    j["k"] = k.front();
  else
    j["k"] = k;
  j["h"] = h;
  j["delta"] = delta ? nlohmann::ordered_json(*delta) : nlohmann::ordered_json(nullptr);
  j["eps"] = eps ? nlohmann::ordered_json(*eps) : nlohmann::ordered_json(nullptr);
  const nlohmann::ordered_json scheme = scheme_json(quad);
  for (const auto& [key, value] : scheme.items()) j[key] = value;
  j["out"] = out;
  j["seed"] = seed;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig rc;
  bool q_set = false;
  for (const auto& [key, v] : j.items()) {
    if (key == "command") rc.command = get_value<std::string>(v, "command");
    else if (key == "n") rc.n = get_value<int>(v, "n");
    else if (key == "k") rc.k = v.is_array() ? get_value<std::vector<int>>(v, "k") : std::vector<int>{get_value<int>(v, "k")};
    else if (key == "h") rc.h = get_value<int>(v, "h");
    else if (key == "delta") rc.delta = v.is_null() ? std::nullopt : std::optional<double>(get_value<double>(v, "delta"));
    else if (key == "eps") rc.eps = v.is_null() ? std::nullopt : std::optional<double>(get_value<double>(v, "eps"));
    else if (key == "q") { rc.quad.q = get_value<double>(v, "q"); q_set = true; }
    else if (key == "alpha_bar") rc.quad.alpha_bar = get_value<double>(v, "alpha_bar");
    else if (key == "alpha_hat") rc.quad.alpha_hat = get_value<double>(v, "alpha_hat");
    else if (key == "rel_tol") rc.quad.rel_tol = get_value<double>(v, "rel_tol");
    else if (key == "radial_nodes") rc.quad.radial_nodes = get_value<int>(v, "radial_nodes");
    else if (key == "angular_degree") rc.quad.angular_degree = get_value<int>(v, "angular_degree");
    else if (key == "max_refine") rc.quad.max_refine = get_value<int>(v, "max_refine");
    else if (key == "out") rc.out = get_value<std::string>(v, "out");
    else if (key == "seed") rc.seed = get_value<std::uint64_t>(v, "seed");
    else throw ConfigError("unknown config key: " + key);
  }
  if (!q_set) rc.quad.q = 0.75 * rc.n;
  return rc;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Two-ring bubble tower laboratory"};
  app.footer(kHelpFooter);
  app.set_help_flag("--help", "print this help and exit");  // -h would clash with --h
  std::string command, k_text, config_path, out;
  std::optional<int> n, h, seed;
  std::optional<double> delta, eps, q, alpha_bar, alpha_hat, rel_tol;
  app.add_option("command", command, "one of construct, error-scan, solve-reduced, check-kernel, circulant-check, certify");
  app.add_option("--n", n, "dimension (4..12)");
  app.add_option("--k", k_text, "ring-1 size; error-scan takes a comma-separated list");
  app.add_option("--h", h, "ring-2 size (default: k)");
  app.add_option("--delta", delta, "ring-1 parameter");
  app.add_option("--eps", eps, "ring-2 parameter");
  app.add_option("--q", q, "exponent of the weighted L^q norm (default 0.75 n)");
  app.add_option("--alpha-bar", alpha_bar, "ring-1 region radius factor");
  app.add_option("--alpha-hat", alpha_hat, "ring-2 region radius factor");
  app.add_option("--rel-tol", rel_tol, "relative quadrature tolerance");
  app.add_option("--seed", seed, "seed for sample points and right-hand sides");
  app.add_option("--out", out, "output directory (default .)");
  app.add_option("--config", config_path, "JSON file with the same keys (flags override it)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunConfig rc;
    bool q_set = false;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("cannot read config file " + config_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(f);
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
      }
      q_set = j.is_object() && j.contains("q");
      rc = run_config_from_json(j);
    }
    if (!command.empty()) rc.command = command;
    if (rc.command.empty()) throw ConfigError("no command given");
    if (n) rc.n = *n;
    if (!k_text.empty()) rc.k = parse_int_list(k_text);
    if (h) rc.h = *h;
    if (delta) rc.delta = delta;
    if (eps) rc.eps = eps;
    if (q) {
      rc.quad.q = *q;
      q_set = true;
    }
    if (!q_set) rc.quad.q = 0.75 * rc.n;
    if (alpha_bar) rc.quad.alpha_bar = *alpha_bar;
    if (alpha_hat) rc.quad.alpha_hat = *alpha_hat;
    if (rel_tol) rc.quad.rel_tol = *rel_tol;
    if (seed) {
      if (*seed < 0) throw ConfigError("seed must be non-negative");
      rc.seed = static_cast<std::uint64_t>(*seed);
    }
    if (!out.empty()) rc.out = out;
    rc.validate();
    if (rc.command != "error-scan" && rc.k.size() != 1) throw ConfigError(rc.command + " takes a single k");

    if (rc.command == "construct") return cmd_construct(rc);
    if (rc.command == "error-scan") return cmd_error_scan(rc);
    if (rc.command == "solve-reduced") return cmd_solve_reduced(rc);
    if (rc.command == "check-kernel") return cmd_check_kernel(rc);
    if (rc.command == "circulant-check") return cmd_circulant_check(rc);
    return cmd_certify(rc);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace bt
