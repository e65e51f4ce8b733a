// Command-line front end: qwalk <command> MODEL [options]

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "qwalk/asymptotics.hpp"
#include "qwalk/check.hpp"
#include "qwalk/geometry.hpp"
#include "qwalk/green.hpp"
#include "qwalk/model.hpp"
#include "qwalk/numeric.hpp"

using namespace qwalk;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kCheckFailed = 2, kError = 3 };

struct RunConfig {
  std::string model_path;
  std::string out;
  double tol = 0;  // 0 keeps the command default
  std::uint64_t seed = 1;
  int threads = 1;
  std::vector<std::string> j = {"0,0"};
  std::vector<std::string> k;
  std::string box = "20,20";
  std::string direction = "1,1";
  std::string method = "direct";
  std::uint64_t paths = 100000;
  int norm = 60;
  bool axis = false;
  bool verbose = false;
};

std::array<int, 2> pair_of(const std::string& s, const char* flag) {
  std::array<int, 2> v{};
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d,%d%c", &v[0], &v[1], &tail) != 2)
    throw CLI::ValidationError(flag, "expected two integers A,B, got '" + s + "'");
  return v;
}

std::array<double, 2> real_pair(const std::string& s, const char* flag) {
  std::array<double, 2> v{};
  char tail = 0;
  if (std::sscanf(s.c_str(), "%lf,%lf%c", &v[0], &v[1], &tail) != 2)
    throw CLI::ValidationError(flag, "expected two numbers U,V, got '" + s + "'");
  return v;
}

std::vector<Site> sites(const std::vector<std::string>& v, const char* flag) {
  std::vector<Site> out;
  for (const auto& s : v) out.push_back(pair_of(s, flag));
  return out;
}

// CSV to --out when given, otherwise to stdout
void emit_csv(const RunConfig& c, const std::string& csv) {
  if (c.out.empty()) {
    std::cout << csv;
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + c.out);
  f << csv;
}

WalkModel load_valid(const RunConfig& c) {
  WalkModel m = load_model(c.model_path);
  require_valid(m);
  return m;
}

int cmd_validate(const RunConfig& c) {
  WalkModel m = load_model(c.model_path);
  auto rep = validate_model(m);
  std::ostringstream csv;
  csv << "check,passed,witness\n";
  for (const auto& it : rep.items) {
    std::cout << fmt::format("{:<6} {}{}\n", it.passed ? "ok" : "FAIL", it.name,
                             it.witness.empty() ? "" : "  (" + it.witness + ")");
    csv << it.name << ',' << (it.passed ? 1 : 0) << ",\"" << it.witness << "\"\n";
  }
  std::cout << fmt::format("reachability radius {}\n", rep.bfs_radius);
  std::cout << (rep.all_passed() ? "model valid\n" : "model invalid\n");
  if (!c.out.empty()) emit_csv(c, csv.str());
  return rep.all_passed() ? kOk : kInvalid;
}

int cmd_classify(const RunConfig& c) {
  WalkModel m = load_valid(c);
  Geometry g(m);
  auto rc = classify_recurrence(m);
  const auto& lab = g.region();
  auto yn = [](bool b) { return b ? "yes" : "no"; };
  std::ostringstream s;
  s << "region " << region_name(lab.region) << "\n";
  s << "recurrence " << recurrence_name(rc.label) << (rc.also_T2 ? " (also T2)" : "") << "\n";
  s << fmt::format("x_d at corner {}, y_d at corner {}\n", yn(lab.xd_at_corner), yn(lab.yd_at_corner));
  s << fmt::format("phi1 corner = 1 {}, phi2 corner = 1 {}\n", yn(lab.phi1_corner_eq_one),
                   yn(lab.phi2_corner_eq_one));
  s << fmt::format("X1(y**) {}  X2(y**) {}  Y1(x**) {}  Y2(x**) {}\n", fmt_short(lab.X1_ys2), fmt_short(lab.X2_ys2),
                   fmt_short(lab.Y1_xs2), fmt_short(lab.Y2_xs2));
  for (const auto& w : lab.boundary_warnings) s << "warning: " << w << "\n";
  for (const auto& w : rc.warnings) s << "warning: " << w << "\n";
  if (g.supported()) s << "directions: " << g.partition().description << "\n";
  std::cout << s.str();
  if (!c.out.empty()) emit_csv(c, s.str());
  return kOk;
}

int cmd_critical(const RunConfig& c) {
  WalkModel m = load_valid(c);
  Geometry g(m);
  const auto& p = g.critical();
  std::vector<std::pair<const char*, double>> rows = {
      {"xP_star", p.xP_star}, {"xP_star2", p.xP_star2}, {"yP_star", p.yP_star}, {"yP_star2", p.yP_star2},
      {"x_star", p.x_star},   {"x_star2", p.x_star2},   {"y_star", p.y_star},   {"y_star2", p.y_star2},
      {"x_d", p.x_d},         {"y_d", p.y_d},           {"corner_phi1", p.corner_phi1},
      {"corner_phi2", p.corner_phi2}};
  std::ostringstream csv;
  csv << "name,value\n";
  for (auto [n, v] : rows) {
    std::cout << fmt::format("{:<12} {}\n", n, fmt_short(v));
    csv << n << ',' << fmt_full(v) << "\n";
  }
  std::cout << "dominant point " << (p.has_dominant ? "yes" : "no") << "\n";
  if (!c.out.empty()) emit_csv(c, csv.str());
  return kOk;
}

GreenTable oracle_table(const WalkModel& m, const Geometry& g, Site j, Box box, const RunConfig& c) {
  GreenOptions o;
  o.method = GreenMethod::Direct;
  // certified bounds near |k| = 60 need a work margin of about 4 |k|
  o.margin = std::max(80, 4 * std::max(box.kx, box.ky));
  o.threads = c.threads;
  return green_table(m, g, j, box, c.tol > 0 ? c.tol : 1e-13, o);
}

int cmd_green(const RunConfig& c) {
  WalkModel m = load_valid(c);
  Geometry g(m);
  Site j = pair_of(c.j.front(), "--j");
  auto b = pair_of(c.box, "--box");
  double tol = c.tol > 0 ? c.tol : 1e-10;
  if (c.method == "montecarlo") {
    std::vector<Site> targets;
    for (int k2 = 0; k2 <= b[1]; ++k2)
      for (int k1 = 0; k1 <= b[0]; ++k1) targets.push_back({k1, k2});
    auto r = monte_carlo_green(m, j, targets, c.paths, c.seed, 1000000, c.threads);
    std::ostringstream csv;
    csv << "k1,k2,mean,stderr\n";
    for (std::size_t i = 0; i < targets.size(); ++i)
      csv << targets[i][0] << ',' << targets[i][1] << ',' << fmt_full(r.mean[i]) << ',' << fmt_full(r.stderr_[i])
          << "\n";
    std::cerr << fmt::format("{} paths, {} capped\n", r.paths, r.capped);
    emit_csv(c, csv.str());
    return kOk;
  }
  GreenOptions o;
  o.threads = c.threads;
  if (c.method == "direct") o.method = GreenMethod::Direct;
  else if (c.method == "iterate") o.method = GreenMethod::Iterate;
  else throw CLI::ValidationError("--method", "expected direct, iterate or montecarlo");
  auto t = green_table(m, g, j, Box{b[0], b[1]}, tol, o);
  std::ostringstream csv;
  write_green_csv(csv, t);
  emit_csv(c, csv.str());
  if (!c.out.empty()) {
    double worst = *std::max_element(t.tail_bound.begin(), t.tail_bound.end());
    std::cout << fmt::format("method {}, certified {}, P_j(return) {} +- {}, max bound {}\n", t.method,
                             t.certified ? "yes" : "no", fmt_short(t.hit_prob), fmt_short(t.hit_bound),
                             fmt_short(worst));
  }
  return kOk;
}

int cmd_asymptotics(const RunConfig& c) {
  WalkModel m = load_valid(c);
  Geometry g(m);
  Site j = pair_of(c.j.front(), "--j");
  auto ks = sites(c.k, "--k");
  if (ks.empty()) throw CLI::ValidationError("--k", "at least one --k is required");
  ContextOptions co;
  co.j_side = std::max(j[0], j[1]) + 1;
  auto ctx = build_context(m, g, co);
  int K = 0;
  for (Site k : ks) {
    K = std::max({K, k[0] + 1, k[1] + 1});
    if (!c.axis) add_direction_kappa(m, g, ctx, {double(k[0]), double(k[1])}, co);
  }
  auto t = oracle_table(m, g, j, Box{K, K}, c);
  std::vector<PredictionRow> rows;
  for (Site k : ks) {
    auto p = c.axis ? predict_axis(g, ctx, j, k[0], k[1]) : predict_direction(m, g, ctx, j, k);
    PredictionRow r;
    r.k = k;
    r.regime = regime_name(p.regime);
    r.predicted = p.value;
    r.oracle = t.value(k[0], k[1]);
    r.ratio = r.oracle / r.predicted;
    r.bound = t.bound(k[0], k[1]);
    rows.push_back(r);
  }
  std::ostringstream csv;
  write_prediction_csv(csv, rows);
  if (!c.out.empty()) {
    emit_csv(c, csv.str());
    for (const auto& r : rows)
      std::cout << fmt::format("k = ({},{}) {}: predicted {} oracle {} ratio {} bound {}\n", r.k[0], r.k[1], r.regime,
                               fmt_short(r.predicted), fmt_short(r.oracle), fmt_short(r.ratio), fmt_short(r.bound));
  } else {
    std::cout << csv.str();
  }
  return kOk;
}

int cmd_martin(const RunConfig& c) {
  WalkModel m = load_valid(c);
  Geometry g(m);
  auto js = sites(c.j, "--j");
  auto w = real_pair(c.direction, "--direction");
  double n = std::hypot(w[0], w[1]);
  if (!(n > 0) || w[0] < 0 || w[1] < 0) throw CLI::ValidationError("--direction", "expected U,V >= 0, not both 0");
  std::vector<Site> ks;
  for (int r = 10; r <= c.norm; r += 10) {
    Site k{int(std::lround(r * w[0] / n)), int(std::lround(r * w[1] / n))};
    if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
  }
  int J = 0, K = 0;
  for (Site j : js) J = std::max({J, j[0], j[1]});
  for (Site k : ks) K = std::max({K, k[0] + 1, k[1] + 1});
  ContextOptions co;
  co.j_side = J + 1;
  auto ctx = build_context(m, g, co);
  add_direction_kappa(m, g, ctx, w, co);
  auto t0 = oracle_table(m, g, {0, 0}, Box{K, K}, c);
  std::ostringstream csv;
  csv << "j1,j2,k1,k2,ratio,predicted\n";
  for (Site j : js) {
    auto t = oracle_table(m, g, j, Box{K, K}, c);
    double pred = martin_prediction(m, g, ctx, j, ks.back());
    for (Site k : ks) {
      double ratio = t.value(k[0], k[1]) / t0.value(k[0], k[1]);
      csv << j[0] << ',' << j[1] << ',' << k[0] << ',' << k[1] << ',' << fmt_full(ratio) << ',' << fmt_full(pred)
          << "\n";
      if (!c.out.empty())
        std::cout << fmt::format("j = ({},{}) k = ({},{}): g(j,k)/g(0,k) {} predicted {}\n", j[0], j[1], k[0], k[1],
                                 fmt_short(ratio), fmt_short(pred));
    }
  }
  if (c.out.empty()) std::cout << csv.str();
  else emit_csv(c, csv.str());
  return kOk;
}

int cmd_check(const RunConfig& c) {
  WalkModel m = load_model(c.model_path);
  auto rep = check_model(c.model_path, m);
  std::ostringstream s;
  print_report(s, rep, c.verbose);
  std::cout << s.str();
  if (!c.out.empty()) {
    std::ostringstream full;
    print_report(full, rep, true);
    emit_csv(c, full.str());
  }
  return rep.all_passed() ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Green functions and their asymptotics for walks in the quarter plane"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&](CLI::App* s) {
    s->add_option("model", cfg.model_path, "model file")->required()->check(CLI::ExistingFile);
    s->add_option("--out", cfg.out, "write the CSV (17 significant digits) here");
    s->add_option("--threads", cfg.threads, "worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
  };
  auto tol = [&](CLI::App* s, const char* what) {
    s->add_option("--tol", cfg.tol, what)->check(CLI::PositiveNumber);
  };

  struct Cmd {
    CLI::App* app;
    int (*run)(const RunConfig&);
  };
  std::vector<Cmd> cmds;

  auto* v = app.add_subcommand("validate", "check the model assumptions");
  common(v);
  cmds.push_back({v, cmd_validate});

  auto* cl = app.add_subcommand("classify", "region, recurrence class and warnings");
  common(cl);
  cmds.push_back({cl, cmd_classify});

  auto* cr = app.add_subcommand("critical", "critical points of the level sets");
  common(cr);
  cmds.push_back({cr, cmd_critical});

  auto* as = app.add_subcommand("asymptotics", "predicted g(j,k) against the oracle");
  common(as);
  tol(as, "oracle truncation target (default 1e-13)");
  as->add_option("--j", cfg.j, "source J1,J2")->expected(1);
  as->add_option("--k", cfg.k, "target K1,K2 (repeatable)")->required();
  as->add_flag("--axis", cfg.axis, "axis asymptotics in k1 at fixed k2");
  cmds.push_back({as, cmd_asymptotics});

  auto* gr = app.add_subcommand("green", "Green function table on a box");
  common(gr);
  tol(gr, "truncation target (default 1e-10)");
  gr->add_option("--j", cfg.j, "source J1,J2")->expected(1);
  gr->add_option("--box", cfg.box, "box KX,KY");
  gr->add_option("--method", cfg.method, "direct, iterate or montecarlo");
  gr->add_option("--seed", cfg.seed, "Monte Carlo seed");
  gr->add_option("--paths", cfg.paths, "Monte Carlo paths");
  cmds.push_back({gr, cmd_green});

  auto* ma = app.add_subcommand("martin", "g(j,k)/g(0,k) along a direction");
  common(ma);
  tol(ma, "oracle truncation target (default 1e-13)");
  ma->add_option("--j", cfg.j, "source J1,J2 (repeatable)");
  ma->add_option("--direction", cfg.direction, "direction U,V");
  ma->add_option("--norm", cfg.norm, "largest |k|, in steps of 10")->check(CLI::Range(10, 200));
  cmds.push_back({ma, cmd_martin});

  auto* ch = app.add_subcommand("check", "acceptance battery for one model");
  common(ch);
  ch->add_flag("-v,--verbose", cfg.verbose, "print every detail line");
  cmds.push_back({ch, cmd_check});

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& c : cmds)
      if (c.app->parsed()) return c.run(cfg);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const ModelError& e) {
    std::cerr << "invalid model: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
