// One pass/fail line per acceptance criterion over the reference models.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "qwalk/check.hpp"
#include "reference_models.hpp"

using namespace qwalk;
namespace fs = std::filesystem;

namespace {

std::string run(const std::string& cmd) {
  std::string out;
  std::unique_ptr<FILE, int (*)(FILE*)> p(popen(cmd.c_str(), "r"), pclose);
  if (!p) return "<popen failed>";
  std::array<char, 4096> buf;
  while (std::size_t n = fread(buf.data(), 1, buf.size(), p.get())) out.append(buf.data(), n);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// every CLI command twice at one thread and once at four, stdout and --out bytes compared
void cli_determinism(CriterionResult& r, const std::string& cli, const std::string& data) {
  fs::path tmp = fs::temp_directory_path() / "qwalk_acceptance";
  fs::create_directories(tmp);
  std::string m0 = data + "/m_r0.model", b4 = data + "/b4.model";
  std::vector<std::pair<std::string, std::string>> cmds = {
      {"validate", "validate " + m0},
      {"classify", "classify " + m0},
      {"critical", "critical " + m0},
      {"green", "green " + m0 + " --j 1,1 --box 20,20 --tol 1e-8"},
      {"asymptotics", "asymptotics " + b4 + " --j 1,0 --k 12,8"},
      {"martin", "martin " + b4 + " --j 1,0 --j 2,1 --direction 5,3 --norm 10"},
  };
  for (const auto& [name, args] : cmds) {
    std::vector<std::string> outs;
    for (int threads : {1, 1, 4}) {
      fs::path f = tmp / fmt::format("{}_{}.csv", name, outs.size());
      std::string cmd = fmt::format("{} {} --threads {} --out {} 2>&1", cli, args, threads, f.string());
      outs.push_back(run(cmd) + "\n--file--\n" + slurp(f));
    }
    bool same = outs[0] == outs[1] && outs[0] == outs[2];
    r.require(same, fmt::format("qwalk {}: byte-identical over two runs and 1/4 threads: {} ({} bytes)", name,
                                same ? "yes" : "no", outs[0].size()));
  }
  fs::remove_all(tmp);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance battery over the reference models"};
  std::string data = "tests/data", cli;
  bool verbose = false;
  app.add_option("--data", data, "directory of reference models")->check(CLI::ExistingDirectory);
  app.add_option("--cli", cli, "qwalk executable for the command-level determinism check");
  app.add_flag("-v,--verbose", verbose, "print the detail lines of every criterion");
  CLI11_PARSE(app, argc, argv);

  auto refs = qwalk::testing::load_reference_models(data);
  std::vector<std::unique_ptr<ModelCase>> owned;
  std::map<std::string, ModelCase*> by_file;
  Cases all;
  for (auto& rm : refs) {
    owned.push_back(std::make_unique<ModelCase>(rm.file, rm.model, rm.region));
    by_file[rm.file] = owned.back().get();
    all.push_back(owned.back().get());
  }
  ModelCase* mr0 = by_file.at("m_r0.model");
  ModelCase* b0 = by_file.at("b0.model");
  ModelCase* b4 = by_file.at("b4.model");
  ModelCase* b6 = by_file.at("b6.model");

  CheckReport rep;
  auto emit = [&](CriterionResult r) {
    std::cout << fmt::format("{} criterion {:>2}: {} ({:.1f} s)\n", r.passed ? "PASS" : "FAIL", r.id, r.title,
                             r.seconds);
    for (const auto& l : r.lines)
      if (verbose || l.rfind("FAIL", 0) == 0) std::cout << "    " << l << "\n";
    std::cout.flush();
    rep.results.push_back(std::move(r));
  };

  emit(check_geometry(all));
  emit(check_branch_probability(all));
  emit(check_atlas(all));
  emit(check_recurrence(all));
  emit(check_functional_equation(*mr0));
  emit(check_harmonicity(all));
  emit(check_nu1(all));
  emit(check_axis_limits({mr0, b6}));
  emit(check_axis_asymptotics({b0}, {mr0}));
  emit(check_directions({{b0, {55, 24}, true},
                         {b0, {24, 55}, true},
                         {b0, {42, 42}, true},
                         {mr0, {42, 42}, true},
                         {mr0, {50, 33}, false}}));
  emit(check_martin({{b0, {{1, 0}, {2, 1}}, {{55, 24}, {24, 55}}, false},
                     {b4, {{1, 0}, {2, 1}, {3, 3}}, {{50, 30}, {30, 50}}, identity_applies(*b4)}}));
  auto det = check_determinism({mr0, b4});
  if (!cli.empty()) {
    auto t0 = std::chrono::steady_clock::now();
    cli_determinism(det, cli, data);
    det.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (det.seconds > det.budget_seconds)
      det.fail(fmt::format("runtime {:.1f} s over the {:.0f} s budget", det.seconds, det.budget_seconds));
  } else {
    det.info("no --cli given; command-level runs skipped");
  }
  emit(std::move(det));

  int passed = 0;
  for (const auto& r : rep.results) passed += r.passed;
  std::cout << fmt::format("{}/{} criteria passed\n", passed, rep.results.size());
  return rep.all_passed() ? 0 : 1;
}
