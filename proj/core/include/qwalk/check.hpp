#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qwalk/asymptotics.hpp"
#include "qwalk/geometry.hpp"
#include "qwalk/green.hpp"
#include "qwalk/model.hpp"

namespace qwalk {

// A validated model with its geometry and a lazily built asymptotic context.
class ModelCase {
 public:
  ModelCase(std::string name, WalkModel model, std::optional<Region> intended = {});

  const std::string& name() const { return name_; }
  const WalkModel& model() const { return model_; }
  const Geometry& geometry() const { return *geom_; }
  std::optional<Region> intended() const { return intended_; }
  // kappas on [0, 14]^2; W0 direction kappas are added by the checks that need them
  AsymptoticContext& context();

 private:
  std::string name_;
  WalkModel model_;
  std::unique_ptr<Geometry> geom_;
  std::optional<Region> intended_;
  std::optional<AsymptoticContext> ctx_;
};

struct CriterionResult {
  int id = 0;
  std::string module;
  std::string title;
  std::string topic;  // printed with a failure
  bool passed = true;
  bool skipped = false;
  double seconds = 0;
  double budget_seconds = 0;
  std::vector<std::string> lines;

  void info(std::string s) { lines.push_back(std::move(s)); }
  void fail(std::string s) {
    passed = false;
    lines.push_back("FAIL " + std::move(s));
  }
  void require(bool ok, std::string s) { ok ? info(std::move(s)) : fail(std::move(s)); }
};

struct CheckReport {
  std::vector<CriterionResult> results;
  std::vector<std::string> notes;
  bool all_passed() const;
};

// one pass/fail line per criterion, grouped by module; details when verbose
void print_report(std::ostream& out, const CheckReport& r, bool verbose);

using Cases = std::vector<ModelCase*>;

// 1. P(x, Y_i(x)) = 1 and the four inverse-branch identities at 50 x per model
CriterionResult check_geometry(const Cases& cs);
// 2. Y1 against its first-passage representation on 20 interior x
CriterionResult check_branch_probability(const Cases& cs);
// 3. intended regions, and the region of each transposed model
CriterionResult check_atlas(const Cases& cs);
// 4. recurrence sign class against the geometric equivalents
CriterionResult check_recurrence(const Cases& cs);
// 5. functional equation residuals at 20 interior points
CriterionResult check_functional_equation(ModelCase& c, const std::vector<Site>& js = {{0, 0}, {1, 1}, {3, 2}});
// 6. one-step harmonicity on [0,12]^2 and positivity off E0, every kappa of the region
CriterionResult check_harmonicity(const Cases& cs);
// 7. nu1 by series division and by the twisted chain
CriterionResult check_nu1(const Cases& cs);
// 8. extrapolated pole limits against a kappa(j)
CriterionResult check_axis_limits(const Cases& cs, const std::vector<Site>& js = {{0, 0}, {1, 1}, {3, 2}});
// 9. axis asymptotics on `required`; `informational` models are reported only
CriterionResult check_axis_asymptotics(const Cases& required, const Cases& informational = {});

struct DirectionCase {
  ModelCase* model = nullptr;
  Site k{0, 0};
  bool required = true;
};
// one integer point of norm ~ norm per non-empty direction class
std::vector<Site> representative_directions(const Geometry& g, double norm = 60);
// 10. interior-direction predictions within 15%; critical two-term beats each term
CriterionResult check_directions(const std::vector<DirectionCase>& ks);

struct MartinCase {
  ModelCase* model = nullptr;
  std::vector<Site> js;
  std::vector<Site> ks;
  // also check P_0(tau0 = inf) kappa(j)/kappa(0) + P_j(tau0 < inf) = 1
  bool identity = false;
};
// the identity applies when the model is transient and a kappa is evaluated at (1,1)
bool identity_applies(ModelCase& c);
// 11. Martin ratios within 10% and the escape identity within its bounds
CriterionResult check_martin(const std::vector<MartinCase>& cases);

// 12. library outputs byte-identical across repeated runs and thread counts
CriterionResult check_determinism(const Cases& cs);

// the full battery for one model; B7 runs the classification checks only
CheckReport check_model(const std::string& name, const WalkModel& m);

}  // namespace qwalk
