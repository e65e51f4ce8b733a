#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qwalk {

enum class Role { Interior, HBoundary, VBoundary, Origin };

const char* role_name(Role r);

struct Jump {
  int dx = 0;
  int dy = 0;
  double mass = 0.0;
};

class ModelError : public std::runtime_error {
 public:
  enum class Kind { MalformedMeasure, AssumptionViolated, NonStochasticBoundary, Io };
  ModelError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Finitely supported sub-probability measure on Z^2 with a role tag.
// Entries are kept sorted by (dx, dy) with no duplicates and no zero masses.
class JumpMeasure {
 public:
  JumpMeasure() = default;
  JumpMeasure(Role role, std::vector<Jump> entries);

  Role role() const { return role_; }
  const std::vector<Jump>& entries() const { return entries_; }
  double total() const;
  double mass(int dx, int dy) const;
  int max_abs_jump() const;

  // sum mass * x^dx * y^dy, correctly rounded
  double gf(double x, double y) const;
  // partial derivative d^ax/dx^ax d^ay/dy^ay of gf
  double gf_d(int ax, int ay, double x, double y) const;
  // sum mass * dx^px * dy^py * x^dx * y^dy (moment under a twist)
  double moment(int px, int py, double x, double y) const;

  JumpMeasure transposed() const;

  bool operator==(const JumpMeasure& o) const;

 private:
  Role role_ = Role::Interior;
  std::vector<Jump> entries_;
};

struct WalkModel {
  JumpMeasure mu{Role::Interior, {}};
  JumpMeasure mu0{Role::Origin, {}};
  JumpMeasure mu1{Role::HBoundary, {}};
  JumpMeasure mu2{Role::VBoundary, {}};
  bool validated = false;
  std::string name;

  const JumpMeasure& measure_at(int k1, int k2) const;
  WalkModel transposed() const;
};

WalkModel parse_model(std::istream& in, const std::string& name = "");
WalkModel load_model(const std::string& path);
std::string format_model(const WalkModel& m);

struct ValidationItem {
  std::string name;
  bool passed = false;
  std::string witness;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  int bfs_radius = 0;
  bool all_passed() const;
};

// Checks the model assumptions and sets m.validated.
ValidationReport validate_model(WalkModel& m);
// Throws AssumptionViolated with the first failing item.
void require_valid(WalkModel& m);

double eval_gf(const JumpMeasure& m, double x, double y);
double eval_Q(const WalkModel& m, double x, double y);
double eval_psi1(const WalkModel& m, double x, double y);
double eval_psi2(const WalkModel& m, double x, double y);
double eval_L(const WalkModel& m, int j1, int j2, double x, double y, double hit_prob);

struct DriftData {
  std::array<double, 2> M{};
  std::array<double, 2> M1vec{};
  std::array<double, 2> M2vec{};
};

DriftData drift(const WalkModel& m);

enum class Recurrence { R0, R1, R2, T0, T1, T2, Indeterminate };

const char* recurrence_name(Recurrence r);

struct RecurrenceClass {
  Recurrence label = Recurrence::Indeterminate;
  // set when both transience conditions hold at once
  bool also_T2 = false;
  std::vector<std::string> warnings;
};

constexpr double kEpsSign = 1e-12;
constexpr double kMassTol = 1e-12;

bool is_stochastic(const JumpMeasure& m);
RecurrenceClass classify_recurrence(const WalkModel& m, double eps_sign = kEpsSign);

}  // namespace qwalk
