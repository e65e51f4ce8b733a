#include "qwalk/model.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "qwalk/numeric.hpp"

namespace qwalk {

const char* role_name(Role r) {
  switch (r) {
    case Role::Interior: return "mu";
    case Role::HBoundary: return "mu1";
    case Role::VBoundary: return "mu2";
    case Role::Origin: return "mu0";
  }
  return "?";
}

namespace {

using Kind = ModelError::Kind;

void check_support(Role role, int dx, int dy) {
  bool ok = true;
  switch (role) {
    case Role::Interior: ok = dx >= -1 && dy >= -1; break;
    case Role::HBoundary: ok = dx >= -1 && dy >= 0; break;
    case Role::VBoundary: ok = dx >= 0 && dy >= -1; break;
    case Role::Origin: ok = dx >= 0 && dy >= 0; break;
  }
  if (!ok)
    throw ModelError(Kind::MalformedMeasure,
                     fmt::format("{}: offset ({},{}) violates the support bounds of the role",
                                 role_name(role), dx, dy));
}

// falling factorial n (n-1) ... (n-k+1)
long long falling(int n, int k) {
  long long r = 1;
  for (int i = 0; i < k; ++i) r *= (n - i);
  return r;
}

long long ipow_int(int b, int e) {
  long long r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

Role transposed_role(Role r) {
  if (r == Role::HBoundary) return Role::VBoundary;
  if (r == Role::VBoundary) return Role::HBoundary;
  return r;
}

}  // namespace

JumpMeasure::JumpMeasure(Role role, std::vector<Jump> entries) : role_(role) {
  std::sort(entries.begin(), entries.end(), [](const Jump& a, const Jump& b) {
    return a.dx != b.dx ? a.dx < b.dx : a.dy < b.dy;
  });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Jump& e = entries[i];
    if (!(e.mass >= 0.0) || !std::isfinite(e.mass))
      throw ModelError(Kind::MalformedMeasure,
                       fmt::format("{}: negative or non-finite mass at ({},{})", role_name(role),
                                   e.dx, e.dy));
    if (i > 0 && entries[i - 1].dx == e.dx && entries[i - 1].dy == e.dy)
      throw ModelError(Kind::MalformedMeasure,
                       fmt::format("{}: duplicate offset ({},{})", role_name(role), e.dx, e.dy));
    check_support(role, e.dx, e.dy);
    if (e.mass > 0.0) entries_.push_back(e);
  }
  if (total() > 1.0 + kMassTol)
    throw ModelError(Kind::MalformedMeasure,
                     fmt::format("{}: total mass {} exceeds 1", role_name(role), fmt_full(total())));
}

double JumpMeasure::total() const {
  std::vector<double> t;
  for (const auto& e : entries_) t.push_back(e.mass);
  return exact_sum(t);
}

double JumpMeasure::mass(int dx, int dy) const {
  for (const auto& e : entries_)
    if (e.dx == dx && e.dy == dy) return e.mass;
  return 0.0;
}

int JumpMeasure::max_abs_jump() const {
  int r = 0;
  for (const auto& e : entries_) r = std::max({r, std::abs(e.dx), std::abs(e.dy)});
  return r;
}

double JumpMeasure::gf(double x, double y) const { return gf_d(0, 0, x, y); }

double JumpMeasure::gf_d(int ax, int ay, double x, double y) const {
  ExactSum acc;
  for (const auto& e : entries_) {
    long long c = falling(e.dx, ax) * falling(e.dy, ay);
    if (c == 0) continue;
    double p = ipow(x, e.dx - ax) * ipow(y, e.dy - ay);
    acc.add(e.mass * static_cast<double>(c) * p);
  }
  return acc.value();
}

double JumpMeasure::moment(int px, int py, double x, double y) const {
  ExactSum acc;
  for (const auto& e : entries_) {
    long long c = ipow_int(e.dx, px) * ipow_int(e.dy, py);
    if (c == 0) continue;
    double p = ipow(x, e.dx) * ipow(y, e.dy);
    acc.add(e.mass * static_cast<double>(c) * p);
  }
  return acc.value();
}

JumpMeasure JumpMeasure::transposed() const {
  std::vector<Jump> t;
  for (const auto& e : entries_) t.push_back({e.dy, e.dx, e.mass});
  return JumpMeasure(transposed_role(role_), std::move(t));
}

bool JumpMeasure::operator==(const JumpMeasure& o) const {
  if (role_ != o.role_ || entries_.size() != o.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto &a = entries_[i], &b = o.entries_[i];
    if (a.dx != b.dx || a.dy != b.dy || a.mass != b.mass) return false;
  }
  return true;
}

const JumpMeasure& WalkModel::measure_at(int k1, int k2) const {
  if (k1 == 0 && k2 == 0) return mu0;
  if (k2 == 0) return mu1;
  if (k1 == 0) return mu2;
  return mu;
}

WalkModel WalkModel::transposed() const {
  WalkModel t;
  t.mu = mu.transposed();
  t.mu0 = mu0.transposed();
  t.mu1 = mu2.transposed();
  t.mu2 = mu1.transposed();
  t.validated = validated;
  t.name = name.empty() ? std::string() : name + "^T";
  return t;
}

WalkModel parse_model(std::istream& in, const std::string& name) {
  std::map<std::string, std::vector<Jump>> sections;
  std::set<std::string> seen;
  std::string current;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    line = line.substr(first, line.find_last_not_of(" \t\r") - first + 1);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ModelError(Kind::MalformedMeasure, fmt::format("line {}: bad section header", lineno));
      current = line.substr(1, line.size() - 2);
      if (current != "mu" && current != "mu0" && current != "mu1" && current != "mu2")
        throw ModelError(Kind::MalformedMeasure,
                         fmt::format("line {}: unknown section [{}]", lineno, current));
      if (!seen.insert(current).second)
        throw ModelError(Kind::MalformedMeasure,
                         fmt::format("line {}: repeated section [{}]", lineno, current));
      continue;
    }
    if (current.empty())
      throw ModelError(Kind::MalformedMeasure, fmt::format("line {}: entry outside a section", lineno));
    std::istringstream ls(line);
    long dx = 0, dy = 0;
    std::string mass_text, extra;
    if (!(ls >> dx >> dy >> mass_text) || (ls >> extra))
      throw ModelError(Kind::MalformedMeasure,
                       fmt::format("line {}: expected 'dx dy mass'", lineno));
    char* end = nullptr;
    double mass = std::strtod(mass_text.c_str(), &end);
    if (end == mass_text.c_str() || *end != '\0')
      throw ModelError(Kind::MalformedMeasure,
                       fmt::format("line {}: bad mass literal '{}'", lineno, mass_text));
    if (std::abs(dx) > 1000 || std::abs(dy) > 1000)
      throw ModelError(Kind::MalformedMeasure, fmt::format("line {}: offset too large", lineno));
    sections[current].push_back({static_cast<int>(dx), static_cast<int>(dy), mass});
  }
  for (const char* s : {"mu", "mu0", "mu1", "mu2"})
    if (!seen.count(s))
      throw ModelError(Kind::MalformedMeasure, fmt::format("missing section [{}]", s));
  WalkModel m;
  m.mu = JumpMeasure(Role::Interior, sections["mu"]);
  m.mu0 = JumpMeasure(Role::Origin, sections["mu0"]);
  m.mu1 = JumpMeasure(Role::HBoundary, sections["mu1"]);
  m.mu2 = JumpMeasure(Role::VBoundary, sections["mu2"]);
  m.name = name;
  return m;
}

WalkModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(Kind::Io, "cannot open model file " + path);
  std::string name = path;
  auto slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  auto dot = name.find_last_of('.');
  if (dot != std::string::npos) name = name.substr(0, dot);
  return parse_model(in, name);
}

std::string format_model(const WalkModel& m) {
  std::string out;
  auto section = [&](const char* title, const JumpMeasure& jm) {
    out += fmt::format("[{}]\n", title);
    for (const auto& e : jm.entries()) out += fmt::format("{} {} {}\n", e.dx, e.dy, fmt_full(e.mass));
  };
  section("mu", m.mu);
  section("mu0", m.mu0);
  section("mu1", m.mu1);
  section("mu2", m.mu2);
  return out;
}

bool ValidationReport::all_passed() const {
  return std::all_of(items.begin(), items.end(), [](const auto& i) { return i.passed; });
}

namespace {

struct Pt {
  int x, y;
  bool operator<(const Pt& o) const { return x != o.x ? x < o.x : y < o.y; }
};

// Lattice index of the group generated by the support: gcd of all 2x2 minors.
long long lattice_index(const JumpMeasure& mu) {
  long long g = 0;
  const auto& e = mu.entries();
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t j = i + 1; j < e.size(); ++j)
      g = std::gcd(g, std::llabs(static_cast<long long>(e[i].dx) * e[j].dy -
                                 static_cast<long long>(e[i].dy) * e[j].dx));
  return g;
}

// min over (alpha, beta) of max(f1, f2) for log-convex f1, f2 by nested golden section
template <class F>
double min_log_convex(F f) {
  auto inner = [&](double a) {
    double b = golden_min([&](double bb) { return f(a, bb); }, -20.0, 20.0, 1e-10);
    return f(a, b);
  };
  double a = golden_min(inner, -20.0, 20.0, 1e-10);
  return inner(a);
}

}  // namespace

ValidationReport validate_model(WalkModel& m) {
  ValidationReport rep;
  auto add = [&](std::string name, bool ok, std::string witness) {
    rep.items.push_back({std::move(name), ok, std::move(witness)});
  };

  for (const JumpMeasure* jm : {&m.mu, &m.mu0, &m.mu1, &m.mu2})
    add(fmt::format("{} total mass <= 1", role_name(jm->role())), jm->total() <= 1.0 + kMassTol,
        fmt::format("total = {}", fmt_full(jm->total())));

  bool h_up = std::any_of(m.mu1.entries().begin(), m.mu1.entries().end(),
                          [](const Jump& e) { return e.dy > 0; });
  bool v_right = std::any_of(m.mu2.entries().begin(), m.mu2.entries().end(),
                             [](const Jump& e) { return e.dx > 0; });
  add("mu1 has an upward jump", h_up, h_up ? "" : "no entry with dy > 0");
  add("mu2 has a rightward jump", v_right, v_right ? "" : "no entry with dx > 0");

  int J = std::max({m.mu.max_abs_jump(), m.mu0.max_abs_jump(), m.mu1.max_abs_jump(),
                    m.mu2.max_abs_jump(), 1});
  int R = 2 * J * 8;
  rep.bfs_radius = R;

  // irreducibility of the mu-walk on Z^2
  long long idx = lattice_index(m.mu);
  bool reached_all = false;
  std::string irr_witness;
  if (idx != 1) {
    irr_witness = idx == 0 ? "support spans a sublattice of rank < 2"
                           : fmt::format("support generates a sublattice of index {}", idx);
  } else {
    std::set<Pt> seen{{0, 0}};
    std::deque<Pt> q{{0, 0}};
    while (!q.empty()) {
      Pt p = q.front();
      q.pop_front();
      for (const auto& e : m.mu.entries()) {
        Pt n{p.x + e.dx, p.y + e.dy};
        if (std::abs(n.x) > R || std::abs(n.y) > R) continue;
        if (seen.insert(n).second) q.push_back(n);
      }
    }
    std::vector<Pt> need{{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    reached_all = std::all_of(need.begin(), need.end(), [&](Pt p) { return seen.count(p) > 0; });
    for (Pt p : need)
      if (!seen.count(p)) {
        irr_witness = fmt::format("({},{}) not reachable within radius {}", p.x, p.y, R);
        break;
      }
    if (reached_all) irr_witness = fmt::format("unit steps reachable within radius {}", R);
  }
  add("mu-walk irreducible on Z^2", idx == 1 && reached_all, irr_witness);

  double minP = min_log_convex(
      [&](double a, double b) { return m.mu.gf(std::exp(a), std::exp(b)); });
  add("D has non-empty interior", minP < 1.0 - 1e-12, fmt::format("min P = {}", fmt_full(minP)));

  double min1 = min_log_convex([&](double a, double b) {
    double x = std::exp(a), y = std::exp(b);
    return std::max(m.mu.gf(x, y), m.mu1.gf(x, y));
  });
  double min2 = min_log_convex([&](double a, double b) {
    double x = std::exp(a), y = std::exp(b);
    return std::max(m.mu.gf(x, y), m.mu2.gf(x, y));
  });
  add("D and D1 have a common interior point", min1 < 1.0 - 1e-12,
      fmt::format("min max(P, phi1) = {}", fmt_full(min1)));
  add("D and D2 have a common interior point", min2 < 1.0 - 1e-12,
      fmt::format("min max(P, phi2) = {}", fmt_full(min2)));

  // irreducibility of the full chain on the quadrant, box-relative
  {
    int B = R;
    auto inside = [&](Pt p) { return p.x >= 0 && p.y >= 0 && p.x <= B && p.y <= B; };
    auto succ = [&](Pt p, auto&& fn) {
      for (const auto& e : m.measure_at(p.x, p.y).entries()) {
        Pt n{p.x + e.dx, p.y + e.dy};
        if (inside(n)) fn(n);
      }
    };
    std::set<Pt> fwd{{0, 0}};
    std::deque<Pt> q{{0, 0}};
    while (!q.empty()) {
      Pt p = q.front();
      q.pop_front();
      succ(p, [&](Pt n) {
        if (fwd.insert(n).second) q.push_back(n);
      });
    }
    // reverse graph
    std::map<Pt, std::vector<Pt>> pred;
    for (int x = 0; x <= B; ++x)
      for (int y = 0; y <= B; ++y) succ({x, y}, [&](Pt n) { pred[n].push_back({x, y}); });
    std::set<Pt> bwd{{0, 0}};
    q.push_back({0, 0});
    while (!q.empty()) {
      Pt p = q.front();
      q.pop_front();
      for (Pt n : pred[p])
        if (bwd.insert(n).second) q.push_back(n);
    }
    std::string witness = fmt::format("box [0,{}]^2 checked on [0,{}]^2", B, B / 2);
    bool ok = true;
    for (int x = 0; x <= B / 2 && ok; ++x)
      for (int y = 0; y <= B / 2 && ok; ++y) {
        if (!fwd.count({x, y})) {
          ok = false;
          witness = fmt::format("({},{}) not reachable from the origin", x, y);
        } else if (!bwd.count({x, y})) {
          ok = false;
          witness = fmt::format("origin not reachable from ({},{})", x, y);
        }
      }
    add("chain irreducible on the quadrant", ok, witness);
  }

  m.validated = rep.all_passed();
  return rep;
}

void require_valid(WalkModel& m) {
  if (m.validated) return;
  auto rep = validate_model(m);
  for (const auto& it : rep.items)
    if (!it.passed)
      throw ModelError(Kind::AssumptionViolated, it.name + " failed: " + it.witness);
}

double eval_gf(const JumpMeasure& m, double x, double y) { return m.gf(x, y); }

namespace {

// sum mass * x^(dx+sx) * y^(dy+sy) with nonnegative exponents; legal at 0
double cleared(const JumpMeasure& jm, int sx, int sy, double x, double y) {
  ExactSum acc;
  for (const auto& e : jm.entries()) acc.add(e.mass * (ipow(x, e.dx + sx) * ipow(y, e.dy + sy)));
  return acc.value();
}

}  // namespace

double eval_Q(const WalkModel& m, double x, double y) {
  ExactSum acc;
  acc.add(x * y);
  acc.add(-cleared(m.mu, 1, 1, x, y));
  return acc.value();
}

double eval_psi1(const WalkModel& m, double x, double y) {
  ExactSum acc;
  acc.add(x);
  acc.add(-cleared(m.mu1, 1, 0, x, y));
  return acc.value();
}

double eval_psi2(const WalkModel& m, double x, double y) {
  ExactSum acc;
  acc.add(y);
  acc.add(-cleared(m.mu2, 0, 1, x, y));
  return acc.value();
}

double eval_L(const WalkModel& m, int j1, int j2, double x, double y, double hit_prob) {
  if (j1 == 0 && j2 == 0) return m.mu0.gf(x, y) - hit_prob;
  return ipow(x, j1) * ipow(y, j2) - hit_prob;
}

DriftData drift(const WalkModel& m) {
  DriftData d;
  d.M = {m.mu.moment(1, 0, 1, 1), m.mu.moment(0, 1, 1, 1)};
  d.M1vec = {m.mu1.moment(1, 0, 1, 1), m.mu1.moment(0, 1, 1, 1)};
  d.M2vec = {m.mu2.moment(1, 0, 1, 1), m.mu2.moment(0, 1, 1, 1)};
  return d;
}

const char* recurrence_name(Recurrence r) {
  switch (r) {
    case Recurrence::R0: return "R0";
    case Recurrence::R1: return "R1";
    case Recurrence::R2: return "R2";
    case Recurrence::T0: return "T0";
    case Recurrence::T1: return "T1";
    case Recurrence::T2: return "T2";
    case Recurrence::Indeterminate: return "Indeterminate";
  }
  return "?";
}

bool is_stochastic(const JumpMeasure& m) { return std::fabs(m.total() - 1.0) <= kMassTol; }

namespace {

double abs_moment(const JumpMeasure& jm, bool first) {
  ExactSum acc;
  for (const auto& e : jm.entries()) acc.add(e.mass * std::abs(first ? e.dx : e.dy));
  return acc.value();
}

}  // namespace

RecurrenceClass classify_recurrence(const WalkModel& m, double eps) {
  for (const JumpMeasure* jm : {&m.mu, &m.mu0, &m.mu1, &m.mu2})
    if (!is_stochastic(*jm))
      throw ModelError(Kind::NonStochasticBoundary,
                       fmt::format("{} is not stochastic (total {})", role_name(jm->role()),
                                   fmt_full(jm->total())));
  DriftData d = drift(m);
  double s1 = abs_moment(m.mu, true), s2 = abs_moment(m.mu, false);
  double s11 = abs_moment(m.mu1, true), s12 = abs_moment(m.mu1, false);
  double s21 = abs_moment(m.mu2, true), s22 = abs_moment(m.mu2, false);

  // -1, 0, +1 with a relative zero band
  auto sgn = [eps](double q, double scale) { return std::fabs(q) <= eps * scale ? 0 : (q > 0 ? 1 : -1); };
  ExactSum a1, a2;
  a1.add(d.M[0] * d.M1vec[1]);
  a1.add(-d.M[1] * d.M1vec[0]);
  a2.add(d.M[1] * d.M2vec[0]);
  a2.add(-d.M[0] * d.M2vec[1]);
  int m1 = sgn(d.M[0], s1), m2 = sgn(d.M[1], s2);
  int D1 = sgn(a1.value(), s1 * s12 + s2 * s11);
  int D2 = sgn(a2.value(), s2 * s21 + s1 * s22);

  RecurrenceClass rc;
  auto warn = [&](const std::string& w) { rc.warnings.push_back(w); };
  if (m1 == 0) warn("M1 is zero within tolerance");
  if (m2 == 0) warn("M2 is zero within tolerance");
  if (D1 == 0) warn("M1*M1_2 - M2*M1_1 is zero within tolerance");
  if (D2 == 0) warn("M2*M2_1 - M1*M2_2 is zero within tolerance");

  using R = Recurrence;
  if (m1 > 0 && m2 > 0) {
    rc.label = R::T0;
  } else if (m1 < 0 && m2 < 0) {
    if (D1 == 0 || D2 == 0)
      rc.label = R::Indeterminate;
    else if (D1 < 0 && D2 < 0)
      rc.label = R::R0;
    else if (D1 > 0) {
      rc.label = R::T1;
      rc.also_T2 = D2 > 0;
    } else
      rc.label = R::T2;
  } else if (m2 < 0 && m1 >= 0) {
    rc.label = D1 < 0 ? R::R1 : D1 > 0 ? R::T1 : R::Indeterminate;
  } else if (m1 < 0 && m2 >= 0) {
    rc.label = D2 < 0 ? R::R2 : D2 > 0 ? R::T2 : R::Indeterminate;
  } else {
    rc.label = R::Indeterminate;
  }
  return rc;
}

}  // namespace qwalk
