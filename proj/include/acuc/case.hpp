#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "acuc/util.hpp"

namespace acuc {

struct TimeGrid {
  std::vector<double> durations;  // hours, one per period
  double t0 = 0.0;                // wall-clock budget window, seconds
  double tf = 600.0;

  int periods() const { return static_cast<int>(durations.size()); }
};

struct Bus {
  std::string id;
  double v_min = 0.9;
  double v_max = 1.1;
  bool reference = false;
};

// pi-model branch with from-side tap ratio and series phase shift. Plain
// lines carry degenerate tau/phi bounds (fixed 1 / 0).
struct Branch {
  std::string id;
  int from = -1;
  int to = -1;
  double g_sr = 0.0;   // series conductance, p.u.
  double b_sr = 0.0;   // series susceptance, p.u.
  double b_ch = 0.0;   // total charging susceptance, p.u.
  double tau_min = 1.0;
  double tau_max = 1.0;
  double phi_min = 0.0;
  double phi_max = 0.0;
  double s_max = 1.0;      // MVA flow limit, p.u.
  double s_max_ctg = 1.2;  // emergency rating, p.u.
  double x = 0.1;          // series reactance for the DC model, p.u.

  bool is_transformer() const {
    return tau_min != 1.0 || tau_max != 1.0 || phi_min != 0.0 || phi_max != 0.0;
  }
};

// Lossless dc line: one active-power basis variable p_fr (to-side is its
// negation), independent reactive support on both converter ends.
struct DcLine {
  std::string id;
  int from = -1;
  int to = -1;
  double p_max = 0.0;
  double q_fr_min = 0.0, q_fr_max = 0.0;
  double q_to_min = 0.0, q_to_max = 0.0;
};

struct Shunt {
  std::string id;
  int bus = -1;
  int steps = 0;        // integer step count; u_sh in [0, steps]
  double g_step = 0.0;  // additive conductance per step, p.u.
  double b_step = 0.0;  // additive susceptance per step, p.u.
};

enum class DeviceKind { producer, consumer };

struct CostBlock {
  double size = 0.0;      // p.u.
  double marginal = 0.0;  // $/p.u.-h
};

enum ReserveProduct {
  kRgu = 0,  // regulation up
  kRgd,      // regulation down
  kScr,      // synchronized
  kNsc,      // non-synchronized (offline)
  kRruOn,    // ramping up, online
  kRruOff,   // ramping up, offline
  kRrdOn,    // ramping down, online
  kRrdOff,   // ramping down, offline
  kQru,      // reactive up
  kQrd,      // reactive down
  kNumReserveProducts
};

extern const char* const kReserveNames[kNumReserveProducts];

struct Device {
  std::string id;
  DeviceKind kind = DeviceKind::producer;
  int bus = -1;
  // Cost (producer) or value (consumer) blocks, one list per period.
  // Producer marginals nondecreasing, consumer marginals nonincreasing.
  std::vector<std::vector<CostBlock>> blocks;
  double p_min = 0.0, p_max = 0.0;  // dispatch bounds while on, p.u.
  double q_min = 0.0, q_max = 0.0;
  double ramp_up = 0.0, ramp_down = 0.0;  // p.u. per period
  double cost_su = 0.0, cost_sd = 0.0, cost_on = 0.0;
  int min_up = 1, min_down = 1;  // periods
  std::array<double, kNumReserveProducts> reserve_cost{};
  int u0 = 0;       // initial on/off
  double p0 = 0.0;  // initial dispatched power
};

struct Zone {
  std::string id;
  bool is_q = false;  // q-zone covers qru/qrd, p-zone the other eight
  std::vector<int> members;  // device indices
  std::array<std::vector<double>, kNumReserveProducts> requirement;  // per t
  std::array<double, kNumReserveProducts> penalty{};                 // $/p.u.-h
};

struct Contingency {
  std::string id;
  int branch = -1;  // outaged branch index
};

struct PenaltyCosts {
  double c_p = 2000.0;  // $/p.u.-h per unit bus active imbalance
  double c_q = 2000.0;
  double c_s = 1500.0;  // $/p.u.-h per unit MVA overload
};

struct Case {
  std::string id;
  TimeGrid time;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<DcLine> dc_lines;
  std::vector<Shunt> shunts;
  std::vector<Device> devices;
  std::vector<Zone> zones;
  std::vector<Contingency> contingencies;
  PenaltyCosts penalty;

  int reference_bus() const;
  // Throws ValidationError naming the first violated invariant.
  void validate() const;
};

// ------------------------------------------------------------------
// Flat state: every basis family laid out as per-period vectors inside one
// contiguous array, with parallel bound and Adam moment buffers.

enum VarFamily {
  kV = 0,
  kTheta,
  kPhi,
  kTau,
  kPDcFr,
  kQDcFr,
  kQDcTo,
  kPOn,
  kQ,
  kResRgu,
  kResRgd,
  kResScr,
  kResNsc,
  kResRruOn,
  kResRruOff,
  kResRrdOn,
  kResRrdOff,
  kResQru,
  kResQrd,
  kUSh,
  kUOn,
  kNumVarFamilies
};

extern const char* const kVarFamilyNames[kNumVarFamilies];

inline VarFamily reserve_family(int product) {
  return static_cast<VarFamily>(kResRgu + product);
}

struct StateLayout {
  int T = 0;
  std::array<int, kNumVarFamilies> count{};    // entities per family
  std::array<int, kNumVarFamilies> offset{};   // start of family block
  int total = 0;                               // entries per full vector

  static StateLayout build(const Case& cs);

  // index of (family, t, entity)
  int at(VarFamily f, int t, int i) const {
    return offset[f] + t * count[f] + i;
  }
  int family_of(int flat_index) const;
};

struct FlatState {
  StateLayout layout;
  std::vector<double> x;       // values
  std::vector<double> lo, hi;  // bounding box
  std::vector<double> m, v;    // Adam first/second moments
  std::vector<std::uint8_t> frozen;
  std::int64_t iter = 0;       // Adam iteration counter

  double get(VarFamily f, int t, int i) const { return x[layout.at(f, t, i)]; }
  void set(VarFamily f, int t, int i, double val) { x[layout.at(f, t, i)] = val; }

  void clip_all();
  // Largest bound violation; 0 means the state is inside its box.
  double bounds_violation() const;
};

// Flat start: v=1 clipped, theta=0, tau=1 clipped, phi=0 clipped, u_on=u0,
// p_on=p0 clipped, reserves and shunt steps 0, moments 0.
FlatState init_state(const Case& cs);

// Case-derived bounding box for every basis entry (used by init_state and
// by checker-side bound audits).
void fill_bounds(const Case& cs, FlatState& st);

}  // namespace acuc
