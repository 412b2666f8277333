#include <fstream>
#include <map>
#include <sstream>

#include "acuc/io.hpp"
#include "json.hpp"

namespace acuc {

using nlohmann::json;

namespace {

double num_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number())
    throw ParseError(where + ": missing or non-numeric field '" + key + "'");
  return j[key].get<double>();
}

std::string str_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string())
    throw ParseError(where + ": missing or non-string field '" + key + "'");
  return j[key].get<std::string>();
}

int bus_index(const std::map<std::string, int>& ids, const std::string& id,
              const std::string& where) {
  auto it = ids.find(id);
  if (it == ids.end()) throw ParseError(where + ": unknown bus '" + id + "'");
  return it->second;
}

json blocks_to_json(const std::vector<std::vector<CostBlock>>& blocks) {
  json per_t = json::array();
  for (const auto& bt : blocks) {
    json arr = json::array();
    for (const CostBlock& b : bt)
      arr.push_back({{"size", b.size}, {"marginal", b.marginal}});
    per_t.push_back(arr);
  }
  return per_t;
}

}  // namespace

Case case_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("case file: ") + e.what());
  }
  Case cs;
  cs.id = j.value("id", "case");
  const json& tg = j.at("time_grid");
  cs.time.durations = tg.at("durations").get<std::vector<double>>();
  cs.time.t0 = tg.value("t0", 0.0);
  cs.time.tf = tg.value("tf", 600.0);
  const int T = cs.time.periods();

  std::map<std::string, int> bus_ids;
  for (const json& jb : j.at("buses")) {
    Bus b;
    b.id = str_field(jb, "id", "bus");
    b.v_min = num_field(jb, "v_min", "bus " + b.id);
    b.v_max = num_field(jb, "v_max", "bus " + b.id);
    b.reference = jb.value("reference", false);
    bus_ids[b.id] = static_cast<int>(cs.buses.size());
    cs.buses.push_back(b);
  }
  for (const json& jb : j.value("branches", json::array())) {
    Branch br;
    br.id = str_field(jb, "id", "branch");
    const std::string where = "branch " + br.id;
    br.from = bus_index(bus_ids, str_field(jb, "from", where), where);
    br.to = bus_index(bus_ids, str_field(jb, "to", where), where);
    br.g_sr = num_field(jb, "g_sr", where);
    br.b_sr = num_field(jb, "b_sr", where);
    br.b_ch = jb.value("b_ch", 0.0);
    br.tau_min = jb.value("tau_min", 1.0);
    br.tau_max = jb.value("tau_max", 1.0);
    br.phi_min = jb.value("phi_min", 0.0);
    br.phi_max = jb.value("phi_max", 0.0);
    br.s_max = num_field(jb, "s_max", where);
    br.s_max_ctg = jb.value("s_max_ctg", br.s_max);
    br.x = num_field(jb, "x", where);
    cs.branches.push_back(br);
  }
  for (const json& jd : j.value("dc_lines", json::array())) {
    DcLine dc;
    dc.id = str_field(jd, "id", "dc_line");
    const std::string where = "dc line " + dc.id;
    dc.from = bus_index(bus_ids, str_field(jd, "from", where), where);
    dc.to = bus_index(bus_ids, str_field(jd, "to", where), where);
    dc.p_max = num_field(jd, "p_max", where);
    dc.q_fr_min = jd.value("q_fr_min", 0.0);
    dc.q_fr_max = jd.value("q_fr_max", 0.0);
    dc.q_to_min = jd.value("q_to_min", 0.0);
    dc.q_to_max = jd.value("q_to_max", 0.0);
    cs.dc_lines.push_back(dc);
  }
  for (const json& js : j.value("shunts", json::array())) {
    Shunt sh;
    sh.id = str_field(js, "id", "shunt");
    sh.bus = bus_index(bus_ids, str_field(js, "bus", "shunt " + sh.id),
                       "shunt " + sh.id);
    sh.steps = js.value("steps", 0);
    sh.g_step = js.value("g_step", 0.0);
    sh.b_step = js.value("b_step", 0.0);
    cs.shunts.push_back(sh);
  }
  std::map<std::string, int> dev_ids;
  for (const json& jd : j.at("devices")) {
    Device d;
    d.id = str_field(jd, "id", "device");
    const std::string where = "device " + d.id;
    std::string kind = str_field(jd, "kind", where);
    if (kind == "producer")
      d.kind = DeviceKind::producer;
    else if (kind == "consumer")
      d.kind = DeviceKind::consumer;
    else
      throw ParseError(where + ": kind must be producer|consumer");
    d.bus = bus_index(bus_ids, str_field(jd, "bus", where), where);
    const json& jblocks = jd.at("blocks");
    if (!jblocks.is_array() || static_cast<int>(jblocks.size()) != T)
      throw ParseError(where + ": blocks must hold one list per period");
    for (const json& bt : jblocks) {
      std::vector<CostBlock> list;
      for (const json& bb : bt)
        list.push_back({num_field(bb, "size", where), num_field(bb, "marginal", where)});
      d.blocks.push_back(std::move(list));
    }
    d.p_min = num_field(jd, "p_min", where);
    d.p_max = num_field(jd, "p_max", where);
    d.q_min = num_field(jd, "q_min", where);
    d.q_max = num_field(jd, "q_max", where);
    d.ramp_up = num_field(jd, "ramp_up", where);
    d.ramp_down = num_field(jd, "ramp_down", where);
    d.cost_su = jd.value("cost_su", 0.0);
    d.cost_sd = jd.value("cost_sd", 0.0);
    d.cost_on = jd.value("cost_on", 0.0);
    d.min_up = jd.value("min_up", 1);
    d.min_down = jd.value("min_down", 1);
    if (jd.contains("reserve_cost"))
      for (int r = 0; r < kNumReserveProducts; ++r)
        d.reserve_cost[r] = jd["reserve_cost"].value(kReserveNames[r], 0.0);
    d.u0 = jd.value("u0", 0);
    d.p0 = jd.value("p0", 0.0);
    dev_ids[d.id] = static_cast<int>(cs.devices.size());
    cs.devices.push_back(std::move(d));
  }
  for (const json& jz : j.value("zones", json::array())) {
    Zone z;
    z.id = str_field(jz, "id", "zone");
    std::string kind = jz.value("kind", "p");
    z.is_q = (kind == "q");
    for (const json& m : jz.value("members", json::array())) {
      auto it = dev_ids.find(m.get<std::string>());
      if (it == dev_ids.end())
        throw ParseError("zone " + z.id + ": unknown device '" +
                         m.get<std::string>() + "'");
      z.members.push_back(it->second);
    }
    if (jz.contains("requirement"))
      for (int r = 0; r < kNumReserveProducts; ++r)
        if (jz["requirement"].contains(kReserveNames[r]))
          z.requirement[r] =
              jz["requirement"][kReserveNames[r]].get<std::vector<double>>();
    if (jz.contains("penalty"))
      for (int r = 0; r < kNumReserveProducts; ++r)
        z.penalty[r] = jz["penalty"].value(kReserveNames[r], 0.0);
    cs.zones.push_back(std::move(z));
  }
  std::map<std::string, int> branch_ids;
  for (size_t i = 0; i < cs.branches.size(); ++i)
    branch_ids[cs.branches[i].id] = static_cast<int>(i);
  for (const json& jk : j.value("contingencies", json::array())) {
    Contingency k;
    k.id = str_field(jk, "id", "contingency");
    std::string br = str_field(jk, "branch", "contingency " + k.id);
    auto it = branch_ids.find(br);
    if (it == branch_ids.end())
      throw ParseError("contingency " + k.id + ": unknown branch '" + br + "'");
    k.branch = it->second;
    cs.contingencies.push_back(k);
  }
  if (j.contains("penalties")) {
    cs.penalty.c_p = j["penalties"].value("c_p", cs.penalty.c_p);
    cs.penalty.c_q = j["penalties"].value("c_q", cs.penalty.c_q);
    cs.penalty.c_s = j["penalties"].value("c_s", cs.penalty.c_s);
  }
  cs.validate();
  return cs;
}

std::string case_to_json_text(const Case& cs) {
  json j;
  j["id"] = cs.id;
  j["time_grid"] = {{"durations", cs.time.durations},
                    {"t0", cs.time.t0},
                    {"tf", cs.time.tf}};
  j["buses"] = json::array();
  for (const Bus& b : cs.buses)
    j["buses"].push_back({{"id", b.id},
                          {"v_min", b.v_min},
                          {"v_max", b.v_max},
                          {"reference", b.reference}});
  j["branches"] = json::array();
  for (const Branch& br : cs.branches)
    j["branches"].push_back({{"id", br.id},
                             {"from", cs.buses[br.from].id},
                             {"to", cs.buses[br.to].id},
                             {"g_sr", br.g_sr},
                             {"b_sr", br.b_sr},
                             {"b_ch", br.b_ch},
                             {"tau_min", br.tau_min},
                             {"tau_max", br.tau_max},
                             {"phi_min", br.phi_min},
                             {"phi_max", br.phi_max},
                             {"s_max", br.s_max},
                             {"s_max_ctg", br.s_max_ctg},
                             {"x", br.x}});
  j["dc_lines"] = json::array();
  for (const DcLine& dc : cs.dc_lines)
    j["dc_lines"].push_back({{"id", dc.id},
                             {"from", cs.buses[dc.from].id},
                             {"to", cs.buses[dc.to].id},
                             {"p_max", dc.p_max},
                             {"q_fr_min", dc.q_fr_min},
                             {"q_fr_max", dc.q_fr_max},
                             {"q_to_min", dc.q_to_min},
                             {"q_to_max", dc.q_to_max}});
  j["shunts"] = json::array();
  for (const Shunt& sh : cs.shunts)
    j["shunts"].push_back({{"id", sh.id},
                           {"bus", cs.buses[sh.bus].id},
                           {"steps", sh.steps},
                           {"g_step", sh.g_step},
                           {"b_step", sh.b_step}});
  j["devices"] = json::array();
  for (const Device& d : cs.devices) {
    json jr;
    for (int r = 0; r < kNumReserveProducts; ++r)
      jr[kReserveNames[r]] = d.reserve_cost[r];
    j["devices"].push_back(
        {{"id", d.id},
         {"kind", d.kind == DeviceKind::producer ? "producer" : "consumer"},
         {"bus", cs.buses[d.bus].id},
         {"blocks", blocks_to_json(d.blocks)},
         {"p_min", d.p_min},
         {"p_max", d.p_max},
         {"q_min", d.q_min},
         {"q_max", d.q_max},
         {"ramp_up", d.ramp_up},
         {"ramp_down", d.ramp_down},
         {"cost_su", d.cost_su},
         {"cost_sd", d.cost_sd},
         {"cost_on", d.cost_on},
         {"min_up", d.min_up},
         {"min_down", d.min_down},
         {"reserve_cost", jr},
         {"u0", d.u0},
         {"p0", d.p0}});
  }
  j["zones"] = json::array();
  for (const Zone& z : cs.zones) {
    json jreq, jpen;
    for (int r = 0; r < kNumReserveProducts; ++r) {
      if (!z.requirement[r].empty()) jreq[kReserveNames[r]] = z.requirement[r];
      if (z.penalty[r] != 0.0) jpen[kReserveNames[r]] = z.penalty[r];
    }
    json members = json::array();
    for (int m : z.members) members.push_back(cs.devices[m].id);
    j["zones"].push_back({{"id", z.id},
                          {"kind", z.is_q ? "q" : "p"},
                          {"members", members},
                          {"requirement", jreq},
                          {"penalty", jpen}});
  }
  j["contingencies"] = json::array();
  for (const Contingency& k : cs.contingencies)
    j["contingencies"].push_back(
        {{"id", k.id}, {"branch", cs.branches[k.branch].id}});
  j["penalties"] = {{"c_p", cs.penalty.c_p},
                    {"c_q", cs.penalty.c_q},
                    {"c_s", cs.penalty.c_s}};
  return j.dump(2) + "\n";
}

Case load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return case_from_json_text(ss.str());
}

void save_case(const Case& cs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write case file: " + path);
  out << case_to_json_text(cs);
}

std::string solution_to_json_text(const Case& cs, const Solution& sol) {
  const StateLayout& ly = sol.layout;
  json j;
  j["case"] = cs.id;
  j["T"] = ly.T;
  for (int f = 0; f < kNumVarFamilies; ++f) {
    json per_t = json::array();
    for (int t = 0; t < ly.T; ++t) {
      json arr = json::array();
      for (int i = 0; i < ly.count[f]; ++i)
        arr.push_back(sol.x[ly.at(static_cast<VarFamily>(f), t, i)]);
      per_t.push_back(arr);
    }
    j[kVarFamilyNames[f]] = per_t;
  }
  return j.dump(2) + "\n";
}

Solution solution_from_json_text(const Case& cs, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("solution file: ") + e.what());
  }
  Solution sol;
  sol.layout = StateLayout::build(cs);
  sol.x.assign(sol.layout.total, 0.0);
  if (j.value("T", sol.layout.T) != sol.layout.T)
    throw ParseError("solution file: period count does not match case");
  for (int f = 0; f < kNumVarFamilies; ++f) {
    const char* name = kVarFamilyNames[f];
    if (!j.contains(name))
      throw ParseError(std::string("solution file: missing family '") + name +
                       "'");
    const json& per_t = j[name];
    if (static_cast<int>(per_t.size()) != sol.layout.T)
      throw ParseError(std::string("solution file: family '") + name +
                       "' has wrong period count");
    for (int t = 0; t < sol.layout.T; ++t) {
      const json& arr = per_t[t];
      if (static_cast<int>(arr.size()) != sol.layout.count[f])
        throw ParseError(std::string("solution file: family '") + name +
                         "' has wrong entity count");
      for (int i = 0; i < sol.layout.count[f]; ++i)
        sol.x[sol.layout.at(static_cast<VarFamily>(f), t, i)] =
            arr[i].get<double>();
    }
  }
  return sol;
}

Solution load_solution(const Case& cs, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open solution file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return solution_from_json_text(cs, ss.str());
}

void save_solution(const Case& cs, const Solution& sol, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write solution file: " + path);
  out << solution_to_json_text(cs, sol);
}

}  // namespace acuc
