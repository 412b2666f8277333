#include <functional>
#include <numeric>

#include "acuc/generator.hpp"
#include "acuc/io.hpp"
#include "doctest.h"

using namespace acuc;

namespace {

const char* kTinyCase = R"({
  "id": "tiny",
  "time_grid": {"durations": [1.0], "t0": 0.0, "tf": 60.0},
  "buses": [
    {"id": "b1", "v_min": 0.95, "v_max": 1.05, "reference": true},
    {"id": "b2", "v_min": 0.95, "v_max": 1.05}
  ],
  "branches": [
    {"id": "l1", "from": "b1", "to": "b2", "g_sr": 0.0, "b_sr": -10.0,
     "x": 0.1, "s_max": 2.0, "s_max_ctg": 2.5}
  ],
  "devices": [
    {"id": "g1", "kind": "producer", "bus": "b1",
     "blocks": [[{"size": 1.0, "marginal": 10.0}]],
     "p_min": 0.0, "p_max": 1.0, "q_min": -0.5, "q_max": 0.5,
     "ramp_up": 2.0, "ramp_down": 2.0, "u0": 1, "p0": 0.2}
  ],
  "penalties": {"c_p": 1000.0, "c_q": 1000.0, "c_s": 500.0}
})";

}  // namespace

TEST_CASE("minimal case parses and validates") {
  Case cs = case_from_json_text(kTinyCase);
  CHECK(cs.time.periods() == 1);
  CHECK(cs.buses.size() == 2);
  CHECK(cs.branches.size() == 1);
  CHECK(cs.devices.size() == 1);
  CHECK(cs.contingencies.empty());
  CHECK(cs.reference_bus() == 0);
}

TEST_CASE("two reference buses rejected") {
  std::string text = kTinyCase;
  auto pos = text.find("\"id\": \"b2\"");
  text.insert(pos + 10, ", \"reference\": true");
  CHECK_THROWS_WITH_AS(case_from_json_text(text),
                       doctest::Contains("multiple reference buses"),
                       ValidationError);
}

TEST_CASE("missing fields produce parse errors") {
  CHECK_THROWS_AS(case_from_json_text("{\"buses\": []}"), std::exception);
  CHECK_THROWS_AS(case_from_json_text("not json at all"), ParseError);
}

TEST_CASE("generated case round-trips bit-identically") {
  Case cs = generate_synthetic_case(14, 4, 42);
  std::string a = case_to_json_text(cs);
  Case reloaded = case_from_json_text(a);
  std::string b = case_to_json_text(reloaded);
  CHECK(a == b);
}

TEST_CASE("generator determinism") {
  std::string a = case_to_json_text(generate_synthetic_case(9, 3, 7));
  std::string b = case_to_json_text(generate_synthetic_case(9, 3, 7));
  CHECK(a == b);
  std::string c = case_to_json_text(generate_synthetic_case(9, 3, 8));
  CHECK(a != c);
}

TEST_CASE("generator minimal topology") {
  Case cs = generate_synthetic_case(2, 1, 0);
  CHECK(cs.branches.size() == 1);
  int producers = 0, consumers = 0;
  for (const Device& d : cs.devices)
    (d.kind == DeviceKind::producer ? producers : consumers)++;
  CHECK(producers >= 1);
  CHECK(consumers >= 1);
}

TEST_CASE("every generated contingency leaves the graph connected") {
  // union-find oracle, independent of the generator's internal check
  Case cs = generate_synthetic_case(30, 6, 7);
  CHECK(cs.contingencies.size() > 0);
  for (const Contingency& k : cs.contingencies) {
    std::vector<int> parent(cs.buses.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    for (size_t j = 0; j < cs.branches.size(); ++j) {
      if (int(j) == k.branch) continue;
      parent[find(cs.branches[j].from)] = find(cs.branches[j].to);
    }
    for (size_t i = 1; i < cs.buses.size(); ++i)
      CHECK(find(int(i)) == find(0));
  }
}

TEST_CASE("capacity margin of generated cases") {
  Case cs = generate_synthetic_case(14, 4, 3);
  for (int t = 0; t < cs.time.periods(); ++t) {
    double cap = 0.0, peak = 0.0;
    for (const Device& d : cs.devices) {
      if (d.kind == DeviceKind::producer)
        cap += d.p_max;
      else {
        double tot = 0.0;
        for (const CostBlock& b : d.blocks[t]) tot += b.size;
        peak += tot / 1.1;  // block capacity is 1.1x the demand profile
      }
    }
    CHECK(cap >= 1.2 * peak);
  }
}

TEST_CASE("init_state flat start") {
  Case cs = case_from_json_text(kTinyCase);
  FlatState st = init_state(cs);
  CHECK(st.get(kV, 0, 0) == 1.0);
  CHECK(st.get(kV, 0, 1) == 1.0);
  CHECK(st.get(kTheta, 0, 0) == 0.0);
  CHECK(st.get(kTheta, 0, 1) == 0.0);
  CHECK(st.get(kUOn, 0, 0) == 1.0);
  CHECK(st.get(kPOn, 0, 0) == doctest::Approx(0.2));
  CHECK(st.bounds_violation() == 0.0);
}

TEST_CASE("init_state clips initial power into the device box") {
  std::string text = kTinyCase;
  auto pos = text.find("\"p_min\": 0.0");
  text.replace(pos, 12, "\"p_min\": 0.5");
  pos = text.find("\"p0\": 0.2");
  text.replace(pos, 9, "\"p0\": 0.0");
  Case cs = case_from_json_text(text);
  FlatState st = init_state(cs);
  CHECK(st.get(kPOn, 0, 0) == doctest::Approx(0.5));
}

TEST_CASE("bounds audit on generated states") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Case cs = generate_synthetic_case(10, 3, seed);
    FlatState st = init_state(cs);
    CHECK(st.bounds_violation() == 0.0);
    CHECK(st.get(kTheta, 0, cs.reference_bus()) == 0.0);
  }
}

TEST_CASE("witness trajectory has zero hard violations via solution io") {
  GeneratedCase g = generate_synthetic_case_with_witness(12, 4, 11);
  std::string text = solution_to_json_text(g.cs, g.witness);
  Solution reload = solution_from_json_text(g.cs, text);
  CHECK(reload.x == g.witness.x);
}
