#pragma once

#include "acuc/case.hpp"
#include "acuc/io.hpp"

namespace acuc {

Case generate_synthetic_case(int n_bus, int T, std::uint64_t seed);

// The generator dispatches a balanced all-on trajectory while sizing ramp
// rates and flow limits, so every case it emits admits at least one solution
// with zero hard violations. Tests can ask for that witness.
struct GeneratedCase {
  Case cs;
  Solution witness;
};
GeneratedCase generate_synthetic_case_with_witness(int n_bus, int T,
                                                   std::uint64_t seed);

}  // namespace acuc
