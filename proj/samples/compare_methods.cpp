// Copyright 2026 The compgrad Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// Runs DCGD, DIANA and ADIANA with random dithering on a small synthetic
// logistic regression problem split over four nodes and prints the final
// optimality gap of each.

#include <cstdio>

#include "compgrad/compgrad.hpp"

int main() {
  using namespace compgrad;

  const DatasetProfile profile{"demo", 800, 24, 6};
  const SparseDataset data = make_synthetic(profile, 7);
  const Partition part = partition(data, 4, PartitionScheme::shuffled, 7);
  const Objective obj = make_logistic_objective(data, part, 1e-2);
  const Compressor comp = Compressor::dithering(obj.dimension(), Compressor::default_s(obj.dimension()));

  std::printf("L = %.6g  mu = %.6g  omega = %.6g  bits/message = %.6g\n", obj.L(), obj.mu(),
              omega(comp), bit_cost(comp));

  const ReferenceSolution ref = solve_reference(obj);
  std::printf("f* = %.12g (%s, %llu iterations)\n", ref.f_star, ref.solver.c_str(),
              static_cast<unsigned long long>(ref.iterations));

  for (Method m : {Method::dcgd, Method::diana, Method::adiana}) {
    RunOptions opts;
    opts.method = m;
    opts.master_seed = 1;
    opts.max_bits = 2e6;
    const RunResult r = run_on(obj, comp, opts, ref);
    std::printf("%-7s iterations %6llu  bits/node %10.4g  f_gap %.3e\n", to_string(m),
                static_cast<unsigned long long>(r.iterations), r.trace.back().cumulative_bits,
                r.trace.back().f_gap);
  }
  return 0;
}
