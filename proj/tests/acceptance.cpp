// Copyright 2021 Google LLC
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Prints one PASS/FAIL line per acceptance criterion. Usage: acceptance [seed] [criterion...]

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "mesc/selftest.hpp"

int main(int argc, char** argv) {
  std::uint64_t seed = 1;
  std::vector<int> ids;
  if (argc > 1) seed = std::strtoull(argv[1], nullptr, 10);
  for (int i = 2; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
  if (ids.empty())
    for (int i = 1; i <= mesc::selftest::kCriteria; ++i) ids.push_back(i);
  const char* env = std::getenv("MESC_DATA");
  const std::string data_dir = env && *env ? env : MESC_DATA_DIR;

  int failed = 0;
  for (int id : ids) {
    const auto r = mesc::selftest::run_criterion(id, seed, data_dir);
    std::cout << "criterion " << id << ": " << (r.pass ? "PASS" : "FAIL") << "  [" << r.name << ", " << r.seconds
              << " s / limit " << r.limit_seconds << " s]" << (r.detail.empty() ? "" : " " + r.detail) << "\n"
              << "    " << r.metrics.dump() << "\n"
              << std::flush;
    failed += !r.pass;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << "\n";
  return failed ? 1 : 0;
}
