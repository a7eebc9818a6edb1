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

// Regenerates the bundled fixtures under data/. Usage: mesc_fixtures <data-dir>

#include <fstream>
#include <iostream>
#include <string>

#include "mesc/io.hpp"

using namespace mesc;

static void write(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ResourceError("cannot write " + path);
  f << text;
}

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: mesc_fixtures <data-dir>\n";
    return 1;
  }
  const std::string dir = argv[1];
  GaussianSampler s(7);

  // Demo game: one question each, a random rank-2 projector as winning operator.
  FullyQuantumGame game{GameDims{1, 1, 1, 2, 2}, Mat::Identity(1, 1), Mat()};
  auto e = eigh(random_hermitian(4, s, 100));
  Vec v = e.values.unaryExpr([](double x) { return x > 0 ? 1.0 : 0.0; });
  game.m_win = e.vectors * v.cast<cd>().asDiagonal() * e.vectors.adjoint();
  write(dir + "/demo_game.json", game_to_json(game).dump(2) + "\n");

  Strategy st{2, random_adjoint_choi({2, 2, 1}, {2}, s, 1), random_adjoint_choi({2, 2, 1}, {2}, s, 2)};
  json sj = strategy_to_json(st);
  sj["state"] = {{"kind", "depolarized_mes"}, {"m", 2}, {"eps", 0.25}};
  write(dir + "/demo_strategy.json", sj.dump(2) + "\n");

  // m_win = I: every strategy wins with certainty.
  FullyQuantumGame trivial{GameDims{1, 1, 1, 2, 2}, Mat::Identity(1, 1), Mat::Identity(4, 4)};
  write(dir + "/trivial_game.json", game_to_json(trivial).dump(2) + "\n");

  write(dir + "/state_depolarized_qubit.json",
        json{{"kind", "depolarized_mes"}, {"m", 2}, {"eps", 0.25}}.dump(2) + "\n");
  write(dir + "/state_product.json",
        json{{"s", 2}, {"t", 2}, {"psi", matrix_to_json(Mat::Identity(4, 4) / 4.0)}}.dump(2) + "\n");

  write(dir + "/toy_bound.json", bound_to_json(compute_bound(toy_preset())).dump(2) + "\n");
  std::cout << "fixtures written to " << dir << "\n";
  return 0;
}
