// Copyright 2026 The evc Authors
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

#include <cstdlib>
#include <iostream>
#include <string>

#include "toy_corpus.hpp"

// Usage: evc_toy_corpus <root> [phrases-per-emotion] [seed]
int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: evc_toy_corpus <root> [phrases] [seed]\n";
    return 2;
  }
  evc::testing::ToyCorpusOptions opt;
  if (argc > 2) {
    const auto n = static_cast<std::size_t>(std::stoul(argv[2]));
    if (n < opt.phrases.size()) opt.phrases.erase(opt.phrases.begin(), opt.phrases.end() - static_cast<long>(n));
  }
  if (argc > 3) opt.seed = std::stoull(argv[3]);
  std::cout << evc::testing::write_toy_corpus(argv[1], opt) << " files\n";
  return 0;
}
