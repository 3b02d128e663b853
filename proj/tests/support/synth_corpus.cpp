// Writes a synthetic raw corpus and its gazetteer: synth_corpus <dir> <docs> <seed>
#include <cstdlib>
#include <iostream>

#include "synthetic.hpp"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: synth_corpus <dir> <docs> <seed>\n";
    return 2;
  }
  haystack::testing::write_synthetic_corpus(argv[1], std::strtoull(argv[2], nullptr, 10),
                                            std::strtoull(argv[3], nullptr, 10));
  return 0;
}
