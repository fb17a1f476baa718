#include "spcboot/random.hpp"

#include <vector>

namespace spcboot {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (keys.size() + 1));
  auto push = [&words](std::uint64_t v) {
    const std::uint64_t h = splitmix64(v);
    words.push_back(static_cast<std::uint32_t>(h));
    words.push_back(static_cast<std::uint32_t>(h >> 32));
  };
  std::uint64_t chain = splitmix64(master_seed);
  push(chain);
  for (std::uint64_t k : keys) {
    chain = splitmix64(chain ^ splitmix64(k));
    push(chain);
  }
  std::seed_seq seq(words.begin(), words.end());
  return RngStream(seq);
}

}  // namespace spcboot
