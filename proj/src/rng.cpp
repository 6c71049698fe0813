#include "pawflow/rng.hpp"

namespace pawflow {

namespace {

uint64_t fnv1a(uint64_t h, const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t split_seed(uint64_t master, std::string_view stage, uint64_t index) {
  uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(h, &master, sizeof(master));
  h = fnv1a(h, stage.data(), stage.size());
  h = fnv1a(h, &index, sizeof(index));
  return splitmix64(h);
}

}  // namespace pawflow
