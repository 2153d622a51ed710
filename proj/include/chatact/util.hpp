#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace chatact {

// 64-bit FNV-1a with a seed folded into the offset basis. Used wherever a
// value must be identical across runs and platforms (feature hashing, ids).
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0);

// Hex SHA-256 of a byte string. Content addresses and taxonomy digests.
std::string sha256_hex(std::string_view data);

// Seeded generator whose draws do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Index drawn proportionally to non-negative weights.
  std::size_t categorical(const std::vector<double>& weights);
  double exponential(double mean);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Compares strings treating maximal digit runs as numbers, so "d:9" < "d:10".
bool natural_less(std::string_view a, std::string_view b);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

}  // namespace chatact
