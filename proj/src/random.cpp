// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/random.hpp"

#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include "dbae/errors.hpp"
#include "dbae/log.hpp"

namespace dbae {

namespace log {
namespace {
std::size_t g_warnings = 0;
bool g_quiet = false;
}  // namespace

void warn(std::string_view message) {
  ++g_warnings;
  if (!g_quiet) std::cerr << "warning: " << message << '\n';
}
std::size_t warning_count() { return g_warnings; }
void set_quiet(bool quiet) { g_quiet = quiet; }
}  // namespace log

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)), seed_(seed) {}

std::uint64_t RandomStream::next_u64() {
  ++draws_;
  return engine_();
}

double RandomStream::uniform() {
  // 53 random mantissa bits.
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t RandomStream::index(std::size_t n) {
  if (n == 0) throw ContractError("RandomStream::index: empty range");
  // Lemire's multiply-shift; the bias for n << 2^64 is negligible here.
  const unsigned __int128 product = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::size_t>(product >> 64);
}

RandomStream RandomStream::substream(std::uint64_t index) const {
  return RandomStream(splitmix64(seed_ ^ splitmix64(index + 0x5151)));
}

std::string RandomStream::state() const {
  std::ostringstream out;
  out << seed_ << ' ' << draws_ << ' ' << engine_;
  return out.str();
}

void RandomStream::set_state(const std::string& state) {
  std::istringstream in(state);
  in >> seed_ >> draws_ >> engine_;
  if (!in) throw DataError("RandomStream: malformed state string");
}

}  // namespace dbae
