// Copyright 2026 The Tasteseq Authors.
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

#ifndef TASTESEQ_COMMON_H_
#define TASTESEQ_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tasteseq {

using SongId = std::int64_t;
using Rng = std::mt19937_64;

// Raised when an optimizer or trainer produces a non-finite value.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an operation is called on an object in the wrong state,
// e.g. backward without a recorded forward pass.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed or inconsistent input files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; maps (seed, stream) to an independent seed so that
// per-user or per-tree generators do not share state.
inline std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// 64-bit FNV-1a. Used to fingerprint artifacts so that stale dependencies
// are detected.
inline std::uint64_t Fingerprint(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string FingerprintHex(std::uint64_t fingerprint);

}  // namespace tasteseq

#endif  // TASTESEQ_COMMON_H_
