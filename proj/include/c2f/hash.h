// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace c2f {

// 64-bit FNV-1a; stable across platforms, used for provenance and manifest ids.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

// splitmix64 finalizer; mixes seed components into an independent stream seed.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts);

std::string hex64(std::uint64_t value);

}  // namespace c2f
