#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace hdsig {

/// Worker count used when a caller passes threads == 0.
std::size_t default_threads() noexcept;
void set_default_threads(std::size_t threads) noexcept;

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work items are
/// claimed dynamically, so bodies must write only to slots owned by their
/// index. If any body throws, the exception from the lowest failing index is
/// rethrown after all workers stop, which keeps error reporting independent
/// of scheduling.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

/// splitmix64 finalizer; used to derive independent RNG seeds from
/// (base seed, stream index) pairs.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace hdsig
