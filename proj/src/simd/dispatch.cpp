#include <atomic>
#include <cstdlib>
#include <string_view>

#include "hdsig/simd/kernels.hpp"

namespace hdsig::simd {

namespace {

bool cpu_has_avx2() noexcept {
#if defined(HDSIG_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool has = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return has;
#else
  return false;
#endif
}

Level detect() noexcept {
  Level best = cpu_has_avx2() ? Level::Avx2 : Level::Scalar;
  if (const char* env = std::getenv("HDSIG_SIMD")) {
    std::string_view v(env);
    if (v == "scalar") return Level::Scalar;
    if (v == "avx2" && best == Level::Avx2) return Level::Avx2;
  }
  return best;
}

std::atomic<int>& current() {
  static std::atomic<int> level{static_cast<int>(detect())};
  return level;
}

}  // namespace

std::string_view level_name(Level level) noexcept {
  switch (level) {
    case Level::Scalar: return "scalar";
    case Level::Avx2: return "avx2";
  }
  return "scalar";
}

bool level_available(Level level) noexcept {
  return level == Level::Scalar || (level == Level::Avx2 && cpu_has_avx2());
}

const KernelTable& kernels_for(Level level) noexcept {
#if defined(HDSIG_HAVE_AVX2)
  if (level == Level::Avx2 && cpu_has_avx2()) return avx2::table();
#endif
  (void)level;
  return scalar::table();
}

Level active_level() noexcept { return static_cast<Level>(current().load()); }

void set_level(Level level) noexcept {
  current().store(static_cast<int>(level_available(level) ? level : Level::Scalar));
}

const KernelTable& kernels() noexcept { return kernels_for(active_level()); }

}  // namespace hdsig::simd
