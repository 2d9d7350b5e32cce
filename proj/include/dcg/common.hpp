#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace dcg {

// Spectral channels, in the fixed ordering used for pair enumeration
// and serialization everywhere in this codebase: R < N < T.
enum class Modality : int { Rgb = 0, Nir = 1, Tir = 2 };

constexpr std::array<Modality, 3> kAllModalities = {Modality::Rgb, Modality::Nir,
                                                    Modality::Tir};

inline int modality_index(Modality m) { return static_cast<int>(m); }

inline const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Rgb: return "rgb";
    case Modality::Nir: return "nir";
    case Modality::Tir: return "tir";
  }
  return "?";
}

inline char modality_letter(Modality m) {
  switch (m) {
    case Modality::Rgb: return 'R';
    case Modality::Nir: return 'N';
    case Modality::Tir: return 'T';
  }
  return '?';
}

// Deterministic preference used to break exact ties (retention fallback,
// dominant-modality selection): N beats T beats R. Lower rank wins.
inline int modality_tiebreak_rank(Modality m) {
  switch (m) {
    case Modality::Nir: return 0;
    case Modality::Tir: return 1;
    case Modality::Rgb: return 2;
  }
  return 3;
}

// Error taxonomy. ConfigError maps to CLI exit code 2, the rest to 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace dcg
