#pragma once

#include <string>

#include "pdfd/errors.hpp"

namespace pdfd {

/// The three feature modalities. Serialized as 0/1/2.
enum class Modality : int { sketch = 0, image = 1, semantic = 2 };

inline int modality_code(Modality m) { return static_cast<int>(m); }

inline Modality modality_from_code(int code) {
    if (code < 0 || code > 2)
        throw DataError("unknown modality code " + std::to_string(code));
    return static_cast<Modality>(code);
}

inline const char* modality_name(Modality m) {
    switch (m) {
    case Modality::sketch: return "sketch";
    case Modality::image: return "image";
    case Modality::semantic: return "semantic";
    }
    return "?";
}

} // namespace pdfd
