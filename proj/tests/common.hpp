#pragma once

#include <memory>

#include "horoflow/fields.hpp"
#include "horoflow/surface.hpp"

namespace horoflow::test {

inline SurfacePtr bolza() {
  static const SurfacePtr s = std::make_shared<const FuchsianSurface>(build_bolza());
  return s;
}

inline std::shared_ptr<const PerturbationFamily> default_family() {
  static const auto f = std::make_shared<const PerturbationFamily>(build_admissible_family(bolza(), {}));
  return f;
}

}  // namespace horoflow::test
