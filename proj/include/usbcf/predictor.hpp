#pragma once

#include <optional>
#include <string>

#include "usbcf/common.hpp"

namespace usbcf {

/// A trained rating model. `predict` returns nullopt ("no prediction") when
/// the model cannot score the pair; returned values lie inside the scale.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string name() const = 0;
  virtual std::optional<double> predict(EntityId user, EntityId item) const = 0;
};

}  // namespace usbcf
