#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "usbcf/predictor.hpp"

namespace usbcf {

struct HybridAnswer {
  double value;
  std::size_t member;  // position in the chain
};

/// Ordered fallback chain: the first member that answers a pair wins.
class HybridModel : public Predictor {
 public:
  explicit HybridModel(std::vector<std::shared_ptr<const Predictor>> chain);

  std::string name() const override;
  std::optional<double> predict(EntityId user, EntityId item) const override;
  std::optional<HybridAnswer> answer(EntityId user, EntityId item) const;

  const std::vector<std::shared_ptr<const Predictor>>& chain() const { return chain_; }

 private:
  std::vector<std::shared_ptr<const Predictor>> chain_;
};

}  // namespace usbcf
