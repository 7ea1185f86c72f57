#include "usbcf/hybrid.hpp"

namespace usbcf {

HybridModel::HybridModel(std::vector<std::shared_ptr<const Predictor>> chain)
    : chain_(std::move(chain)) {
  if (chain_.empty()) throw ConfigError("hybrid chain must not be empty");
  for (const auto& p : chain_)
    if (!p) throw ConfigError("hybrid chain holds a null predictor");
}

std::string HybridModel::name() const {
  std::string out;
  for (const auto& p : chain_) {
    if (!out.empty()) out += '+';
    out += p->name();
  }
  return out;
}

std::optional<HybridAnswer> HybridModel::answer(EntityId user, EntityId item) const {
  for (std::size_t k = 0; k < chain_.size(); ++k)
    if (const auto v = chain_[k]->predict(user, item)) return HybridAnswer{*v, k};
  return std::nullopt;
}

std::optional<double> HybridModel::predict(EntityId user, EntityId item) const {
  if (const auto a = answer(user, item)) return a->value;
  return std::nullopt;
}

}  // namespace usbcf
