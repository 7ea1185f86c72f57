#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>

#include "usbcf/data.hpp"
#include "usbcf/predictor.hpp"

namespace usbcf {

/// Binary model file: "USBCFMDL" magic, format version, the training ratings
/// (the matrix is rebuilt from them) and one block per model. Supported
/// kinds: bias, ubcf, ibcf, cocluster, usbcf, bbcf and hybrid chains of
/// those. Loading needs no retraining; loaded models predict exactly as the
/// saved ones.
inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(std::ostream& out, const Predictor& model);
void save_model(const std::filesystem::path& path, const Predictor& model);

/// Throws DataError on a bad magic, an unknown version or kind, or a
/// truncated file.
std::shared_ptr<const Predictor> load_model(std::istream& in);
std::shared_ptr<const Predictor> load_model(const std::filesystem::path& path);

}  // namespace usbcf
