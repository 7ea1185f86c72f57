#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace usbcf {

/// A place to obtain the MovieLens-100k ratings: an archive URL (or local
/// path) and the entry holding the ratings inside it.
struct DataSource {
  std::string url;
  std::string entry;
  /// Lines to drop from the top of the entry (a column header).
  int skip_lines = 0;
  /// Pinned digest of the archive itself, empty to skip.
  std::string archive_sha256;
};

/// sha256 of the canonical 100,000-line u.data.
inline constexpr const char* kMovielens100kSha256 =
    "06416e597f82b7342361e41163890c81036900f418ad91315590814211dca490";

/// Official archive first, then a mirror of the same ratings packaged in a
/// public Python wheel.
std::vector<DataSource> default_sources();

struct FetchOptions {
  std::filesystem::path out_dir = "data/ml-100k";
  /// Local archive used instead of downloading.
  std::optional<std::filesystem::path> archive;
  bool verify = true;
  bool force = false;
};

struct FetchResult {
  std::filesystem::path path;
  std::string sha256;
  std::string source;
  bool already_present = false;
};

/// Writes <out_dir>/u.data and checks its digest. An existing file with the
/// pinned digest is left untouched unless `force` is set.
FetchResult fetch_movielens_100k(const FetchOptions& options);

std::string http_get(const std::string& url);

/// Extracts one stored or deflated entry from an in-memory zip archive.
std::string zip_extract(const std::string& archive, const std::string& entry);

}  // namespace usbcf
