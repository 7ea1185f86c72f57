#include "usbcf/fetch.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <curl/curl.h>
#include <zlib.h>

#include "usbcf/common.hpp"
#include "usbcf/hashing.hpp"

namespace usbcf {

std::vector<DataSource> default_sources() {
  return {
      {"https://files.grouplens.org/datasets/movielens/ml-100k.zip", "ml-100k/u.data", 0, ""},
      {"https://files.pythonhosted.org/packages/ab/fe/"
       "7d606cb7cd2b166a36b100cb9435d21014ceee16c192d972deb0976967a8/"
       "recbole-1.2.1-py3-none-any.whl",
       "recbole/dataset_example/ml-100k/ml-100k.inter", 1,
       "9c9948202011f37eb0a7c6768129313f00d6403ad221ec940d5e2d5d5f33a407"},
  };
}

namespace {

std::size_t append_body(char* data, std::size_t size, std::size_t n, void* out) {
  static_cast<std::string*>(out)->append(data, size * n);
  return size * n;
}

std::uint32_t le(const std::string& s, std::size_t at, int bytes) {
  if (at + bytes > s.size()) throw DataError("truncated zip archive");
  std::uint32_t v = 0;
  for (int k = bytes - 1; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(s[at + k]);
  return v;
}

std::string inflate_raw(const std::string& in, std::size_t offset, std::size_t size,
                        std::size_t expected) {
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw Error("zlib initialisation failed");
  std::string out(expected, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data() + offset));
  zs.avail_in = static_cast<uInt>(size);
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != expected) throw DataError("corrupt zip entry");
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string drop_lines(std::string text, int n) {
  std::size_t pos = 0;
  for (int k = 0; k < n; ++k) {
    pos = text.find('\n', pos);
    if (pos == std::string::npos) return {};
    ++pos;
  }
  return text.substr(pos);
}

}  // namespace

std::string http_get(const std::string& url) {
  static const bool ready = curl_global_init(CURL_GLOBAL_DEFAULT) == CURLE_OK;
  if (!ready) throw IoError("libcurl initialisation failed");
  std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), &curl_easy_cleanup);
  if (!curl) throw IoError("libcurl handle creation failed");
  std::string body;
  curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl.get(), CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_CONNECTTIMEOUT, 20L);
  curl_easy_setopt(curl.get(), CURLOPT_TIMEOUT, 300L);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, append_body);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, &body);
  const CURLcode rc = curl_easy_perform(curl.get());
  if (rc != CURLE_OK) throw IoError(url + ": " + curl_easy_strerror(rc));
  return body;
}

std::string zip_extract(const std::string& archive, const std::string& entry) {
  // End of central directory: fixed 22 bytes plus a comment of up to 64 KiB.
  if (archive.size() < 22) throw DataError("not a zip archive");
  std::size_t eocd = std::string::npos;
  const std::size_t lowest = archive.size() > 22 + 65535 ? archive.size() - 22 - 65535 : 0;
  for (std::size_t p = archive.size() - 22 + 1; p-- > lowest;)
    if (le(archive, p, 4) == 0x06054b50) {
      eocd = p;
      break;
    }
  if (eocd == std::string::npos) throw DataError("zip end-of-directory record not found");
  const std::size_t entries = le(archive, eocd + 10, 2);
  std::size_t p = le(archive, eocd + 16, 4);
  for (std::size_t k = 0; k < entries; ++k) {
    if (le(archive, p, 4) != 0x02014b50) throw DataError("corrupt zip central directory");
    const std::uint32_t method = le(archive, p + 10, 2);
    const std::size_t packed = le(archive, p + 20, 4), unpacked = le(archive, p + 24, 4);
    const std::size_t name_len = le(archive, p + 28, 2);
    const std::size_t skip = le(archive, p + 30, 2) + le(archive, p + 32, 2);
    const std::size_t local = le(archive, p + 42, 4);
    if (p + 46 + name_len > archive.size()) throw DataError("truncated zip archive");
    if (archive.compare(p + 46, name_len, entry) == 0) {
      if (le(archive, local, 4) != 0x04034b50) throw DataError("corrupt zip local header");
      const std::size_t data = local + 30 + le(archive, local + 26, 2) + le(archive, local + 28, 2);
      if (data + packed > archive.size()) throw DataError("truncated zip archive");
      if (method == 0) return archive.substr(data, packed);
      if (method == 8) return inflate_raw(archive, data, packed, unpacked);
      throw DataError("unsupported zip compression method " + std::to_string(method));
    }
    p += 46 + name_len + skip;
  }
  throw DataError("zip entry not found: " + entry);
}

FetchResult fetch_movielens_100k(const FetchOptions& options) {
  FetchResult result;
  result.path = options.out_dir / "u.data";
  if (!options.force && std::filesystem::exists(result.path)) {
    result.sha256 = sha256_file(result.path);
    if (!options.verify || result.sha256 == kMovielens100kSha256) {
      result.already_present = true;
      result.source = result.path.string();
      return result;
    }
  }

  std::vector<DataSource> sources = default_sources();
  if (options.archive) {
    // A local archive may be either layout; try the known entries in order.
    for (auto& s : sources) {
      s.url = options.archive->string();
      s.archive_sha256.clear();
    }
  }
  std::string errors;
  for (const auto& source : sources) {
    try {
      const std::string archive =
          options.archive ? read_file(*options.archive) : http_get(source.url);
      if (options.verify && !source.archive_sha256.empty() &&
          sha256_hex(archive) != source.archive_sha256)
        throw IoError("archive checksum mismatch");
      const std::string text = drop_lines(zip_extract(archive, source.entry), source.skip_lines);
      const std::string digest = sha256_hex(text);
      if (options.verify && digest != kMovielens100kSha256)
        throw IoError("u.data checksum mismatch (got " + digest + ")");
      std::filesystem::create_directories(options.out_dir);
      {
        std::ofstream out(result.path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + result.path.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw IoError("cannot write " + result.path.string());
      }
      result.sha256 = digest;
      result.source = source.url + "#" + source.entry;
      return result;
    } catch (const Error& e) {
      errors += "\n  " + source.url + ": " + e.what();
    }
  }
  throw IoError("no MovieLens-100k source succeeded:" + errors);
}

}  // namespace usbcf
