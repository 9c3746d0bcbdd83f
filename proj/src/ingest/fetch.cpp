#include "d123/error.hpp"
#include "d123/ingest/convert.hpp"

#include <fstream>
#include <json.hpp>

#include <httplib.h>

namespace d123 {

namespace fs = std::filesystem;

namespace {

bool safe_relative(const fs::path& p) {
  if (p.empty() || p.is_absolute()) return false;
  for (const auto& part : p) {
    if (part == "..") return false;
  }
  return true;
}

void fetch_http(const std::string& url, const fs::path& dest) {
  // http://host[:port]/prefix
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string host = url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  httplib::Client client(host);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);
  auto get = [&](const std::string& rel) {
    auto res = client.Get(prefix + "/" + rel);
    if (!res) throw Error(ErrorCode::io_failure, "GET " + url + "/" + rel + ": " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(ErrorCode::io_failure, "GET " + url + "/" + rel + ": HTTP " + std::to_string(res->status));
    return res->body;
  };
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(get("index.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::io_failure, url + "/index.json: " + e.what());
  }
  if (!index.is_array()) throw Error(ErrorCode::io_failure, url + "/index.json: expected a list of paths");
  fs::create_directories(dest);
  for (const auto& entry : index) {
    if (!entry.is_string() || !safe_relative(entry.get<std::string>())) {
      throw Error(ErrorCode::io_failure, url + "/index.json: unsafe entry " + entry.dump());
    }
    const std::string rel = entry.get<std::string>();
    const std::string body = get(rel);
    const fs::path out = dest / rel;
    fs::create_directories(out.parent_path());
    std::ofstream(out, std::ios::binary).write(body.data(), static_cast<std::streamsize>(body.size()));
  }
}

}  // namespace

void fetch_source(const std::string& uri, const fs::path& destination) {
  if (uri.rfind("http://", 0) == 0) {
    fetch_http(uri, destination);
    return;
  }
  if (uri.rfind("https://", 0) == 0) throw Error(ErrorCode::io_failure, "https is not supported by this build: " + uri);
  const fs::path src = uri.rfind("file://", 0) == 0 ? fs::path(uri.substr(7)) : fs::path(uri);
  std::error_code ec;
  if (!fs::is_directory(src, ec)) throw Error(ErrorCode::io_failure, "source " + src.string() + " is not a directory");
  if (fs::exists(destination) && fs::equivalent(src, destination)) return;
  fs::create_directories(destination);
  fs::copy(src, destination, fs::copy_options::recursive | fs::copy_options::overwrite_existing, ec);
  if (ec) throw Error(ErrorCode::io_failure, "copy " + src.string() + " -> " + destination.string() + ": " + ec.message());
}

}  // namespace d123
