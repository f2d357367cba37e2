#include <cstdlib>
#include <fstream>
#include <stdexcept>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro.
#include "sawt/errors.hpp"
#include "sawt/qaplib/qaplib.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace sawt::qaplib {
namespace {

constexpr const char* kDefaultBase = "https://coral.ise.lehigh.edu/wp-content/uploads/2014/07";

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // no trailing slash
};

Url split_url(std::string base) {
  while (!base.empty() && base.back() == '/') base.pop_back();
  const auto scheme_end = base.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("base URL lacks a scheme: " + base);
  const auto path_begin = base.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {base, ""};
  return {base.substr(0, path_begin), base.substr(path_begin)};
}

std::optional<std::string> get(httplib::Client& client, const std::string& path) {
  auto res = client.Get(path);
  if (!res) throw DataError("request for " + path + " failed: " + httplib::to_string(res.error()));
  if (res->status == 404) return std::nullopt;
  if (res->status != 200) throw DataError("GET " + path + " returned HTTP " + std::to_string(res->status));
  return res->body;
}

void write(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace

std::filesystem::path fetch(const std::string& name, const std::filesystem::path& dest_dir, std::string base_url) {
  parse_name(name);
  if (base_url.empty()) {
    const char* env = std::getenv("SAWT_QAPLIB_URL");
    base_url = env && *env ? env : kDefaultBase;
  }
  const Url url = split_url(base_url);
  httplib::Client client(url.origin);
  client.set_follow_location(true);
  client.set_connection_timeout(10);

  auto dat = get(client, url.path + "/data.d/" + name + ".dat");
  if (!dat) dat = get(client, url.path + "/" + name + ".dat");
  if (!dat) throw DataError("instance " + name + " not found under " + base_url);
  parse_qaplib(*dat, name);  // refuse to cache garbage

  std::filesystem::create_directories(dest_dir);
  const auto dat_path = dest_dir / (name + ".dat");
  write(dat_path, *dat);
  auto sln = get(client, url.path + "/soln.d/" + name + ".sln");
  if (!sln) sln = get(client, url.path + "/" + name + ".sln");
  if (sln) write(dest_dir / (name + ".sln"), *sln);
  return dat_path;
}

}  // namespace sawt::qaplib
