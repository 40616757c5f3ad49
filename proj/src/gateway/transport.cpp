#include "beamassist/gateway/transport.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "beamassist/error.hpp"

namespace beamassist::gateway {

namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, 3> kSources = {"console", "gateway", "cog_manager"};
constexpr std::array<const char*, 7> kKinds = {"user_input", "cog_result",   "confirmation", "execution_result",
                                               "chat",       "function_add", "error"};

template <std::size_t N>
int index_of(const std::array<const char*, N>& names, const std::string& s, const char* what) {
  for (std::size_t i = 0; i < N; ++i)
    if (s == names[i]) return static_cast<int>(i);
  throw Error("InvalidEnvelope", std::string("unknown ") + what + " '" + s + "'");
}

void check_channel_name(const std::string& channel) {
  if (channel.empty() || channel.find("..") != std::string::npos || channel.find('/') != std::string::npos)
    throw Error("ChannelUnavailable", "invalid channel name '" + channel + "'");
}

std::string file_name(long long id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%020lld.json", id);
  return buf;
}

// Sorted ids of the envelope files in dir.
std::vector<long long> envelope_ids(const std::string& dir) {
  std::vector<long long> ids;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() != 25 || name.substr(20) != ".json") continue;
    try {
      ids.push_back(std::stoll(name.substr(0, 20)));
    } catch (const std::exception&) {
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

std::string source_name(Source s) { return kSources[static_cast<int>(s)]; }
Source source_from_name(const std::string& s) { return static_cast<Source>(index_of(kSources, s, "source")); }
std::string envelope_kind_name(EnvelopeKind k) { return kKinds[static_cast<int>(k)]; }
EnvelopeKind envelope_kind_from_name(const std::string& s) {
  return static_cast<EnvelopeKind>(index_of(kKinds, s, "kind"));
}

json envelope_to_json(const Envelope& e) {
  return json{{"id", e.id},
              {"session_id", e.session_id},
              {"source", source_name(e.source)},
              {"kind", envelope_kind_name(e.kind)},
              {"payload", e.payload},
              {"created_at", e.created_at}};
}

Envelope envelope_from_json(const json& j) {
  Envelope e;
  try {
    e.id = j.at("id").get<long long>();
    e.session_id = j.at("session_id").get<std::string>();
    e.source = source_from_name(j.at("source").get<std::string>());
    e.kind = envelope_kind_from_name(j.at("kind").get<std::string>());
    e.payload = j.value("payload", json::object());
    e.created_at = j.value("created_at", "");
  } catch (const json::exception& ex) {
    throw Error("InvalidEnvelope", ex.what());
  }
  return e;
}

void InProcessTransport::open(const std::string& channel) {
  check_channel_name(channel);
  std::lock_guard lock(mu_);
  channels_[channel];
}

Receipt InProcessTransport::publish(const std::string& channel, Envelope e) {
  std::lock_guard lock(mu_);
  auto it = channels_.find(channel);
  if (it == channels_.end()) throw Error("ChannelUnavailable", "channel '" + channel + "' is not open");
  e.id = it->second.empty() ? 1 : it->second.back().id + 1;
  it->second.push_back(e);
  return {channel, e.id};
}

std::vector<Envelope> InProcessTransport::poll(const std::string& channel, long long after_id) const {
  std::lock_guard lock(mu_);
  auto it = channels_.find(channel);
  if (it == channels_.end()) throw Error("ChannelUnavailable", "channel '" + channel + "' is not open");
  std::vector<Envelope> out;
  for (const auto& e : it->second)
    if (e.id > after_id) out.push_back(e);
  return out;
}

DirectoryTransport::DirectoryTransport(std::string root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (!fs::is_directory(root_, ec)) throw Error("ChannelUnavailable", "cannot use directory " + root_);
}

std::string DirectoryTransport::dir_for(const std::string& channel) const {
  check_channel_name(channel);
  return (fs::path(root_) / channel).string();
}

void DirectoryTransport::open(const std::string& channel) {
  std::error_code ec;
  fs::create_directories(dir_for(channel), ec);
  if (ec) throw Error("ChannelUnavailable", "cannot create channel '" + channel + "': " + ec.message());
}

Receipt DirectoryTransport::publish(const std::string& channel, Envelope e) {
  const std::string dir = dir_for(channel);
  if (!fs::is_directory(dir)) throw Error("ChannelUnavailable", "channel '" + channel + "' is not open");
  const std::string lock_path = dir + "/.lock";
  const int fd = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
  if (fd < 0 || ::flock(fd, LOCK_EX) != 0) {
    if (fd >= 0) ::close(fd);
    throw Error("ChannelUnavailable", "cannot lock channel '" + channel + "'");
  }
  try {
    const auto ids = envelope_ids(dir);
    e.id = ids.empty() ? 1 : ids.back() + 1;
    const std::string final_path = dir + "/" + file_name(e.id);
    const std::string tmp = final_path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << envelope_to_json(e).dump() << '\n';
      out.flush();
      if (!out) throw Error("ChannelUnavailable", "write failed in channel '" + channel + "'");
    }
    fs::rename(tmp, final_path);
  } catch (...) {
    ::flock(fd, LOCK_UN);
    ::close(fd);
    throw;
  }
  ::flock(fd, LOCK_UN);
  ::close(fd);
  return {channel, e.id};
}

std::vector<Envelope> DirectoryTransport::poll(const std::string& channel, long long after_id) const {
  const std::string dir = dir_for(channel);
  if (!fs::is_directory(dir)) throw Error("ChannelUnavailable", "channel '" + channel + "' is not open");
  std::vector<Envelope> out;
  for (long long id : envelope_ids(dir)) {
    if (id <= after_id) continue;
    std::ifstream in(dir + "/" + file_name(id), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
      out.push_back(envelope_from_json(json::parse(ss.str())));
    } catch (const std::exception& ex) {
      throw Error("ChannelUnavailable", "corrupt envelope " + std::to_string(id) + ": " + ex.what());
    }
  }
  return out;
}

std::unique_ptr<Transport> make_transport(const std::string& kind, const std::string& dir) {
  if (kind == "inprocess") return std::make_unique<InProcessTransport>();
  if (kind == "directory") {
    if (dir.empty()) throw Error("BadConfig", "directory transport needs a dir");
    return std::make_unique<DirectoryTransport>(dir);
  }
  throw Error("BadConfig", "unknown transport '" + kind + "'");
}

}  // namespace beamassist::gateway
