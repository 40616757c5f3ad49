#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

namespace beamassist::gateway {

using json = nlohmann::ordered_json;

enum class Source { console, gateway, cog_manager };
enum class EnvelopeKind { user_input, cog_result, confirmation, execution_result, chat, function_add, error };

std::string source_name(Source s);
Source source_from_name(const std::string& s);
std::string envelope_kind_name(EnvelopeKind k);
EnvelopeKind envelope_kind_from_name(const std::string& s);

struct Envelope {
  long long id = 0;  // assigned by publish; strictly increasing per channel
  std::string session_id;
  Source source = Source::gateway;
  EnvelopeKind kind = EnvelopeKind::user_input;
  json payload = json::object();
  std::string created_at;
};

json envelope_to_json(const Envelope& e);
Envelope envelope_from_json(const json& j);

struct Receipt {
  std::string channel;
  long long id = 0;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void open(const std::string& channel) = 0;
  // Throws Error("ChannelUnavailable") for channels never opened.
  virtual Receipt publish(const std::string& channel, Envelope e) = 0;
  // Envelopes with id > after_id in creation order.
  virtual std::vector<Envelope> poll(const std::string& channel, long long after_id) const = 0;
};

class InProcessTransport : public Transport {
 public:
  void open(const std::string& channel) override;
  Receipt publish(const std::string& channel, Envelope e) override;
  std::vector<Envelope> poll(const std::string& channel, long long after_id) const override;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<Envelope>> channels_;
};

// One JSON file per envelope under root/<channel>/, written via rename and
// numbered under an advisory file lock so separate processes can share it.
class DirectoryTransport : public Transport {
 public:
  explicit DirectoryTransport(std::string root);
  void open(const std::string& channel) override;
  Receipt publish(const std::string& channel, Envelope e) override;
  std::vector<Envelope> poll(const std::string& channel, long long after_id) const override;

 private:
  std::string dir_for(const std::string& channel) const;
  std::string root_;
};

// "inprocess" or "directory" (requires dir).
std::unique_ptr<Transport> make_transport(const std::string& kind, const std::string& dir = {});

}  // namespace beamassist::gateway
