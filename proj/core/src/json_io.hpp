#pragma once

// Internal JSON conversions shared by the serializers. Not installed.

#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gcrl/ddpg.hpp"
#include "gcrl/errors.hpp"
#include "gcrl/neuralcore.hpp"

namespace gcrl::detail {

using Json = nlohmann::json;

Json network_to_json(const nn::NetworkParams& net);
nn::NetworkParams network_from_json(const Json& j);

Json adam_to_json(const nn::AdamState& opt);
nn::AdamState adam_from_json(const Json& j);

Json normalizer_to_json(const ddpg::Normalizer& norm);
ddpg::Normalizer normalizer_from_json(const Json& j);

Json hyperparams_to_json(const ddpg::Hyperparams& hp);
ddpg::Hyperparams hyperparams_from_json(const Json& j);

inline std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline std::mt19937_64 rng_from_state(const std::string& text) {
  std::istringstream is(text);
  std::mt19937_64 rng;
  is >> rng;
  if (is.fail()) throw ParseError("rng", "invalid engine state");
  return rng;
}

// Runs `fn`, rethrowing any JSON exception as ParseError tagged with
// `section`.
template <typename Fn>
auto parse_section(const std::string& section, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ParseError&) {
    throw;
  } catch (const Json::exception& e) {
    throw ParseError(section, e.what());
  } catch (const Error& e) {
    throw ParseError(section, e.what());
  }
}

}  // namespace gcrl::detail
