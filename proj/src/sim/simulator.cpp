#include "semroute/sim/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "semroute/embedding.hpp"

namespace semroute::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

std::uint64_t mix(std::uint64_t seed, std::string_view request_id) {
  char seed_bytes[8];
  for (int i = 0; i < 8; ++i) {
    seed_bytes[i] = static_cast<char>((seed >> (8 * i)) & 0xFF);
  }
  std::uint64_t h = fnv1a64(std::string_view(seed_bytes, 8));
  for (unsigned char c : request_id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

RequestDraws draws_for(std::uint64_t seed, std::string_view request_id) {
  std::uint64_t state = mix(seed, request_id);
  RequestDraws draws;
  draws.correctness = to_unit(splitmix64(state));
  draws.token_jitter = 0.8 + 0.4 * to_unit(splitmix64(state));
  draws.latency_jitter = 0.8 + 0.4 * to_unit(splitmix64(state));
  return draws;
}

SimResponse simulate(const RequestEnvelope& request, const SimMeta& meta,
                     const CostModel& model) {
  const CostCell& cell = model.cell(meta.category, meta.reasoning_mode);
  const RequestDraws draws = draws_for(model.seed(), meta.request_id);

  SimResponse response;
  response.answer_correct = draws.correctness < cell.accuracy_prob;
  response.total_tokens = std::max<long long>(
      1, std::llround(cell.mean_tokens * draws.token_jitter));
  response.latency_ms = cell.mean_latency_ms * draws.latency_jitter;

  const long long prompt_tokens =
      std::min<long long>(static_cast<long long>(
                              tokenize(request.user_prompt()).size()),
                          response.total_tokens - 1);
  const long long completion_tokens =
      response.total_tokens - std::max<long long>(prompt_tokens, 0);

  const char* content = response.answer_correct
                            ? "Simulated answer (correct)."
                            : "Simulated answer (incorrect).";
  response.body = {
      {"id", "sim-" + meta.request_id},
      {"object", "chat.completion"},
      {"created", 0},
      {"model", request.model.empty() ? "sim" : request.model},
      {"choices",
       nlohmann::json::array(
           {{{"index", 0},
             {"message", {{"role", "assistant"}, {"content", content}}},
             {"finish_reason", "stop"}}})},
      {"usage",
       {{"prompt_tokens", std::max<long long>(prompt_tokens, 0)},
        {"completion_tokens", completion_tokens},
        {"total_tokens", response.total_tokens}}},
      {"router_sim",
       {{"answer_correct", response.answer_correct},
        {"latency_ms", response.latency_ms},
        {"category", meta.category},
        {"reasoning_mode",
         std::string(reasoning_mode_name(meta.reasoning_mode))}}}};
  return response;
}

}  // namespace semroute::sim
