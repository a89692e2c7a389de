#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

#include "dcq/config.hpp"

namespace dcq {

/// Closed-form classifier-head cost for one method.
struct CostReport {
  Method method = Method::dcq;
  std::int64_t class_count = 0;
  std::int64_t queue_size = 0;
  std::int64_t embed_dim = 0;
  std::int64_t batch_size = 0;
  std::int64_t bytes_per_float = 4;
  std::int64_t head_param_bytes = 0;       // C*D*bpf (full) or K*D*bpf (dcq)
  std::int64_t head_macs_per_batch = 0;    // B*D*C (full) or B*D*(K+1) + generator forward (dcq)
  std::int64_t optimizer_state_bytes = 0;  // momentum buffer of the head; 0 for the queue
};

/// `generator_macs_per_sample` is the extractor's forward cost, charged once
/// per reference sample for dcq.
CostReport head_cost_report(Method method, std::int64_t classes, std::int64_t queue_size, std::int64_t embed_dim,
                            std::int64_t batch_size, std::int64_t bytes_per_float = 4,
                            std::int64_t generator_macs_per_sample = 0);

/// Multiply-accumulates of one forward pass through an MLP with these widths.
std::int64_t mlp_forward_macs(const std::vector<Index>& dims);

nlohmann::json to_json(const CostReport& r);

}  // namespace dcq
