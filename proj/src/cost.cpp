#include "dcq/cost.hpp"

#include "dcq/errors.hpp"

namespace dcq {

CostReport head_cost_report(Method method, std::int64_t classes, std::int64_t queue_size, std::int64_t embed_dim,
                            std::int64_t batch_size, std::int64_t bytes_per_float, std::int64_t generator_macs_per_sample) {
  if (classes < 1 || embed_dim < 1 || batch_size < 1 || bytes_per_float < 1) {
    throw ConfigError("cost report dimensions must be positive");
  }
  if (method == Method::dcq && queue_size < 1) throw ConfigError("queue size must be positive");
  CostReport r;
  r.method = method;
  r.class_count = classes;
  r.queue_size = method == Method::dcq ? queue_size : 0;
  r.embed_dim = embed_dim;
  r.batch_size = batch_size;
  r.bytes_per_float = bytes_per_float;
  if (method == Method::dcq) {
    r.head_param_bytes = queue_size * embed_dim * bytes_per_float;
    r.head_macs_per_batch = batch_size * embed_dim * (queue_size + 1) + batch_size * generator_macs_per_sample;
    r.optimizer_state_bytes = 0;
  } else {
    r.head_param_bytes = classes * embed_dim * bytes_per_float;
    r.head_macs_per_batch = batch_size * embed_dim * classes;
    r.optimizer_state_bytes = r.head_param_bytes;
  }
  return r;
}

std::int64_t mlp_forward_macs(const std::vector<Index>& dims) {
  std::int64_t macs = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) macs += static_cast<std::int64_t>(dims[l] * dims[l + 1]);
  return macs;
}

nlohmann::json to_json(const CostReport& r) {
  return {{"method", to_string(r.method)},
          {"class_count", r.class_count},
          {"queue_size", r.queue_size},
          {"embed_dim", r.embed_dim},
          {"batch_size", r.batch_size},
          {"bytes_per_float", r.bytes_per_float},
          {"head_param_bytes", r.head_param_bytes},
          {"head_macs_per_batch", r.head_macs_per_batch},
          {"optimizer_state_bytes", r.optimizer_state_bytes}};
}

}  // namespace dcq
