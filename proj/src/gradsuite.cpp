#include "dcq/gradsuite.hpp"

#include "dcq/baseline.hpp"
#include "dcq/class_queue.hpp"
#include "dcq/model.hpp"
#include "dcq/rng.hpp"

namespace dcq {

namespace {

Tensor gaussian(CounterStream& rng, Index rows, Index cols) {
  Tensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

Index between(CounterStream& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace

std::vector<GradSuiteCase> run_gradient_suite(int configs, std::uint64_t seed, double h) {
  std::vector<GradSuiteCase> out;
  for (int c = 0; c < configs; ++c) {
    CounterStream rng(seed, Stream::init, 0xC0DE0000u + static_cast<std::uint32_t>(c));
    const Index d_in = between(rng, 2, 6);
    const Index D = between(rng, 2, 8);
    const Index hidden_layers = between(rng, 1, 2);
    std::vector<Index> dims{d_in};
    for (Index l = 0; l < hidden_layers; ++l) dims.push_back(between(rng, 2, 8));
    dims.push_back(D);
    const Index B = between(rng, 1, 4);
    const Index K = between(rng, B, 6);
    const double s = 1.0 + 3.0 * rng.uniform();
    const double m = 0.5 * rng.uniform();

    MlpParams params = init_extractor(dims, seed + static_cast<std::uint64_t>(c));
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
      params.bias(l) = 0.1 * gaussian(rng, 1, dims[l + 1]);
      params.slope(l) = 0.1 + 0.3 * rng.uniform();
    }
    const Tensor x = gaussian(rng, B, d_in);
    const Tensor w_pos = l2_normalize_rows(gaussian(rng, B, D));
    std::vector<Index> y;
    for (Index i = 0; i < B; ++i) y.push_back(between(rng, 0, K - 1));

    // Queue holding a label shared with the batch and one empty slot when room allows.
    ClassQueue queue(D, K);
    const Index fill = K > 1 ? K - 1 : K;
    std::vector<Index> qlabels;
    for (Index k = 0; k < fill; ++k) qlabels.push_back(k == 0 ? y[0] : between(rng, 0, K - 1));
    queue.enqueue(l2_normalize_rows(gaussian(rng, fill, D)), qlabels);

    const std::size_t n = params.tensors.size();
    const TapeFn dcq_loss = [&](Tape& tape, std::span<const Var> vars) {
      MlpVars mv{std::vector<Var>(vars.begin(), vars.begin() + static_cast<std::ptrdiff_t>(n))};
      const Var f = extract_features(tape, params, mv, tape.constant(x));
      return dcq_cosface_loss(tape, dcq_logits_with_mask(tape, f, w_pos, queue, y), s, m).loss;
    };
    GradSuiteCase dc{"dcq", dims, B, K, s, m, gradcheck(dcq_loss, params.tensors, h)};
    out.push_back(dc);

    const Index classes = K;
    const Tensor head = gaussian(rng, D, classes);
    std::vector<Tensor> with_head = params.tensors;
    with_head.push_back(head);
    const TapeFn fc_loss = [&](Tape& tape, std::span<const Var> vars) {
      MlpVars mv{std::vector<Var>(vars.begin(), vars.begin() + static_cast<std::ptrdiff_t>(n))};
      const Var f = extract_features(tape, params, mv, tape.constant(x));
      return fc_cosface_loss(tape, f, vars[n], y, s, m).loss;
    };
    GradSuiteCase fc{"cosface", dims, B, classes, s, m, gradcheck(fc_loss, with_head, h)};
    out.push_back(fc);
  }
  return out;
}

}  // namespace dcq
