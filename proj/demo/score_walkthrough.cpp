// Builds a class profile from two hand-written traces and scores a few
// images against it, printing the per-layer arithmetic.

#include <cstdio>
#include <vector>

#include "actscore/scoring/profile.hpp"

using namespace actscore;

namespace {

ActivationTrace trace(std::uint64_t id, std::vector<double> a, std::vector<double> b) {
  ActivationTrace t;
  t.image_id = id;
  const std::size_t na = a.size(), nb = b.size();
  t.entries.push_back({"conv", Tensor({na}, std::move(a))});
  t.entries.push_back({"fc", Tensor({nb}, std::move(b))});
  return t;
}

void print_vec(const char* label, const Tensor& t) {
  std::printf("    %-8s", label);
  for (double v : t.values()) std::printf(" %5.2f", v);
  std::printf("\n");
}

}  // namespace

int main() {
  const std::vector<ActivationTrace> correct{trace(0, {4, 4, 0, 1}, {0.9, 0.1, 0.0}),
                                             trace(1, {4, 0, 0, 1}, {0.8, 0.3, 0.0})};
  const auto profile = scoring::build_profile(correct, 0);
  std::printf("profile of class 0 from %zu images\n", profile.contributing_count);
  for (const auto& l : profile.layers) {
    std::printf("  layer %s: threshold %.3f, %zu neurons in mask\n", l.layer_name.c_str(), l.threshold, l.mask_count);
    print_vec("sum", l.summed);
    print_vec("mask", l.mask);
  }

  const std::vector<ActivationTrace> probes{correct[0], correct[1], trace(7, {4, 4, 0, 0}, {0.0, 0.9, 0.2}),
                                            trace(8, {1, 1, 1, 1}, {0.9, 0.0, 0.0})};
  for (auto basis : {scoring::ThresholdBasis::sum, scoring::ThresholdBasis::mean}) {
    const bool sum = basis == scoring::ThresholdBasis::sum;
    std::printf("\nimage threshold = layer threshold%s\n", sum ? "" : " / contributing images");
    const auto p = scoring::build_profile(correct, 0, {scoring::Norm::max, 2.0, basis});
    for (const auto& rec : scoring::score_batch(probes, p)) {
      std::printf("  image %llu: ratios", static_cast<unsigned long long>(rec.image_id));
      for (double r : rec.ratios) std::printf(" %.3f", r);
      std::printf("  score %s\n", scoring::format_score(rec.score).c_str());
    }
  }
}
