#include "fcfuzz/one_vs_rest.hpp"

namespace fcfuzz {

void require_all_classes(std::span<const ClassLabel> labels, const char* who) {
  std::array<int, kNumClasses> counts{};
  for (ClassLabel l : labels) ++counts[static_cast<int>(l)];
  for (int c = 0; c < kNumClasses; ++c)
    if (counts[c] == 0)
      throw ValidationError(std::string(who) + ": class " +
                            to_string(static_cast<ClassLabel>(c)) +
                            " has no samples");
}

int argmax_class(const std::array<double, kNumClasses>& scores) {
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c)
    if (scores[c] > scores[best]) best = c;
  return best;
}

}  // namespace fcfuzz
