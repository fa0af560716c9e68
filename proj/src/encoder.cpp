#include "tweetrec/encoder.hpp"

#include <array>

namespace tweetrec {

namespace {
constexpr std::array<std::string_view, 4> kKindNames = {"base", "early", "intermediate", "late"};
}

std::string_view fusion_kind_name(FusionKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

FusionKind parse_fusion_kind(std::string_view name) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i)
        if (kKindNames[i] == name) return static_cast<FusionKind>(i);
    throw InvalidInput("unknown model kind: " + std::string(name) +
                       " (expected base, early, intermediate or late)");
}

} // namespace tweetrec
