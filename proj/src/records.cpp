#include "tracks/records.hpp"

namespace tracks {

SizeClass classify_size(std::uint64_t bytes) {
    if (bytes <= kSmallFlowLimit) return SizeClass::Small;
    if (bytes <= kMediumFlowLimit) return SizeClass::Medium;
    return SizeClass::Large;
}

const char* to_string(SizeClass c) {
    switch (c) {
        case SizeClass::Small: return "small";
        case SizeClass::Medium: return "medium";
        case SizeClass::Large: return "large";
    }
    return "?";
}

std::optional<SizeClass> parse_size_class(const std::string& s) {
    if (s == "small") return SizeClass::Small;
    if (s == "medium") return SizeClass::Medium;
    if (s == "large") return SizeClass::Large;
    return std::nullopt;
}

const char* to_string(RecoveryKind k) { return k == RecoveryKind::Frr ? "frr" : "rto"; }

}  // namespace tracks
